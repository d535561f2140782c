#include "quantamp/state_evolution.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "quantamp/amp_solver.hpp"
#include "quantamp/csv.hpp"
#include "quantamp/kernels.hpp"
#include "quantamp/numerics.hpp"

namespace quantamp {

namespace {

constexpr std::size_t kSeChunk = 4096;

Sym2 sample_cov(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    const double ma = kernels::parallel::sum(a) / n;
    const double mb = kernels::parallel::sum(b) / n;
    double xx = 0.0, xy = 0.0, yy = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma, db = b[i] - mb;
        xx += da * da;
        xy += da * db;
        yy += db * db;
    }
    return {xx / n, xy / n, yy / n};
}

}  // namespace

void SeOptions::validate() const {
    if (!(beta > 0.0)) throw std::invalid_argument("SeOptions: beta must be positive");
    if (mc_samples < 1000) throw std::invalid_argument("SeOptions: mc_samples must be >= 1000");
    if (max_iters < 1) throw std::invalid_argument("SeOptions: max_iters must be >= 1");
    if (!(damping > 0.0 && damping <= 1.0)) throw std::invalid_argument("SeOptions: damping must be in (0, 1]");
    if (inner_pe_iters < 1) throw std::invalid_argument("SeOptions: inner_pe_iters must be >= 1");
}

std::vector<double> SeResult::tau_x() const {
    std::vector<double> out;
    for (const auto& s : states) out.push_back(s.tau_x_bar);
    return out;
}

SeResult run_state_evolution(const SignalPrior& prior, const Quantizer& qz, double gamma_w_true,
                             const SeOptions& opts, bool estimate_params) {
    opts.validate();
    prior.validate();
    qz.validate();
    if (!(gamma_w_true > 0.0)) throw std::invalid_argument("run_state_evolution: gamma_w must be positive");

    const double nu_x = prior_variance(prior);
    const std::size_t ns = opts.mc_samples;
    const double dns = static_cast<double>(ns);
    const std::size_t chunks = (ns + kSeChunk - 1) / kSeChunk;
    const auto nc = static_cast<std::ptrdiff_t>(chunks);
    const Rng root(opts.seed);

    SignalPrior lambda = estimate_params && opts.initial_prior ? *opts.initial_prior : prior;
    NoisePrior theta{estimate_params && opts.initial_gamma_w ? *opts.initial_gamma_w : gamma_w_true};
    const double first_var_floor = lambda.components[0].var * 1e-4;

    SeResult out;
    SeState cur;
    cur.t = 0;
    cur.tau_x_bar = nu_x;
    cur.K_x = {nu_x, 0.0, 0.0};
    cur.err_bar = nu_x;
    cur.err_debiased_bar = nu_x;
    cur.gamma_w_hat = theta.gamma_w;
    cur.kappa_hat = lambda.kappa;
    out.states.push_back(cur);

    std::vector<double> qv(ns), zterm(ns), xv(ns), rv(ns), xhat(ns), vx(ns);
    std::vector<CellIndex> yv(ns);

    for (int t = 0; t < opts.max_iters; ++t) {
        const bool pe_now = estimate_params && t >= opts.pe_start_iter;
        const double tq = std::max(cur.tau_x_bar / opts.beta, kVarFloor);
        cur.tau_q_bar = tq;
        cur.K_q = {cur.K_x[0] / opts.beta, cur.K_x[1] / opts.beta, cur.K_x[2] / opts.beta};

        double var_q = nu_x / opts.beta - tq;
        if (var_q < -1e-6)
            out.warnings.push_back("iteration " + std::to_string(t) + ": Q variance " + csv_num(var_q) +
                                   " clamped to 0");
        var_q = std::max(var_q, 0.0);
        const double sd_q = std::sqrt(var_q), sd_z = std::sqrt(tq), sd_w = std::sqrt(gamma_w_true);

        // Q -> Z -> Y
        const Rng out_rng = root.split(2 * static_cast<std::uint64_t>(t));
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t c = 0; c < nc; ++c) {
            Rng rng = out_rng.split(static_cast<std::uint64_t>(c));
            const std::size_t end = std::min(ns, static_cast<std::size_t>(c + 1) * kSeChunk);
            for (std::size_t i = static_cast<std::size_t>(c) * kSeChunk; i < end; ++i) {
                const double q = sd_q * rng.normal();
                const double z = q + sd_z * rng.normal();
                qv[i] = q;
                yv[i] = quantize(z + sd_w * rng.normal(), qz);
            }
        }

        if (pe_now) {
            NoisePrior upd = theta;
            for (int e = 0; e < opts.inner_pe_iters; ++e)
                upd = update_gamma_w(OutputPseudoData{qv, tq, yv}, qz, upd);
            theta = NoisePrior{std::max(damp(theta.gamma_w, upd.gamma_w, opts.damping), kVarFloor)};
        }

        const auto nn = static_cast<std::ptrdiff_t>(ns);
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t i = 0; i < nn; ++i) {
            const PosteriorMoments z = z_posterior_moments(qv[i], tq, yv[i], qz, theta);
            zterm[i] = (1.0 - z.var / tq) / tq;
        }
        // inverse of the averaged precision, as in the solver's scalar tau_r
        cur.tau_r_bar = std::max(dns / std::max(kernels::parallel::sum(zterm), kProbFloor), kVarFloor);

        // X -> R
        const Rng in_rng = root.split(2 * static_cast<std::uint64_t>(t) + 1);
        const double sd_r = std::sqrt(cur.tau_r_bar);
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t c = 0; c < nc; ++c) {
            const std::size_t lo = static_cast<std::size_t>(c) * kSeChunk;
            const std::size_t end = std::min(ns, lo + kSeChunk);
            Rng rng = in_rng.split(static_cast<std::uint64_t>(c));
            const auto draws = sample_bgm(prior, end - lo, rng.next_u64());
            for (std::size_t i = lo; i < end; ++i) {
                xv[i] = draws[i - lo];
                rv[i] = xv[i] + sd_r * rng.normal();
            }
        }

        if (pe_now) {
            SignalPrior upd = lambda;
            for (int e = 0; e < opts.inner_pe_iters; ++e)
                upd = em_update(InputPseudoData{rv, cur.tau_r_bar}, upd, first_var_floor);
            lambda = damp(lambda, upd, opts.damping);
        }

#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t i = 0; i < nn; ++i) {
            const PosteriorMoments p = bgm_posterior(rv[i], cur.tau_r_bar, lambda);
            xhat[i] = p.mean;
            vx[i] = p.var;
        }
        const double mean_v = kernels::parallel::sum(vx) / dns;
        double ss = 0.0;
        for (double v : vx) ss += (v - mean_v) * (v - mean_v);
        const double e_xx = kernels::parallel::dot(xv, xv) / dns;
        const double e_xh = kernels::parallel::dot(xv, xhat) / dns;
        const double e_hh = kernels::parallel::dot(xhat, xhat) / dns;

        out.states.back().tau_q_bar = cur.tau_q_bar;
        out.states.back().K_q = cur.K_q;
        out.states.back().tau_r_bar = cur.tau_r_bar;

        SeState next;
        next.t = t + 1;
        next.tau_x_bar = std::max(mean_v, 0.0);
        next.mc_stderr = std::sqrt(ss / (dns - 1.0) / dns);
        next.K_x = sample_cov(xv, xhat);
        next.err_bar = std::max(e_xx - 2.0 * e_xh + e_hh, 0.0);
        next.err_debiased_bar = e_hh > 0.0 ? std::max(e_xx - e_xh * e_xh / e_hh, 0.0) : e_xx;
        next.gamma_w_hat = theta.gamma_w;
        next.kappa_hat = lambda.kappa;
        out.states.push_back(next);
        cur = next;
    }
    return out;
}

void write_se_csv(std::ostream& os, const SeResult& se) {
    os << kCsvHeader << '\n' << "iter,tau_x_bar,mc_stderr\n";
    for (const auto& s : se.states) os << s.t << ',' << csv_num(s.tau_x_bar) << ',' << csv_num(s.mc_stderr) << '\n';
}

}  // namespace quantamp
