#include "quantamp/amp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>

#include "quantamp/csv.hpp"
#include "quantamp/numerics.hpp"

namespace quantamp {

namespace {

constexpr double kDivergeTau = 1e12;
constexpr double kRelEps = 1e-12;

struct QuantizedOutput {
    const Quantizer& qz;
    std::span<const CellIndex> y;

    std::size_t size() const { return y.size(); }
    PosteriorMoments posterior(std::size_t m, double q, double tau_q, NoisePrior th) const {
        return z_posterior_moments(q, tau_q, y[m], qz, th);
    }
    NoisePrior update(std::span<const double> q, double tau_q, NoisePrior th, kernels::Exec e) const {
        return update_gamma_w(OutputPseudoData{q, tau_q, y}, qz, th, e);
    }
};

struct GaussianOutput {
    std::span<const double> y;

    std::size_t size() const { return y.size(); }
    PosteriorMoments posterior(std::size_t m, double q, double tau_q, NoisePrior th) const {
        const double g = th.gamma_w;
        return {(g * q + tau_q * y[m]) / (tau_q + g), tau_q * g / (tau_q + g)};
    }
    NoisePrior update(std::span<const double> q, double tau_q, NoisePrior th, kernels::Exec e) const {
        const std::size_t m = y.size();
        std::vector<double> a(m), b(m), c(m);
        auto eval = [&](double g) {
            const double s = tau_q + g;
            const auto mm = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (e == kernels::Exec::parallel)
            for (std::ptrdiff_t i = 0; i < mm; ++i) {
                const double d = y[i] - q[i];
                a[i] = log_normal_pdf(y[i], q[i], s);
                b[i] = -0.5 / s + 0.5 * d * d / (s * s);
                c[i] = 0.5 / (s * s) - d * d / (s * s * s);
            }
            return ObjectiveDerivs{kernels::sum(e, a), kernels::sum(e, b), kernels::sum(e, c)};
        };
        return NoisePrior{second_order_variance_step(th.gamma_w, eval)};
    }
};

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

template <class Channel>
SolverResult amp_loop(const LinearOperator& op, const Channel& ch, const SignalPrior& prior0, NoisePrior noise0,
                      const SolverOptions& opts, std::span<const double> truth) {
    opts.validate();
    prior0.validate();
    const std::size_t n = op.cols();
    const std::size_t m = op.rows();
    if (ch.size() != m) throw std::invalid_argument("amp: measurement count does not match operator rows");
    if (!truth.empty() && truth.size() != n) throw std::invalid_argument("amp: truth length does not match operator");
    if (!(noise0.gamma_w >= kVarFloor)) throw std::invalid_argument("amp: initial gamma_w below floor");

    SolverResult res;
    const double frob = op.frob_norm_sq();
    if (!(frob > 0.0) || !std::isfinite(frob))
        throw DivergenceError("amp: degenerate operator (squared Frobenius norm is " + csv_num(frob) + ")", {});

    const kernels::Exec ex = op.exec();
    const bool par = ex == kernels::Exec::parallel;
    const double dn = static_cast<double>(n);
    const double dm = static_cast<double>(m);

    SignalPrior lambda = prior0;
    NoisePrior theta = noise0;
    const double first_var_floor = prior0.components[0].var * 1e-4;
    double eta = opts.damping;
    int grow_streak = 0;
    double prev_rel = std::numeric_limits<double>::infinity();

    AmpState st;
    st.x_hat.assign(n, 0.0);
    st.s.assign(m, 0.0);
    st.q.assign(m, 0.0);
    st.r.assign(n, 0.0);
    st.tau_x = std::max(prior_variance(lambda), kVarFloor);
    st.tau_q = std::max(frob * st.tau_x / dm, kVarFloor);

    std::vector<double> sterm(m), ats(n), x_new(n), vx(n), diff(n), ax(m);
    const auto mm = static_cast<std::ptrdiff_t>(m);
    const auto nn = static_cast<std::ptrdiff_t>(n);

    auto fail = [&](const std::string& why, IterationRecord rec) {
        res.trace.push_back(rec);
        throw DivergenceError("amp: " + why + " at iteration " + std::to_string(rec.iter), res.trace);
    };

    for (int t = 0; t < opts.max_iters; ++t) {
        st.t = t;
        const bool pe_now = t >= opts.pe_start_iter;

        // output nonlinear step
#pragma omp parallel for schedule(static) if (par)
        for (std::ptrdiff_t i = 0; i < mm; ++i) {
            const PosteriorMoments z = ch.posterior(static_cast<std::size_t>(i), st.q[i], st.tau_q, theta);
            st.s[i] = (z.mean - st.q[i]) / st.tau_q;
            sterm[i] = (1.0 - z.var / st.tau_q) / st.tau_q;
        }
        st.tau_s = std::max(kernels::sum(ex, sterm) / dm, kProbFloor);

        // input linear step
        st.tau_r = std::max(dn / (frob * st.tau_s), kVarFloor);
        op.adjoint(st.s, ats);
#pragma omp parallel for schedule(static) if (par)
        for (std::ptrdiff_t j = 0; j < nn; ++j) st.r[j] = st.x_hat[j] + st.tau_r * ats[j];

        IterationRecord rec{t, st.tau_x, st.tau_r, st.tau_q, std::numeric_limits<double>::quiet_NaN(),
                            std::numeric_limits<double>::quiet_NaN(), theta.gamma_w, lambda.kappa};
        if (!std::isfinite(st.tau_r) || !all_finite(st.r)) fail("non-finite pseudo-data r", rec);

        if (opts.estimate_lambda && pe_now) {
            SignalPrior upd = lambda;
            for (int e = 0; e < opts.inner_pe_iters; ++e)
                upd = em_update(InputPseudoData{st.r, st.tau_r}, upd, first_var_floor, ex);
            lambda = damp(lambda, upd, eta);
        }

        // input nonlinear step
#pragma omp parallel for schedule(static) if (par)
        for (std::ptrdiff_t j = 0; j < nn; ++j) {
            const PosteriorMoments p = bgm_posterior(st.r[j], st.tau_r, lambda);
            x_new[j] = opts.damp_x ? damp(st.x_hat[j], p.mean, opts.damping_x) : p.mean;
            vx[j] = p.var;
        }
        const double tau_x_raw = kernels::sum(ex, vx) / dn;
        rec.tau_x = tau_x_raw;
        if (!std::isfinite(tau_x_raw) || tau_x_raw > kDivergeTau || !all_finite(x_new)) fail("divergence", rec);
        st.tau_x = std::max(tau_x_raw, kVarFloor);

        for (std::size_t j = 0; j < n; ++j) diff[j] = x_new[j] - st.x_hat[j];
        const double old_norm = std::sqrt(kernels::dot(ex, st.x_hat, st.x_hat));
        const double rel = std::sqrt(kernels::dot(ex, diff, diff)) / std::max(old_norm, kRelEps);
        st.x_hat.swap(x_new);

        // output linear step with the Onsager term
        st.tau_q = std::max(frob * st.tau_x / dm, kVarFloor);
        op.forward(st.x_hat, ax);
#pragma omp parallel for schedule(static) if (par)
        for (std::ptrdiff_t i = 0; i < mm; ++i) st.q[i] = ax[i] - st.tau_q * st.s[i];

        if (opts.estimate_theta && pe_now) {
            NoisePrior upd = theta;
            for (int e = 0; e < opts.inner_pe_iters; ++e) upd = ch.update(st.q, st.tau_q, upd, ex);
            theta = NoisePrior{std::max(damp(theta.gamma_w, upd.gamma_w, eta), kVarFloor)};
        }

        rec.tau_x = st.tau_x;
        rec.tau_q = st.tau_q;
        rec.rel_change = rel;
        rec.gamma_w = theta.gamma_w;
        rec.kappa = lambda.kappa;
        if (!truth.empty()) {
            for (std::size_t j = 0; j < n; ++j) diff[j] = st.x_hat[j] - truth[j];
            rec.mse = kernels::dot(ex, diff, diff) / dn;
        }
        res.trace.push_back(rec);
        res.iterations = t + 1;
        if (opts.on_iteration) opts.on_iteration(st);

        if (rel < opts.tol) {
            res.converged = true;
            break;
        }
        // damping backoff when the iterates keep moving further
        grow_streak = rel > prev_rel ? grow_streak + 1 : 0;
        prev_rel = rel;
        if (grow_streak >= 5) {
            eta *= 0.5;
            grow_streak = 0;
        }
    }

    res.x_hat = std::move(st.x_hat);
    res.lambda_hat = lambda;
    res.theta_hat = theta;
    return res;
}

}  // namespace

void SolverOptions::validate() const {
    if (max_iters < 1) throw std::invalid_argument("SolverOptions: max_iters must be >= 1");
    if (!(tol > 0.0)) throw std::invalid_argument("SolverOptions: tol must be positive");
    if (!(damping > 0.0 && damping <= 1.0)) throw std::invalid_argument("SolverOptions: damping must be in (0, 1]");
    if (!(damping_x > 0.0 && damping_x <= 1.0))
        throw std::invalid_argument("SolverOptions: damping_x must be in (0, 1]");
    if (inner_pe_iters < 1) throw std::invalid_argument("SolverOptions: inner_pe_iters must be >= 1");
    if (pe_start_iter < 0) throw std::invalid_argument("SolverOptions: pe_start_iter must be >= 0");
}

SolverResult run_amp_pe(const LinearOperator& op, std::span<const CellIndex> y, const Quantizer& qz,
                        const SignalPrior& prior0, NoisePrior noise0, const SolverOptions& opts,
                        std::span<const double> truth) {
    qz.validate();
    for (CellIndex c : y)
        if (c >= qz.cells()) throw std::invalid_argument("run_amp_pe: measurement cell index out of range");
    return amp_loop(op, QuantizedOutput{qz, y}, prior0, noise0, opts, truth);
}

SolverResult run_amp_gaussian(const LinearOperator& op, std::span<const double> y, const SignalPrior& prior0,
                              NoisePrior noise0, const SolverOptions& opts, std::span<const double> truth) {
    return amp_loop(op, GaussianOutput{y}, prior0, noise0, opts, truth);
}

double damp(double old_value, double new_value, double eta) {
    if (!(eta > 0.0 && eta <= 1.0)) throw std::invalid_argument("damp: eta must be in (0, 1]");
    return eta == 1.0 ? new_value : old_value + eta * (new_value - old_value);
}

std::vector<double> damp(std::span<const double> old_value, std::span<const double> new_value, double eta) {
    if (old_value.size() != new_value.size()) throw std::invalid_argument("damp: shape mismatch");
    std::vector<double> out(old_value.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = damp(old_value[i], new_value[i], eta);
    return out;
}

std::vector<double> ridge_least_squares(const LinearOperator& op, std::span<const double> y, double ridge,
                                        int iters) {
    const std::size_t n = op.cols();
    const kernels::Exec ex = op.exec();
    std::vector<double> x(n, 0.0), r(n), p(n), ap(n), tmp(op.rows());
    op.adjoint(y, r);
    p = r;
    double rr = kernels::dot(ex, r, r);
    const double stop = rr * 1e-30;
    for (int k = 0; k < iters && rr > stop && rr > 0.0; ++k) {
        op.forward(p, tmp);
        op.adjoint(tmp, ap);
        for (std::size_t j = 0; j < n; ++j) ap[j] += ridge * p[j];
        const double alpha = rr / kernels::dot(ex, p, ap);
        for (std::size_t j = 0; j < n; ++j) {
            x[j] += alpha * p[j];
            r[j] -= alpha * ap[j];
        }
        const double rr_new = kernels::dot(ex, r, r);
        const double beta = rr_new / rr;
        for (std::size_t j = 0; j < n; ++j) p[j] = r[j] + beta * p[j];
        rr = rr_new;
    }
    return x;
}

KMeansResult kmeans_1d(std::span<const double> values, std::size_t k, std::uint64_t seed, int max_iters) {
    if (k == 0) throw std::invalid_argument("kmeans_1d: k must be >= 1");
    if (values.empty()) throw std::invalid_argument("kmeans_1d: no data");
    const std::size_t n = values.size();
    KMeansResult res;
    Rng rng(seed);

    // k-means++ seeding
    res.centers.push_back(values[rng.below(n)]);
    std::vector<double> d2(n);
    while (res.centers.size() < k) {
        double tot = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            double best = std::numeric_limits<double>::infinity();
            for (double c : res.centers) best = std::min(best, (values[j] - c) * (values[j] - c));
            d2[j] = best;
            tot += best;
        }
        std::size_t pick = rng.below(n);
        if (tot > 0.0) {
            const double u = rng.uniform() * tot;
            double cum = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                cum += d2[j];
                if (cum > u) {
                    pick = j;
                    break;
                }
            }
        }
        res.centers.push_back(values[pick]);
    }

    res.assignment.assign(n, k);
    for (int it = 0; it < max_iters; ++it) {
        bool changed = false;
        double obj = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            std::size_t best = 0;
            double bd = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < k; ++c) {
                const double d = (values[j] - res.centers[c]) * (values[j] - res.centers[c]);
                if (d < bd) {
                    bd = d;
                    best = c;
                }
            }
            changed |= res.assignment[j] != best;
            res.assignment[j] = best;
            obj += bd;
        }
        res.objective.push_back(obj);
        if (!changed) break;
        std::vector<double> sum(k, 0.0);
        std::vector<std::size_t> cnt(k, 0);
        for (std::size_t j = 0; j < n; ++j) {
            sum[res.assignment[j]] += values[j];
            ++cnt[res.assignment[j]];
        }
        for (std::size_t c = 0; c < k; ++c)
            if (cnt[c] > 0) res.centers[c] = sum[c] / static_cast<double>(cnt[c]);
    }
    return res;
}

SignalPrior init_prior_from_data(const LinearOperator& op, std::span<const double> y_dequant,
                                 std::size_t n_components, std::uint64_t seed) {
    if (n_components < 1 || n_components > kMaxComponents)
        throw std::invalid_argument("init_prior_from_data: component count must be in [1, 16]");
    if (y_dequant.size() != op.rows()) throw std::invalid_argument("init_prior_from_data: y length mismatch");
    const std::size_t n = op.cols();
    const double ridge = 1e-3 * op.frob_norm_sq() / static_cast<double>(n);
    const std::vector<double> xls = ridge_least_squares(op, y_dequant, ridge, 50);

    const double dn = static_cast<double>(n);
    const double mu = std::accumulate(xls.begin(), xls.end(), 0.0) / dn;
    double total_var = 0.0;
    for (double v : xls) total_var += (v - mu) * (v - mu);
    total_var = std::max(total_var / dn, kVarFloor);

    const KMeansResult km = kmeans_1d(xls, n_components, seed);
    const std::size_t k = n_components;
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    // cluster nearest zero becomes the pinned zero-mean component, the rest ordered by center
    const auto zero_it = std::min_element(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(km.centers[a]) < std::abs(km.centers[b]);
    });
    std::iter_swap(order.begin(), zero_it);
    std::sort(order.begin() + 1, order.end(), [&](std::size_t a, std::size_t b) { return km.centers[a] < km.centers[b]; });

    std::vector<double> cnt(k, 0.0), ss(k, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t c = km.assignment[j];
        const double d = xls[j] - km.centers[c];
        cnt[c] += 1.0;
        ss[c] += d * d;
    }

    SignalPrior prior;
    prior.kappa = 0.1;
    double wsum = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t c = order[i];
        MixtureComponent comp;
        comp.weight = std::max(cnt[c] / dn, 1e-6);
        if (i == 0) {
            comp.mean = 0.0;
            comp.var = total_var;
        } else {
            comp.mean = km.centers[c];
            comp.var = cnt[c] > 1.0 ? std::max(ss[c] / cnt[c], kVarFloor) : total_var;
        }
        wsum += comp.weight;
        prior.components.push_back(comp);
    }
    for (auto& c : prior.components) c.weight /= wsum;
    return prior;
}

void write_trace_csv(std::ostream& os, const std::vector<IterationRecord>& trace) {
    os << kCsvHeader << '\n' << "iter,tau_x,tau_r,tau_q,rel_change,mse\n";
    for (const auto& r : trace)
        os << r.iter << ',' << csv_num(r.tau_x) << ',' << csv_num(r.tau_r) << ',' << csv_num(r.tau_q) << ','
           << csv_num(r.rel_change) << ',' << csv_num(r.mse) << '\n';
}

void to_json(nlohmann::json& j, const SolverOptions& o) {
    j = nlohmann::json{{"max_iters", o.max_iters},         {"tol", o.tol},
                       {"damping", o.damping},             {"inner_pe_iters", o.inner_pe_iters},
                       {"estimate_lambda", o.estimate_lambda}, {"estimate_theta", o.estimate_theta},
                       {"damp_x", o.damp_x},               {"damping_x", o.damping_x},
                       {"pe_start_iter", o.pe_start_iter}};
}

void from_json(const nlohmann::json& j, SolverOptions& o) {
    o.max_iters = j.value("max_iters", o.max_iters);
    o.tol = j.value("tol", o.tol);
    o.damping = j.value("damping", o.damping);
    o.inner_pe_iters = j.value("inner_pe_iters", o.inner_pe_iters);
    o.estimate_lambda = j.value("estimate_lambda", o.estimate_lambda);
    o.estimate_theta = j.value("estimate_theta", o.estimate_theta);
    o.damp_x = j.value("damp_x", o.damp_x);
    o.damping_x = j.value("damping_x", o.damping_x);
    o.pe_start_iter = j.value("pe_start_iter", o.pe_start_iter);
    o.validate();
}

void to_json(nlohmann::json& j, const IterationRecord& r) {
    auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
    j = nlohmann::json{{"iter", r.iter},           {"tau_x", num(r.tau_x)},     {"tau_r", num(r.tau_r)},
                       {"tau_q", num(r.tau_q)},    {"rel_change", num(r.rel_change)}, {"mse", num(r.mse)},
                       {"gamma_w", num(r.gamma_w)}, {"kappa", num(r.kappa)}};
}

void to_json(nlohmann::json& j, const SolverResult& r) {
    j = nlohmann::json{{"iterations", r.iterations},
                       {"converged", r.converged},
                       {"lambda_hat", r.lambda_hat},
                       {"theta_hat", {{"gamma_w", r.theta_hat.gamma_w}}},
                       {"trace", r.trace}};
}

}  // namespace quantamp
