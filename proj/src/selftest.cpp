#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include "quantamp/cli.hpp"
#include "quantamp/csv.hpp"
#include "quantamp/kernels.hpp"
#include "quantamp/numerics.hpp"
#include "quantamp/quantized_channel.hpp"
#include "quantamp/signal_prior.hpp"

namespace quantamp {

namespace {

double log_uniform(Rng& rng, double lo, double hi) {
    return std::exp(std::log(lo) + rng.uniform() * (std::log(hi) - std::log(lo)));
}

bool report(std::ostream& os, const std::string& name, double worst, double tol) {
    const bool ok = worst <= tol;
    os << (ok ? "PASS " : "FAIL ") << name << " (worst " << csv_num(worst) << ", tol " << csv_num(tol) << ")\n";
    return ok;
}

double check_conservation(Rng& rng) {
    double worst = 0.0;
    for (int bits = 1; bits <= 4; ++bits) {
        for (int k = 0; k < 200; ++k) {
            const Quantizer qz = make_uniform_quantizer(bits, log_uniform(rng, 0.05, 2.0));
            const double q = 6.0 * (2.0 * rng.uniform() - 1.0);
            const double tau = log_uniform(rng, 1e-4, 10.0);
            const NoisePrior nz{log_uniform(rng, 1e-6, 1.0)};
            double s0 = 0.0, s1 = 0.0, s2 = 0.0;
            for (CellIndex c = 0; c < qz.cells(); ++c) {
                const CellMoments cm = cell_moments(q, tau, c, qz, nz);
                s0 += cm.v0;
                s1 += cm.v1;
                s2 += cm.v2;
            }
            worst = std::max({worst, std::abs(s0 - 1.0), std::abs(s1 - q), std::abs(s2 - q * q - tau)});
        }
    }
    return worst;
}

double check_unification(Rng& rng) {
    const Quantizer sign = make_uniform_quantizer(1, 1.0);
    double worst = 0.0;
    for (int k = 0; k < 500; ++k) {
        const double q = 20.0 * (2.0 * rng.uniform() - 1.0);
        const double tau = log_uniform(rng, 1e-6, 1e2);
        const NoisePrior nz{log_uniform(rng, 1e-8, 10.0)};
        for (int y : {-1, 1}) {
            const CellMoments u = sign_channel_moments(q, tau, y, nz);
            const CellMoments v = cell_moments(q, tau, y < 0 ? 0 : 1, sign, nz);
            worst = std::max({worst, std::abs(u.v0 - v.v0), std::abs(u.v1 - v.v1) / (std::abs(q) + std::sqrt(tau)),
                              std::abs(u.v2 - v.v2) / (q * q + tau)});
        }
    }
    return worst;
}

double check_sign_vs_cells(Rng& rng) {
    const Quantizer sign = make_uniform_quantizer(1, 1.0);
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
        std::vector<double> q(16);
        std::vector<CellIndex> y(16);
        for (std::size_t i = 0; i < q.size(); ++i) {
            q[i] = 10.0 * (2.0 * rng.uniform() - 1.0);
            y[i] = rng.uniform() < 0.5 ? 0 : 1;
        }
        const OutputPseudoData d{q, log_uniform(rng, 1e-4, 10.0), y};
        const NoisePrior nz{log_uniform(rng, 1e-6, 1.0)};
        const auto a = noise_posterior_gradient(d, sign, nz, GradientForm::sign);
        const auto b = noise_posterior_gradient(d, sign, nz, GradientForm::cells);
        worst = std::max({worst, std::abs(a.g - b.g) / std::max(1.0, std::abs(b.g)),
                          std::abs(a.g1 - b.g1) / std::max(1.0, std::abs(b.g1)),
                          std::abs(a.g2 - b.g2) / std::max(1.0, std::abs(b.g2))});
    }
    return worst;
}

double check_em_monotone(Rng& rng) {
    double worst = 0.0;
    for (int k = 0; k < 50; ++k) {
        SignalPrior p;
        p.kappa = 0.05 + 0.9 * rng.uniform();
        p.components = {{0.5, 0.0, log_uniform(rng, 0.1, 5.0)}, {0.5, 2.0 * rng.normal(), log_uniform(rng, 0.01, 2.0)}};
        std::vector<double> r(300);
        for (double& v : r) v = rng.uniform() < 0.5 ? 0.1 * rng.normal() : 1.5 * rng.normal() + 1.0;
        const InputPseudoData d{r, log_uniform(rng, 1e-3, 1.0)};
        const double before = pe_objective(d, p);
        const double after = pe_objective(d, em_update(d, p));
        worst = std::max(worst, before - after);
    }
    return worst;
}

double check_kernels(Rng& rng) {
    const std::size_t m = 37, n = 1500;
    std::vector<double> a(m * n), x(n), s(m), y1(m), y2(m), u1(n), u2(n);
    for (double& v : a) v = rng.normal();
    for (double& v : x) v = rng.normal();
    for (double& v : s) v = rng.normal();
    kernels::serial::gemv(a, m, n, x, y1);
    kernels::parallel::gemv(a, m, n, x, y2);
    kernels::serial::gemv_t(a, m, n, s, u1);
    kernels::parallel::gemv_t(a, m, n, s, u2);
    const bool same = y1 == y2 && u1 == u2 && kernels::serial::sum(x) == kernels::parallel::sum(x);
    return same ? 0.0 : 1.0;
}

}  // namespace

bool run_selftest(std::ostream& os) {
    Rng rng(20240611);
    bool ok = true;
    ok &= report(os, "cell moment conservation, B=1..4", check_conservation(rng), 1e-9);
    ok &= report(os, "sign moments agree with cell moments", check_unification(rng), 1e-10);
    ok &= report(os, "sign and cell noise-gradient forms agree", check_sign_vs_cells(rng), 1e-9);
    ok &= report(os, "EM step does not lower the objective", check_em_monotone(rng), 1e-9);
    ok &= report(os, "serial and OpenMP kernels bit-identical", check_kernels(rng), 0.0);
    return ok;
}

}  // namespace quantamp
