#include "quantamp/harness.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "quantamp/numerics.hpp"

namespace quantamp {

NonzeroDist parse_dist(const std::string& s) {
    if (s == "gaussian") return NonzeroDist::gaussian;
    if (s == "cauchy") return NonzeroDist::cauchy;
    if (s == "laplace") return NonzeroDist::laplace;
    throw std::invalid_argument("unknown distribution '" + s + "'");
}

std::string to_string(NonzeroDist d) {
    switch (d) {
        case NonzeroDist::gaussian: return "gaussian";
        case NonzeroDist::cauchy: return "cauchy";
        case NonzeroDist::laplace: return "laplace";
    }
    return "?";
}

MatrixScale parse_matrix_scale(const std::string& s) {
    if (s == "unit") return MatrixScale::unit;
    if (s == "one_over_M" || s == "one_over_m") return MatrixScale::one_over_m;
    throw std::invalid_argument("unknown matrix variance mode '" + s + "'");
}

std::string to_string(MatrixScale m) { return m == MatrixScale::unit ? "unit" : "one_over_M"; }

std::size_t nonzero_count(std::size_t n, double sparsity) {
    return static_cast<std::size_t>(std::llround(sparsity * static_cast<double>(n)));
}

std::vector<double> gen_signal(std::size_t n, double sparsity, NonzeroDist dist, std::uint64_t seed) {
    if (!(sparsity >= 0.0 && sparsity <= 1.0)) throw std::invalid_argument("gen_signal: sparsity outside [0,1]");
    const std::size_t e = nonzero_count(n, sparsity);
    Rng rng(seed);
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < e; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);

    std::vector<double> x(n, 0.0);
    for (std::size_t i = 0; i < e; ++i) {
        double v = 0.0;
        switch (dist) {
            case NonzeroDist::gaussian: v = rng.normal(); break;
            case NonzeroDist::cauchy: v = std::tan(std::numbers::pi * (rng.uniform_open() - 0.5)); break;
            case NonzeroDist::laplace: {
                const double u = rng.uniform_open() - 0.5;  // (-0.5, 0.5]
                const double a = std::max(1.0 - 2.0 * std::abs(u), 0x1.0p-53);
                v = (u < 0.0 ? 1.0 : -1.0) * std::log(a);
                break;
            }
        }
        x[idx[i]] = v;
    }
    return x;
}

DenseOperator gen_matrix(std::size_t m, std::size_t n, MatrixScale scale, std::uint64_t seed, kernels::Exec exec) {
    if (m == 0 || n == 0) throw std::invalid_argument("gen_matrix: dimensions must be positive");
    const double sd = scale == MatrixScale::unit ? 1.0 : 1.0 / std::sqrt(static_cast<double>(m));
    std::vector<double> a(m * n);
    const Rng root(seed);
    const auto mm = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < mm; ++i) {
        Rng rng = root.split(static_cast<std::uint64_t>(i));
        double* row = a.data() + static_cast<std::size_t>(i) * n;
        for (std::size_t j = 0; j < n; ++j) row[j] = sd * rng.normal();
    }
    return DenseOperator(m, n, std::move(a), exec);
}

double calibrate_noise(std::span<const double> z, double snr_db) {
    double p = 0.0;
    for (double v : z) p += v * v;
    if (!(p > 0.0)) throw std::invalid_argument("calibrate_noise: zero signal");
    return p / static_cast<double>(z.size()) * std::pow(10.0, -snr_db / 10.0);
}

Nmse nmse(std::span<const double> x_true, std::span<const double> x_hat) {
    if (x_true.size() != x_hat.size()) throw std::invalid_argument("nmse: length mismatch");
    double tt = 0.0, th = 0.0, hh = 0.0, err = 0.0;
    for (std::size_t i = 0; i < x_true.size(); ++i) {
        tt += x_true[i] * x_true[i];
        th += x_true[i] * x_hat[i];
        hh += x_hat[i] * x_hat[i];
        err += (x_true[i] - x_hat[i]) * (x_true[i] - x_hat[i]);
    }
    if (!(tt > 0.0)) throw std::invalid_argument("nmse: zero reference signal");
    const double alpha = hh > 0.0 ? th / hh : 0.0;
    // ||x - a xh||^2 = tt - 2 a th + a^2 hh, minimised at a = th / hh
    const double deb = std::max(tt - alpha * th, 0.0) / tt;
    return {err / tt, std::min(deb, err / tt)};
}

double to_db(double v) { return 10.0 * std::log10(v); }

void hard_threshold(std::span<double> x, std::size_t e) {
    if (e >= x.size()) return;
    std::vector<std::size_t> idx(x.size());
    std::iota(idx.begin(), idx.end(), 0);
    auto before = [&](std::size_t a, std::size_t b) {
        const double fa = std::abs(x[a]), fb = std::abs(x[b]);
        return fa > fb || (fa == fb && a < b);
    };
    std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(e), idx.end(), before);
    for (std::size_t i = e; i < idx.size(); ++i) x[idx[i]] = 0.0;
}

std::vector<double> qiht_baseline(const LinearOperator& op, std::span<const CellIndex> y, const Quantizer& qz,
                                  std::size_t e, double step, int iters) {
    if (e < 1) throw std::invalid_argument("qiht_baseline: sparsity must be >= 1");
    if (y.size() != op.rows()) throw std::invalid_argument("qiht_baseline: y length mismatch");
    const std::size_t n = op.cols(), m = op.rows();
    if (!(step > 0.0)) step = static_cast<double>(n) / op.frob_norm_sq();
    const std::vector<double> target = dequantize(y, qz);
    std::vector<double> x(n, 0.0), ax(m), res(m), g(n);
    for (int it = 0; it < iters; ++it) {
        op.forward(x, ax);
        for (std::size_t i = 0; i < m; ++i) res[i] = target[i] - qz.symbols[quantize(ax[i], qz)];
        op.adjoint(res, g);
        for (std::size_t j = 0; j < n; ++j) x[j] += step * g[j];
        hard_threshold(x, e);
    }
    return x;
}

std::vector<double> dequantize_midpoint(std::span<const CellIndex> y, const Quantizer& qz) {
    std::vector<double> out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        const CellIndex c = y[i];
        if (c >= qz.cells()) throw std::out_of_range("dequantize_midpoint: invalid cell index");
        const double a = qz.lower(c), b = qz.upper(c);
        out[i] = std::isfinite(a) && std::isfinite(b) ? 0.5 * (a + b) : qz.symbols[c];
    }
    return out;
}

SolverResult amp_awgn_baseline(const LinearOperator& op, std::span<const CellIndex> y, const Quantizer& qz,
                               const SignalPrior& prior0, NoisePrior noise0, const SolverOptions& opts,
                               std::span<const double> truth) {
    const std::vector<double> yd = dequantize_midpoint(y, qz);
    return run_amp_gaussian(op, yd, prior0, noise0, opts, truth);
}

}  // namespace quantamp
