#include "quantamp/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace quantamp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log(sqrt(2 pi))
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double log_std_pdf(double x) { return -0.5 * x * x - kLogSqrt2Pi; }
double std_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

// Backward evaluation of the Mills-ratio continued fraction
//   Q(x)/phi(x) = 1/(x + 1/(x + 2/(x + 3/(x + ...))))
// valid for x > 3, where 64 levels are at machine precision.
// c = E[v - x | v > x], var = Var[v | v > x], ratio = Q(x)/phi(x).
struct TailCf {
    double c;
    double var;
    double ratio;
};

TailCf tail_cf(double x) {
    double t = 0.0;
    for (int k = 64; k >= 2; --k) t = k / (x + t);
    const double d = t;
    const double c = 1.0 / (x + d);
    return {c, (d - c) * c, 1.0 / (x + c)};
}

TruncatedMoments make_result(double log_mass, double mean, double var, double rho_lo, double rho_hi) {
    return {StableLogProb{log_mass}, mean, std::max(var, 0.0), rho_lo, rho_hi};
}

// t = v - a on [0, w], density exp(-a t - t^2/2); valid when w and a*w are small.
TruncatedMoments narrow_cell(double a, double b) {
    const double w = b - a;
    const double u = a * w;
    const double h = 0.5 * w * w;
    double s[3] = {0.0, 0.0, 0.0};
    double cj = 1.0;
    for (int j = 0; j <= 12; ++j) {
        double cl = cj;
        for (int l = 0; l <= 40; ++l) {
            const int base = 2 * j + l + 1;
            s[0] += cl / base;
            s[1] += cl / (base + 1);
            s[2] += cl / (base + 2);
            cl *= -u / (l + 1);
            if (std::abs(cl) < 1e-30) break;
        }
        cj *= -h / (j + 1);
        if (std::abs(cj) < 1e-30) break;
    }
    const double m1 = s[1] / s[0];
    const double i0 = w * s[0];
    const double ew = std::exp(-0.5 * w * (a + b));
    return make_result(log_std_pdf(a) + std::log(i0), a + w * m1, w * w * (s[2] / s[0] - m1 * m1),
                       1.0 / i0, ew / i0);
}

TruncatedMoments central_cell(double a, double b) {
    const double pa = std_pdf(a);
    const double pb = std::isinf(b) ? 0.0 : std_pdf(b);
    const double bpb = std::isinf(b) ? 0.0 : b * pb;
    double z, log_z;
    if (a >= 0.0) {
        z = half_erfc(a) - half_erfc(b);
        log_z = std::log(z);
    } else {
        const double tails = half_erfc(-a) + half_erfc(b);
        z = 1.0 - tails;
        log_z = std::log1p(-tails);
    }
    const double mean = (pa - pb) / z;
    const double second = 1.0 + (a * pa - bpb) / z;
    return make_result(log_z, mean, second - mean * mean, pa / z, pb / z);
}

TruncatedMoments tail_cell(double a, double b) {
    const TailCf ta = tail_cf(a);
    if (std::isinf(b)) {
        return make_result(log_std_pdf(a) + std::log(ta.ratio), a + ta.c, ta.var, 1.0 / ta.ratio, 0.0);
    }
    const double w = b - a;
    const TailCf tb = tail_cf(b);
    const double ew = std::exp(-0.5 * w * (a + b));
    const double i0 = ta.ratio - ew * tb.ratio;
    const double i1 = ta.ratio * ta.c - ew * tb.ratio * (w + tb.c);
    const double i2 = ta.ratio * (ta.c * ta.c + ta.var) - ew * tb.ratio * ((w + tb.c) * (w + tb.c) + tb.var);
    const double m1 = i1 / i0;
    return make_result(log_std_pdf(a) + std::log(i0), a + m1, i2 / i0 - m1 * m1, 1.0 / i0, ew / i0);
}

}  // namespace

double StableLogProb::prob() const { return std::exp(value); }

double normal_pdf(double x, double mean, double var) {
    if (!(var > 0.0)) throw std::domain_error("normal_pdf: variance must be positive");
    const double d = x - mean;
    return std::exp(-0.5 * d * d / var) / std::sqrt(2.0 * std::numbers::pi * var);
}

double log_normal_pdf(double x, double mean, double var) {
    if (!(var > 0.0)) throw std::domain_error("log_normal_pdf: variance must be positive");
    const double d = x - mean;
    return -0.5 * d * d / var - 0.5 * std::log(var) - kLogSqrt2Pi;
}

double half_erfc(double u) {
    if (u > 6.0) return std::exp(log_half_erfc(u));
    if (u < -6.0) return 1.0 - half_erfc(-u);
    return 0.5 * std::erfc(u / std::numbers::sqrt2);
}

double log_half_erfc(double u) {
    if (u > 6.0) {
        if (std::isinf(u)) return -kInf;
        return log_std_pdf(u) + std::log(tail_cf(u).ratio);
    }
    if (u < 0.0) return std::log1p(-half_erfc(-u));
    return std::log(0.5 * std::erfc(u / std::numbers::sqrt2));
}

double mills_ratio(double x) {
    if (x > 3.0) return std::isinf(x) ? 0.0 : tail_cf(x).ratio;
    return half_erfc(x) / std_pdf(x);
}

double inv_mills_ratio(double x) {
    if (x > 3.0) return std::isinf(x) ? kInf : x + tail_cf(x).c;
    return std_pdf(x) / half_erfc(x);
}

double tail_var(double x) {
    if (x > 3.0) return std::isinf(x) ? 0.0 : tail_cf(x).var;
    const double t = std_pdf(x) / half_erfc(x);
    return 1.0 - t * (t - x);
}

double gaussian_cell_mass(double lo, double hi, double mean, double var) {
    if (!(var > 0.0)) throw std::domain_error("gaussian_cell_mass: variance must be positive");
    if (lo > hi) throw std::domain_error("gaussian_cell_mass: lo > hi");
    const double sd = std::sqrt(var);
    const double a = (lo - mean) / sd;
    const double b = (hi - mean) / sd;
    double m;
    if (a >= 0.0)
        m = half_erfc(a) - half_erfc(b);
    else if (b <= 0.0)
        m = half_erfc(-b) - half_erfc(-a);
    else
        m = 1.0 - half_erfc(-a) - half_erfc(b);
    return std::max(m, 0.0);
}

StableLogProb log_gaussian_cell_mass(double lo, double hi, double mean, double var) {
    if (!(var > 0.0)) throw std::domain_error("log_gaussian_cell_mass: variance must be positive");
    const double sd = std::sqrt(var);
    return truncated_std_normal((lo - mean) / sd, (hi - mean) / sd).log_mass;
}

TruncatedMoments truncated_std_normal(double lo, double hi) {
    if (std::isnan(lo) || std::isnan(hi)) throw std::domain_error("truncated_std_normal: NaN bound");
    if (lo > hi) throw std::domain_error("truncated_std_normal: lo > hi");
    if (lo == hi) return make_result(-kInf, lo, 0.0, 0.0, 0.0);
    if (std::isinf(lo) && std::isinf(hi)) return make_result(0.0, 0.0, 1.0, 0.0, 0.0);

    // reflect so that the cell sits mostly on the right; a is then finite
    const bool flip = lo + hi < 0.0;
    const double a = flip ? -hi : lo;
    const double b = flip ? -lo : hi;
    const double w = b - a;

    TruncatedMoments r;
    if (w <= 0.25 && w * std::max({std::abs(a), std::abs(b), 1.0}) <= 1.0)
        r = narrow_cell(a, b);
    else if (a > 3.0)
        r = tail_cell(a, b);
    else
        r = central_cell(a, b);

    if (flip) {
        r.mean = -r.mean;
        std::swap(r.rho_lo, r.rho_hi);
    }
    return r;
}

double log_sum_exp(std::span<const double> v) {
    double m = -kInf;
    for (double x : v) m = std::max(m, x);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
}

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::uniform_open() { return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53; }

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double rad = std::sqrt(-2.0 * std::log(uniform_open()));
    const double ang = 2.0 * std::numbers::pi * uniform();
    spare_ = rad * std::sin(ang);
    has_spare_ = true;
    return rad * std::cos(ang);
}

std::uint64_t Rng::below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::below: empty range");
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
        const std::uint64_t x = engine_();
        if (x >= threshold) return x % n;
    }
}

Rng Rng::split(std::uint64_t stream) const { return Rng(derive_seed(seed_, stream)); }

}  // namespace quantamp
