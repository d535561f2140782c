#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <vector>

#include "doctest.h"
#include "oracles/quadrature.hpp"
#include "quantamp/numerics.hpp"

using namespace quantamp;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// standard normal restricted to [lo, hi] by quadrature
oracle::Moments truncated_oracle(double lo, double hi) {
    auto logf = [=](oracle::Real v) {
        if (v < lo || v > hi) return -oracle::kInf;
        return -0.5L * v * v - oracle::kLogSqrt2Pi;
    };
    const double a = std::isfinite(lo) ? lo : std::min(-40.0, hi - 40.0);
    const double b = std::isfinite(hi) ? hi : std::max(40.0, lo + 40.0);
    std::vector<oracle::Real> knots;
    if (std::isfinite(lo)) knots.push_back(lo);
    if (std::isfinite(hi)) knots.push_back(hi);
    const double width = std::min(1.0, std::isfinite(lo) && std::isfinite(hi) ? hi - lo : 1.0);
    return oracle::unimodal_moments(logf, a, b, width, knots);
}

}  // namespace

TEST_CASE("normal_pdf matches a high-precision reference value") {
    // exp(-1/2) / sqrt(8 pi), evaluated to 30 digits
    const double ref = 0.120985362259571674898915096468;
    CHECK(normal_pdf(3.0, 1.0, 4.0) == doctest::Approx(ref).epsilon(1e-15));
    CHECK(std::exp(log_normal_pdf(3.0, 1.0, 4.0)) == doctest::Approx(ref).epsilon(1e-15));
    CHECK_THROWS(normal_pdf(0.0, 0.0, 0.0));
}

TEST_CASE("normal tail and its log agree with long-double erfc over a wide range") {
    for (double u = -30.0; u <= 40.0; u += 0.37) {
        const oracle::Real ref = oracle::log_phi_cdf(-u);
        CHECK(std::abs(log_half_erfc(u) - ref) <= 1e-13 * std::max<oracle::Real>(1.0L, std::abs(ref)));
        if (ref > -700.0L) CHECK(half_erfc(u) == doctest::Approx(static_cast<double>(std::exp(ref))).epsilon(1e-13));
    }
    CHECK(half_erfc(kInf) == 0.0);
    CHECK(log_half_erfc(kInf) == -kInf);
}

TEST_CASE("Mills ratio and hazard are reciprocal and match their definition") {
    for (double x = -10.0; x <= 50.0; x += 0.5) {
        CHECK(mills_ratio(x) * inv_mills_ratio(x) == doctest::Approx(1.0).epsilon(1e-14));
        const oracle::Real ref = std::exp(oracle::log_phi_cdf(-x) + 0.5L * x * x + oracle::kLogSqrt2Pi);
        CHECK(mills_ratio(x) == doctest::Approx(static_cast<double>(ref)).epsilon(1e-12));
    }
}

TEST_CASE("truncated standard normal moments match quadrature") {
    std::mt19937_64 g(11);
    std::uniform_real_distribution<double> loc(-30.0, 30.0);
    std::uniform_real_distribution<double> lw(std::log(1e-4), std::log(20.0));
    for (int k = 0; k < 200; ++k) {
        double lo = loc(g);
        double hi = lo + std::exp(lw(g));
        if (k % 5 == 0) hi = kInf;
        if (k % 7 == 0) lo = -kInf;
        if (std::isinf(lo) && std::isinf(hi)) continue;
        const TruncatedMoments tm = truncated_std_normal(lo, hi);
        const oracle::Moments ref = truncated_oracle(lo, hi);
        INFO("lo=" << lo << " hi=" << hi);
        CHECK(tm.log_mass.value == doctest::Approx(static_cast<double>(ref.log_mass)).epsilon(1e-10));
        const double scale = std::max<double>(std::abs(static_cast<double>(ref.mean)), std::sqrt(static_cast<double>(ref.var)));
        CHECK(std::abs(tm.mean - static_cast<double>(ref.mean)) <= 1e-9 * scale);
        CHECK(tm.var == doctest::Approx(static_cast<double>(ref.var)).epsilon(1e-8));
        if (std::isinf(hi)) CHECK(tail_var(lo) == doctest::Approx(tm.var).epsilon(1e-10));
    }
}

TEST_CASE("gaussian_cell_mass sums to one over a partition") {
    const std::vector<double> b{-kInf, -2.0, -0.3, 0.0, 0.1, 5.0, kInf};
    for (double mean : {-12.0, -1.0, 0.0, 0.05, 3.0}) {
        double total = 0.0;
        for (std::size_t i = 0; i + 1 < b.size(); ++i) total += gaussian_cell_mass(b[i], b[i + 1], mean, 0.7);
        CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
    }
}

TEST_CASE("log_sum_exp handles large offsets and -inf") {
    const std::vector<double> v{-1000.0, -1000.0};
    CHECK(log_sum_exp(v) == doctest::Approx(-1000.0 + std::log(2.0)));
    const std::vector<double> w{-kInf, -kInf};
    CHECK(log_sum_exp(w) == -kInf);
}

TEST_CASE("Rng streams are reproducible and split into distinct children") {
    Rng a(42), b(42), c(43);
    for (int i = 0; i < 10; ++i) CHECK(a.next_u64() == b.next_u64());
    CHECK(Rng(42).next_u64() != c.next_u64());
    CHECK(Rng(7).split(1).next_u64() == Rng(7).split(1).next_u64());
    CHECK(Rng(7).split(1).next_u64() != Rng(7).split(2).next_u64());

    std::set<std::uint64_t> seeds;
    for (std::uint64_t s = 0; s < 1000; ++s) seeds.insert(derive_seed(5, s));
    CHECK(seeds.size() == 1000);

    Rng r(3);
    double sum = 0.0, sq = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double u = r.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        const double z = r.normal();
        sum += z;
        sq += z * z;
        REQUIRE(r.below(7) < 7);
    }
    CHECK(std::abs(sum / n) < 5.0 / std::sqrt(double(n)));
    CHECK(sq / n == doctest::Approx(1.0).epsilon(0.02));
}
