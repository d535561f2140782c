#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "doctest.h"
#include "quantamp/numerics.hpp"
#include "quantamp/quantized_channel.hpp"
#include "support/checks.hpp"

using namespace quantamp;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

TEST_CASE("uniform quantizer layout and half-open cells") {
    const Quantizer q2 = make_uniform_quantizer(2, 0.5);
    CHECK(q2.bounds == std::vector<double>{-kInf, -0.5, 0.0, 0.5, kInf});
    CHECK(q2.symbols == std::vector<double>{-0.75, -0.25, 0.25, 0.75});
    CHECK(quantize(-0.5, q2) == 1);
    CHECK(quantize(-0.5000001, q2) == 0);
    CHECK(quantize(0.0, q2) == 2);
    CHECK(quantize(1e300, q2) == 3);

    const Quantizer sign = make_uniform_quantizer(1, 1.0);
    CHECK(quantize(0.0, sign) == 0);
    CHECK(quantize(1e-300, sign) == 1);
    CHECK(quantize(-3.0, sign) == 0);
    const std::vector<CellIndex> y{0, 1};
    CHECK(dequantize(y, sign) == std::vector<double>{-1.0, 1.0});

    const Quantizer cal = make_calibrated_quantizer(3, 2.0);
    CHECK(cal.bounds[1] == doctest::Approx(-3.0 * 1.0));
    CHECK_THROWS(make_calibrated_quantizer(3, 0.0));
}

TEST_CASE("quantizer validation") {
    Quantizer q = make_uniform_quantizer(2, 1.0);
    CHECK_NOTHROW(q.validate());
    q.bounds[2] = -2.0;
    CHECK_THROWS_AS(q.validate(), std::invalid_argument);
    q = make_uniform_quantizer(2, 1.0);
    q.bounds.front() = -10.0;
    CHECK_THROWS_AS(q.validate(), std::invalid_argument);
    q = make_uniform_quantizer(2, 1.0);
    q.symbols.pop_back();
    CHECK_THROWS_AS(q.validate(), std::invalid_argument);
}

TEST_CASE("cell moments are conserved across cells") {
    std::mt19937_64 g(31);
    const checks::Worst w = checks::conservation(g, 100);
    INFO(w.where);
    CHECK(w.value <= 1e-9);
}

TEST_CASE("sign closed forms agree with the cell forms") {
    std::mt19937_64 g(32);
    const checks::Worst w = checks::unification(g, 200);
    INFO(w.where);
    CHECK(w.value <= 1e-10);
    CHECK_THROWS(sign_channel_moments(0.0, 1.0, 0, {1.0}));
}

TEST_CASE("output posterior moments match quadrature") {
    std::mt19937_64 g(33);
    for (bool one_bit : {true, false}) {
        const auto e = checks::z_moments(g, 60, one_bit);
        INFO(e.mean.where << " / " << e.var.where);
        CHECK(e.mean.value <= 1e-6);
        CHECK(e.var.value <= 1e-6);
    }
}

TEST_CASE("posterior variance never exceeds the prior variance") {
    const Quantizer qz = make_uniform_quantizer(3, 0.3);
    for (double q : {-5.0, -0.1, 0.0, 0.7, 9.0})
        for (CellIndex c = 0; c < qz.cells(); ++c) {
            const PosteriorMoments p = z_posterior_moments(q, 0.4, c, qz, {0.01});
            CHECK(p.var >= 0.0);
            CHECK(p.var <= 0.4);
        }
}

TEST_CASE("noise-variance derivatives match finite differences") {
    std::mt19937_64 g(34);
    for (auto [one_bit, form] : {std::pair{true, GradientForm::automatic}, std::pair{false, GradientForm::automatic},
                                 std::pair{true, GradientForm::cells}}) {
        const auto e = checks::gradient_fd(g, 60, one_bit, form);
        INFO(e.g1.where << " / " << e.g2.where);
        CHECK(e.g.value <= 1e-10);
        CHECK(e.g1.value <= 1e-5);
        CHECK(e.g2.value <= 1e-5);
    }
    const Quantizer q2 = make_uniform_quantizer(2, 1.0);
    const std::vector<double> q{0.0};
    const std::vector<CellIndex> y{0};
    CHECK_THROWS(noise_posterior_gradient({q, 1.0, y}, q2, {1.0}, GradientForm::sign));
}

TEST_CASE("the variance step climbs a concave objective to its maximum") {
    // g(x) = a log x - b x peaks at a / b
    const double a = 3.0, b = 0.5;
    auto eval = [&](double x) { return ObjectiveDerivs{a * std::log(x) - b * x, a / x - b, -a / (x * x)}; };
    double x = 1e-4;
    double prev = eval(x).g;
    for (int k = 0; k < 60; ++k) {
        x = second_order_variance_step(x, eval);
        const double now = eval(x).g;
        REQUIRE(now >= prev - 1e-12);
        prev = now;
    }
    CHECK(x == doctest::Approx(a / b).epsilon(1e-8));

    // positive curvature: falls back to a doubling step
    auto convex = [](double x) { return ObjectiveDerivs{-(x - 4.0) * (x - 4.0), -2.0 * (x - 4.0), 2.0}; };
    CHECK(second_order_variance_step(1.0, convex) == doctest::Approx(2.0));
}

TEST_CASE("gamma_w updates recover the true noise variance") {
    const double gamma_true = 0.04, tau_q = 1e-3;
    Rng rng(35);
    const std::size_t m = 20000;
    for (int bits : {1, 3}) {
        const Quantizer qz = make_uniform_quantizer(bits, 0.4);
        std::vector<double> q(m);
        std::vector<CellIndex> y(m);
        for (std::size_t i = 0; i < m; ++i) {
            q[i] = 0.6 * rng.normal();
            const double z = q[i] + std::sqrt(tau_q) * rng.normal();
            y[i] = quantize(z + std::sqrt(gamma_true) * rng.normal(), qz);
        }
        NoisePrior th{1e-4};
        for (int k = 0; k < 100; ++k) th = update_gamma_w({q, tau_q, y}, qz, th);
        INFO("bits=" << bits);
        CHECK(th.gamma_w == doctest::Approx(gamma_true).epsilon(0.1));
    }
}

TEST_CASE("quantizer JSON keeps the infinite outer bounds") {
    const Quantizer qz = make_uniform_quantizer(2, 0.25);
    nlohmann::json j = qz;
    CHECK(j["bounds"][0] == "-inf");
    CHECK(j["bounds"][4] == "inf");
    const Quantizer back = j.get<Quantizer>();
    CHECK(back.bounds == qz.bounds);
    CHECK(back.symbols == qz.symbols);
    j["bounds"][0] = "minus infinity";
    CHECK_THROWS(j.get<Quantizer>());
}
