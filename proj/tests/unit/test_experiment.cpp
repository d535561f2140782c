#include <cmath>
#include <sstream>

#include "doctest.h"
#include "quantamp/experiment.hpp"

using namespace quantamp;

namespace {

ExperimentConfig tiny() {
    ExperimentConfig c;
    c.N = 100;
    c.ratios = {2.0};
    c.trials = 3;
    c.seed = 17;
    c.solver.max_iters = 30;
    return c;
}

}  // namespace

TEST_CASE("config JSON accepts single values or arrays and rejects unknown fields") {
    const auto j = nlohmann::json::parse(R"({"N": 50, "ratios": 3, "snr_db": [10, 20], "method": "qiht",
                                             "distribution": "laplace", "solver": {"damping": 0.5}})");
    const ExperimentConfig c = j.get<ExperimentConfig>();
    CHECK(c.N == 50);
    CHECK(c.ratios == std::vector<double>{3.0});
    CHECK(c.snr_db == std::vector<double>{10.0, 20.0});
    REQUIRE(c.methods.size() == 1);
    CHECK(c.methods[0] == Method::qiht);
    CHECK(c.dist == NonzeroDist::laplace);
    CHECK(c.solver.damping == 0.5);
    CHECK(c.measurement_counts() == std::vector<std::size_t>{150});

    CHECK_THROWS_AS(nlohmann::json::parse(R"({"N": 50, "sparsty": 0.1})").get<ExperimentConfig>(),
                    std::invalid_argument);
    CHECK_THROWS_AS(nlohmann::json::parse(R"({"bits": 0})").get<ExperimentConfig>(), std::invalid_argument);
    CHECK_THROWS(nlohmann::json::parse(R"({"methods": ["amp_magic"]})").get<ExperimentConfig>());

    nlohmann::json back = c;
    const ExperimentConfig c2 = back.get<ExperimentConfig>();
    CHECK(c2.snr_db == c.snr_db);
    CHECK(c2.dist == c.dist);
}

TEST_CASE("explicit M overrides the ratios") {
    ExperimentConfig c = tiny();
    c.M = 77;
    CHECK(c.measurement_counts() == std::vector<std::size_t>{77});
}

TEST_CASE("trial seeds separate cells and trials") {
    const ExperimentConfig c = tiny();
    CHECK(trial_seed(c, 200, 30.0, 0) != trial_seed(c, 200, 30.0, 1));
    CHECK(trial_seed(c, 200, 30.0, 0) != trial_seed(c, 300, 30.0, 0));
    CHECK(trial_seed(c, 200, 30.0, 0) != trial_seed(c, 200, 20.0, 0));
}

TEST_CASE("an instance matches its configuration") {
    ExperimentConfig c = tiny();
    c.bits = 3;
    const Instance inst = make_instance(c, 200, 20.0, 5);
    CHECK(inst.x.size() == 100);
    CHECK(inst.A.rows() == 200);
    CHECK(inst.y.size() == 200);
    CHECK(inst.qz.bits == 3);
    double p = 0.0;
    for (double v : inst.z) p += v * v;
    CHECK(inst.gamma_w == doctest::Approx(p / 200.0 * 0.01));
    for (std::size_t i = 0; i < 200; ++i) CHECK(inst.y[i] == quantize(inst.v[i], inst.qz));
}

TEST_CASE("every method runs and cells are reproducible") {
    ExperimentConfig c = tiny();
    for (Method m : {Method::amp_pe, Method::amp_oracle, Method::amp_awgn, Method::qiht}) {
        const auto a = run_cell(c, 200, 30.0, m);
        const auto b = run_cell(c, 200, 30.0, m);
        REQUIRE(a.size() == 3);
        for (std::size_t t = 0; t < 3; ++t) {
            CHECK(a[t].trial == t);
            CHECK(std::isfinite(a[t].nmse));
            CHECK(a[t].nmse_debiased <= a[t].nmse);
            CHECK(a[t].nmse == b[t].nmse);
        }
        CHECK(parse_method(to_string(m)) == m);
        const CellSummary s = summarize(a);
        CHECK(s.trials == 3);
        CHECK(s.M == 200);
    }
}

TEST_CASE("CSV writers emit a versioned header and stable columns") {
    ExperimentConfig c = tiny();
    const auto rows = run_cell(c, 200, 30.0, Method::amp_pe);
    std::ostringstream a, b;
    write_trials_csv(a, rows, false);
    write_trials_csv(b, rows, false);
    CHECK(a.str() == b.str());
    CHECK(a.str().rfind("# quantamp-csv v1\n", 0) == 0);
    std::ostringstream t;
    write_trials_csv(t, rows, true);
    CHECK(t.str().find("runtime_seconds") != std::string::npos);
    CHECK(a.str().find("runtime_seconds") == std::string::npos);

    std::ostringstream s;
    write_sweep_csv(s, {summarize(rows)}, false);
    CHECK(s.str().rfind("# quantamp-csv v1\n", 0) == 0);
    const nlohmann::json j = summary_json({summarize(rows)});
    CHECK(j.is_object());
}

TEST_CASE("the shared SE starting prior has the requested variance") {
    for (std::size_t k : {1, 2, 4}) {
        const SignalPrior p = se_initial_prior(0.5, k, 0.1);
        CHECK_NOTHROW(p.validate());
        CHECK(prior_variance(p) == doctest::Approx(0.5));
    }
}
