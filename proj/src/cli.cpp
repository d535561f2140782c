#include "quantamp/cli.hpp"

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "quantamp/experiment.hpp"
#include "quantamp/kernels.hpp"

namespace quantamp {

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void emit_error(const std::string& kind, const std::string& message, const nlohmann::json& extra = {}) {
    nlohmann::json j{{"error", kind}, {"message", message}};
    if (!extra.is_null()) j.update(extra);
    std::cerr << j.dump() << '\n';
}

struct Overrides {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> trials, n, m, components;
    std::optional<int> bits, max_iters;
    std::optional<double> sparsity, qiht_step;
    std::vector<double> ratios, snrs;
    std::vector<std::string> methods;
    std::string dist, matrix;
    std::optional<std::size_t> mc_samples;
    std::optional<int> se_iters;
    std::string out, summary, trace;
    bool timing = false;
};

void add_common(CLI::App* sub, Overrides& o) {
    sub->add_option("--config", o.config, "JSON experiment config");
    sub->add_option("--seed", o.seed, "root seed");
    sub->add_option("--trials", o.trials, "trials per cell");
    sub->add_option("--N", o.n, "signal length");
    sub->add_option("--M", o.m, "measurement count (overrides ratios)");
    sub->add_option("--ratios", o.ratios, "sampling ratios M/N")->delimiter(',');
    sub->add_option("--snr", o.snrs, "pre-quantization SNR(s) in dB")->delimiter(',');
    sub->add_option("--methods", o.methods, "amp_pe, amp_oracle, amp_awgn, qiht")->delimiter(',');
    sub->add_option("--bits", o.bits, "quantizer bit depth");
    sub->add_option("--sparsity", o.sparsity, "nonzero fraction E/N");
    sub->add_option("--dist", o.dist, "gaussian, cauchy or laplace");
    sub->add_option("--matrix", o.matrix, "unit or one_over_M");
    sub->add_option("--components", o.components, "mixture components I");
    sub->add_option("--max-iters", o.max_iters, "solver iteration cap");
    sub->add_option("--qiht-step", o.qiht_step, "QIHT step size (<=0: N/||A||_F^2)");
    sub->add_option("--out", o.out, "CSV output path (default stdout)");
}

ExperimentConfig load_config(const Overrides& o) {
    ExperimentConfig cfg;
    if (!o.config.empty()) {
        std::ifstream in(o.config);
        if (!in) throw UsageError("cannot open config '" + o.config + "'");
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw UsageError(std::string("malformed config JSON: ") + e.what());
        }
        cfg = j.get<ExperimentConfig>();
    }
    if (o.seed) cfg.seed = *o.seed;
    if (o.trials) cfg.trials = *o.trials;
    if (o.n) cfg.N = *o.n;
    if (o.m) cfg.M = *o.m;
    if (!o.ratios.empty()) {
        cfg.ratios = o.ratios;
        cfg.M.reset();
    }
    if (!o.snrs.empty()) cfg.snr_db = o.snrs;
    if (!o.methods.empty()) {
        cfg.methods.clear();
        for (const auto& s : o.methods) cfg.methods.push_back(parse_method(s));
    }
    if (o.bits) cfg.bits = *o.bits;
    if (o.sparsity) cfg.sparsity = *o.sparsity;
    if (!o.dist.empty()) cfg.dist = parse_dist(o.dist);
    if (!o.matrix.empty()) cfg.matrix = parse_matrix_scale(o.matrix);
    if (o.components) cfg.components = *o.components;
    if (o.max_iters) cfg.solver.max_iters = *o.max_iters;
    if (o.qiht_step) cfg.qiht_step = *o.qiht_step;
    if (o.mc_samples) cfg.mc_samples = *o.mc_samples;
    if (o.se_iters) cfg.se_iters = *o.se_iters;
    cfg.validate();
    return cfg;
}

template <class F>
void with_output(const std::string& path, F&& write) {
    if (path.empty() || path == "-") {
        write(std::cout);
        std::cout.flush();
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw UsageError("cannot write '" + path + "'");
    write(f);
}

int cmd_run(const Overrides& o, bool sweep) {
    const ExperimentConfig cfg = load_config(o);
    std::vector<TrialResult> rows;
    std::vector<CellSummary> cells;
    for (std::size_t m : cfg.measurement_counts()) {
        for (double snr : cfg.snr_db) {
            for (Method meth : cfg.methods) {
                auto trials = run_cell(cfg, m, snr, meth);
                cells.push_back(summarize(trials));
                rows.insert(rows.end(), trials.begin(), trials.end());
            }
        }
    }
    if (sweep)
        with_output(o.out, [&](std::ostream& os) { write_sweep_csv(os, cells, o.timing); });
    else
        with_output(o.out, [&](std::ostream& os) { write_trials_csv(os, rows, o.timing); });
    if (!o.summary.empty()) {
        nlohmann::json j = summary_json(cells);
        j["config"] = cfg;
        with_output(o.summary, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
    }
    if (!o.trace.empty()) {
        // solver trace of the first trial of the first cell
        const std::size_t m = cfg.measurement_counts().front();
        const double snr = cfg.snr_db.front();
        const Instance inst = make_instance(cfg, m, snr, trial_seed(cfg, m, snr, 0));
        SolverResult full;
        run_method(cfg, inst, cfg.methods.front(), 0, snr, &full);
        with_output(o.trace, [&](std::ostream& os) { write_trace_csv(os, full.trace); });
    }
    return 0;
}

int cmd_se(const Overrides& o, bool overlay, bool fixed_params) {
    const ExperimentConfig cfg = load_config(o);
    const SeRun run = run_se_experiment(cfg, !fixed_params, overlay);
    for (const auto& w : run.se.warnings) std::cerr << nlohmann::json{{"warning", w}}.dump() << '\n';
    with_output(o.out, [&](std::ostream& os) {
        if (overlay)
            write_overlay_csv(os, run.overlay);
        else
            write_se_csv(os, run.se);
    });
    return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
    kernels::configure_threads_from_env();
    CLI::App app{"quantamp: sparse recovery from quantized measurements with AMP-PE"};
    app.require_subcommand(1);

    Overrides run_o, sweep_o, se_o;
    bool overlay = false, fixed = false;

    auto* run = app.add_subcommand("run", "run trials from a config; per-trial CSV");
    add_common(run, run_o);
    run->add_option("--summary", run_o.summary, "summary JSON path");
    run->add_option("--trace", run_o.trace, "solver trace CSV of trial 0");
    run->add_flag("--timing", run_o.timing, "append runtime columns (not deterministic)");

    auto* sweep = app.add_subcommand("sweep", "grid over ratios x SNRs x methods; per-cell CSV");
    add_common(sweep, sweep_o);
    sweep->add_option("--summary", sweep_o.summary, "summary JSON path");
    sweep->add_flag("--timing", sweep_o.timing, "append runtime columns (not deterministic)");

    auto* se = app.add_subcommand("se", "state-evolution prediction, optionally with empirical overlay");
    add_common(se, se_o);
    se->add_option("--mc-samples", se_o.mc_samples, "Monte Carlo samples per iteration");
    se->add_option("--iters", se_o.se_iters, "iterations");
    se->add_flag("--overlay", overlay, "also run the solver and emit per-iteration empirical MSE next to the prediction");
    se->add_flag("--fixed-params", fixed, "use the true parameters instead of estimating them");

    auto* self = app.add_subcommand("selftest", "invariant checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        emit_error("usage", e.what());
        return 2;
    }

    try {
        if (*run) return cmd_run(run_o, false);
        if (*sweep) return cmd_run(sweep_o, true);
        if (*se) return cmd_se(se_o, overlay, fixed);
        if (*self) return run_selftest(std::cout) ? 0 : 1;
    } catch (const DivergenceError& e) {
        emit_error("divergence", e.what(), nlohmann::json{{"trace", e.trace()}});
        return 3;
    } catch (const UsageError& e) {
        emit_error("usage", e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        emit_error("usage", e.what());
        return 2;
    } catch (const nlohmann::json::exception& e) {
        emit_error("usage", e.what());
        return 2;
    } catch (const std::exception& e) {
        emit_error("internal", e.what());
        return 1;
    }
    return 0;
}

int cli_main(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    argv.push_back("quantamp");
    for (const auto& a : args) argv.push_back(a.c_str());
    return cli_main(static_cast<int>(argv.size()), argv.data());
}

}  // namespace quantamp
