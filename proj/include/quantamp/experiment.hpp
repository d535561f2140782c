#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "quantamp/amp_solver.hpp"
#include "quantamp/harness.hpp"
#include "quantamp/state_evolution.hpp"

namespace quantamp {

enum class Method { amp_pe, amp_oracle, amp_awgn, qiht };
Method parse_method(const std::string& s);
std::string to_string(Method m);

struct ExperimentConfig {
    std::size_t N = 1000;
    std::optional<std::size_t> M;      // overrides ratios when set
    std::vector<double> ratios{2.0};   // M/N
    double sparsity = 0.5;
    NonzeroDist dist = NonzeroDist::gaussian;
    int bits = 1;
    std::vector<double> snr_db{30.0};
    std::size_t trials = 100;
    std::uint64_t seed = 1;
    std::vector<Method> methods{Method::amp_pe};
    MatrixScale matrix = MatrixScale::unit;
    std::size_t components = 2;
    double init_kappa = 0.1;
    double init_gamma_w = 1e-6;
    SolverOptions solver;
    double qiht_step = 0.0;  // <= 0: automatic
    int qiht_iters = 300;
    // state-evolution settings
    std::size_t mc_samples = 200000;
    int se_iters = 20;

    void validate() const;
    std::vector<std::size_t> measurement_counts() const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

// One synthetic problem: signal, operator, measurements.
struct Instance {
    std::vector<double> x;
    DenseOperator A;
    std::vector<double> z;
    std::vector<double> v;  // z + w
    double gamma_w;
    Quantizer qz;
    std::vector<CellIndex> y;
    std::uint64_t seed;
};
Instance make_instance(const ExperimentConfig& cfg, std::size_t m, double snr_db, std::uint64_t trial_seed);

struct TrialResult {
    Method method;
    std::size_t N;
    std::size_t M;
    double snr_db;
    std::size_t trial;
    double nmse;
    double nmse_debiased;
    int iterations;
    bool converged;
    double runtime_seconds;
    double gamma_w_true;
    double gamma_w_hat;  // NaN for qiht
    double kappa_hat;    // NaN for qiht
    std::optional<SignalPrior> lambda_hat;
};

std::uint64_t trial_seed(const ExperimentConfig& cfg, std::size_t m, double snr_db, std::size_t trial);
TrialResult run_method(const ExperimentConfig& cfg, const Instance& inst, Method method, std::size_t trial,
                       double snr_db, SolverResult* full = nullptr);

// All trials of one (M, snr, method) cell, in trial order; trials run in parallel.
std::vector<TrialResult> run_cell(const ExperimentConfig& cfg, std::size_t m, double snr_db, Method method);

struct CellSummary {
    Method method;
    std::size_t N, M;
    double snr_db;
    std::size_t trials;
    double nmse_mean, nmse_std, deb_mean, deb_std, iterations_mean, runtime_mean;
};
CellSummary summarize(const std::vector<TrialResult>& trials);

void write_trials_csv(std::ostream& os, const std::vector<TrialResult>& rows, bool timing);
void write_sweep_csv(std::ostream& os, const std::vector<CellSummary>& cells, bool timing);
nlohmann::json summary_json(const std::vector<CellSummary>& cells);

// Predicted vs empirical per-iteration MSE.
struct OverlayRow {
    int iter;
    double se_mse;  // tau_x_bar
    double mc_stderr;
    double se_err;
    double se_err_debiased;
    double emp_mean;
    double emp_std;
    double emp_debiased_mean;
    double emp_debiased_std;
};
struct SeRun {
    SeResult se;
    std::vector<OverlayRow> overlay;  // empty without empirical trials
};
// Zero-mean starting prior with variance nu_x shared by the SE and the solver.
SignalPrior se_initial_prior(double nu_x, std::size_t components, double kappa);
SeRun run_se_experiment(const ExperimentConfig& cfg, bool estimate_params, bool overlay);
void write_overlay_csv(std::ostream& os, const std::vector<OverlayRow>& rows);

}  // namespace quantamp
