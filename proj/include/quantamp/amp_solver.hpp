#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

#include "json.hpp"
#include "quantamp/linear_operator.hpp"
#include "quantamp/quantized_channel.hpp"
#include "quantamp/signal_prior.hpp"

namespace quantamp {

struct AmpState {
    std::vector<double> x_hat;
    double tau_x = 0.0;
    std::vector<double> q;
    double tau_q = 0.0;
    std::vector<double> s;
    double tau_s = 0.0;
    std::vector<double> r;
    double tau_r = 0.0;
    int t = 0;
};

struct SolverOptions {
    int max_iters = 200;
    double tol = 1e-6;
    double damping = 0.2;    // parameter damping
    int inner_pe_iters = 1;
    bool estimate_lambda = true;
    bool estimate_theta = true;
    bool damp_x = false;
    double damping_x = 0.1;  // used when damp_x is set
    int pe_start_iter = 1;
    // test hook, called after each completed iteration
    std::function<void(const AmpState&)> on_iteration;

    void validate() const;
};

struct IterationRecord {
    int iter;
    double tau_x;
    double tau_r;
    double tau_q;
    double rel_change;
    double mse;  // NaN without truth
    double gamma_w;
    double kappa;
};

struct SolverResult {
    std::vector<double> x_hat;
    SignalPrior lambda_hat;
    NoisePrior theta_hat;
    std::vector<IterationRecord> trace;
    int iterations = 0;
    bool converged = false;
};

class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& what, std::vector<IterationRecord> trace)
        : std::runtime_error(what), trace_(std::move(trace)) {}
    const std::vector<IterationRecord>& trace() const { return trace_; }

private:
    std::vector<IterationRecord> trace_;
};

SolverResult run_amp_pe(const LinearOperator& op, std::span<const CellIndex> y, const Quantizer& qz,
                        const SignalPrior& prior0, NoisePrior noise0, const SolverOptions& opts,
                        std::span<const double> truth = {});

// Same loop with an additive Gaussian output channel y = z + w.
SolverResult run_amp_gaussian(const LinearOperator& op, std::span<const double> y, const SignalPrior& prior0,
                              NoisePrior noise0, const SolverOptions& opts, std::span<const double> truth = {});

double damp(double old_value, double new_value, double eta);
std::vector<double> damp(std::span<const double> old_value, std::span<const double> new_value, double eta);

// Ridge least squares by conjugate gradients on the normal equations.
std::vector<double> ridge_least_squares(const LinearOperator& op, std::span<const double> y, double ridge,
                                        int iters);

struct KMeansResult {
    std::vector<double> centers;
    std::vector<std::size_t> assignment;
    std::vector<double> objective;  // after each Lloyd step
};
KMeansResult kmeans_1d(std::span<const double> values, std::size_t k, std::uint64_t seed, int max_iters = 100);

SignalPrior init_prior_from_data(const LinearOperator& op, std::span<const double> y_dequant, std::size_t n_components,
                                 std::uint64_t seed);

void write_trace_csv(std::ostream& os, const std::vector<IterationRecord>& trace);

void to_json(nlohmann::json& j, const SolverOptions& o);
void from_json(const nlohmann::json& j, SolverOptions& o);
void to_json(nlohmann::json& j, const IterationRecord& r);
void to_json(nlohmann::json& j, const SolverResult& r);

}  // namespace quantamp
