#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "quantamp/quantized_channel.hpp"
#include "quantamp/signal_prior.hpp"

namespace quantamp {

using Sym2 = std::array<double, 3>;  // (xx, xy, yy) of a symmetric 2x2 matrix

struct SeState {
    int t = 0;
    double tau_x_bar = 0.0;
    Sym2 K_x{};
    double tau_q_bar = 0.0;
    Sym2 K_q{};
    double tau_r_bar = 0.0;
    double mc_stderr = 0.0;
    // realised squared error of the scalar estimate, E[(X - Xhat)^2], and the
    // same after the best scalar gain; equal to tau_x_bar when the prior is matched
    double err_bar = 0.0;
    double err_debiased_bar = 0.0;
    double gamma_w_hat = 0.0;
    double kappa_hat = 0.0;
};

struct SeOptions {
    double beta = 2.0;
    std::size_t mc_samples = 200000;
    int max_iters = 20;
    std::uint64_t seed = 1;
    // parameter-estimation schedule, mirroring SolverOptions
    double damping = 0.2;
    int inner_pe_iters = 1;
    int pe_start_iter = 1;
    std::optional<SignalPrior> initial_prior;
    std::optional<double> initial_gamma_w;

    void validate() const;
};

struct SeResult {
    // states[0] is the initialisation; states[t + 1] predicts the MSE after solver iteration t
    std::vector<SeState> states;
    std::vector<std::string> warnings;

    std::vector<double> tau_x() const;
};

SeResult run_state_evolution(const SignalPrior& prior, const Quantizer& qz, double gamma_w_true,
                             const SeOptions& opts, bool estimate_params);

void write_se_csv(std::ostream& os, const SeResult& se);

}  // namespace quantamp
