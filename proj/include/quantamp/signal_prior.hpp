#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"
#include "quantamp/kernels.hpp"

namespace quantamp {

inline constexpr std::size_t kMaxComponents = 16;

struct MixtureComponent {
    double weight;
    double mean;
    double var;
};

// Bernoulli / Gaussian-mixture prior: spike at 0 with probability 1-kappa,
// otherwise a mixture whose first component is pinned to zero mean.
struct SignalPrior {
    double kappa = 0.1;
    std::vector<MixtureComponent> components;

    std::size_t size() const { return components.size(); }
    void validate() const;  // throws std::invalid_argument

    static SignalPrior bernoulli_gaussian(double kappa, double var);
};

struct InputPseudoData {
    std::span<const double> r;
    double tau_r;
};

struct PosteriorMoments {
    double mean;
    double var;
};

double bgm_evidence(double r, double tau_r, const SignalPrior& prior);
double log_bgm_evidence(double r, double tau_r, const SignalPrior& prior);

PosteriorMoments bgm_posterior(double r, double tau_r, const SignalPrior& prior);
double bgm_posterior_mean(double r, double tau_r, const SignalPrior& prior);
double bgm_posterior_var(double r, double tau_r, const SignalPrior& prior);

struct Responsibilities {
    double psi0;
    std::vector<double> psi;
};
Responsibilities em_responsibilities(double r, double tau_r, const SignalPrior& prior);

// One EM step. first_var_floor bounds the wide zero-mean component from below.
SignalPrior em_update(const InputPseudoData& data, const SignalPrior& prior, double first_var_floor = 0.0,
                      kernels::Exec exec = kernels::Exec::parallel);

double pe_objective(const InputPseudoData& data, const SignalPrior& prior,
                    kernels::Exec exec = kernels::Exec::parallel);

double prior_variance(const SignalPrior& prior);

struct BgmDraws {
    std::vector<double> values;
    std::vector<int> labels;  // 0 = spike, i = component i (1-based)
};
BgmDraws sample_bgm_labeled(const SignalPrior& prior, std::size_t n, std::uint64_t seed);
std::vector<double> sample_bgm(const SignalPrior& prior, std::size_t n, std::uint64_t seed);

SignalPrior damp(const SignalPrior& old_prior, const SignalPrior& new_prior, double eta);

void to_json(nlohmann::json& j, const SignalPrior& p);
void from_json(const nlohmann::json& j, SignalPrior& p);

}  // namespace quantamp
