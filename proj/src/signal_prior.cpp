#include "quantamp/signal_prior.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "quantamp/numerics.hpp"

namespace quantamp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kKappaMin = 1e-8;
constexpr double kWeightFloor = 1e-12;

// Log-weights and per-component Gaussian posteriors; slot 0 is the spike.
struct ComponentTerms {
    std::size_t count;
    std::array<double, kMaxComponents + 1> logw;
    std::array<double, kMaxComponents + 1> mean;
    std::array<double, kMaxComponents + 1> var;
    double log_evidence;
};

ComponentTerms component_terms(double r, double tau_r, const SignalPrior& prior) {
    ComponentTerms t;
    t.count = prior.size() + 1;
    const double log_kappa = std::log(prior.kappa);
    t.logw[0] = std::log1p(-prior.kappa) + log_normal_pdf(r, 0.0, tau_r);
    t.mean[0] = 0.0;
    t.var[0] = 0.0;
    double mx = t.logw[0];
    for (std::size_t i = 0; i < prior.size(); ++i) {
        const auto& c = prior.components[i];
        const double s = c.var + tau_r;
        t.logw[i + 1] = log_kappa + std::log(c.weight) + log_normal_pdf(r, c.mean, s);
        t.mean[i + 1] = (c.mean * tau_r + r * c.var) / s;
        t.var[i + 1] = c.var * tau_r / s;
        mx = std::max(mx, t.logw[i + 1]);
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < t.count; ++i) acc += std::exp(t.logw[i] - mx);
    t.log_evidence = mx + std::log(acc);
    return t;
}

void check_tau(double tau_r) {
    if (!(tau_r > 0.0)) throw std::domain_error("signal prior: tau_r must be positive");
}

}  // namespace

void SignalPrior::validate() const {
    if (!(kappa >= 0.0 && kappa <= 1.0)) throw std::invalid_argument("SignalPrior: kappa outside [0,1]");
    if (components.empty() || components.size() > kMaxComponents)
        throw std::invalid_argument("SignalPrior: component count must be in [1, 16]");
    double wsum = 0.0;
    for (const auto& c : components) {
        if (!(c.weight >= 0.0)) throw std::invalid_argument("SignalPrior: negative weight");
        if (!(c.var >= kVarFloor)) throw std::invalid_argument("SignalPrior: component variance below floor");
        if (!std::isfinite(c.mean)) throw std::invalid_argument("SignalPrior: non-finite mean");
        wsum += c.weight;
    }
    if (std::abs(wsum - 1.0) > 1e-10) throw std::invalid_argument("SignalPrior: weights must sum to 1");
    if (components.front().mean != 0.0) throw std::invalid_argument("SignalPrior: first component must be zero-mean");
}

SignalPrior SignalPrior::bernoulli_gaussian(double kappa, double var) {
    SignalPrior p;
    p.kappa = kappa;
    p.components = {{1.0, 0.0, var}};
    return p;
}

double log_bgm_evidence(double r, double tau_r, const SignalPrior& prior) {
    check_tau(tau_r);
    return component_terms(r, tau_r, prior).log_evidence;
}

double bgm_evidence(double r, double tau_r, const SignalPrior& prior) {
    return std::max(std::exp(log_bgm_evidence(r, tau_r, prior)), kProbFloor);
}

PosteriorMoments bgm_posterior(double r, double tau_r, const SignalPrior& prior) {
    check_tau(tau_r);
    const ComponentTerms t = component_terms(r, tau_r, prior);
    std::array<double, kMaxComponents + 1> w;
    double mean = 0.0;
    for (std::size_t i = 0; i < t.count; ++i) {
        w[i] = std::exp(t.logw[i] - t.log_evidence);
        mean += w[i] * t.mean[i];
    }
    double var = 0.0;
    for (std::size_t i = 0; i < t.count; ++i) {
        const double d = t.mean[i] - mean;
        var += w[i] * (t.var[i] + d * d);
    }
    return {mean, std::max(var, 0.0)};
}

double bgm_posterior_mean(double r, double tau_r, const SignalPrior& prior) {
    return bgm_posterior(r, tau_r, prior).mean;
}

double bgm_posterior_var(double r, double tau_r, const SignalPrior& prior) {
    return bgm_posterior(r, tau_r, prior).var;
}

Responsibilities em_responsibilities(double r, double tau_r, const SignalPrior& prior) {
    check_tau(tau_r);
    const ComponentTerms t = component_terms(r, tau_r, prior);
    Responsibilities out;
    out.psi0 = std::exp(t.logw[0] - t.log_evidence);
    out.psi.resize(prior.size());
    for (std::size_t i = 0; i < prior.size(); ++i) out.psi[i] = std::exp(t.logw[i + 1] - t.log_evidence);
    return out;
}

SignalPrior em_update(const InputPseudoData& data, const SignalPrior& prior, double first_var_floor,
                      kernels::Exec exec) {
    if (data.r.empty()) throw std::invalid_argument("em_update: empty data");
    check_tau(data.tau_r);
    const std::size_t n = data.r.size();
    const std::size_t k = prior.size();
    const double tau = data.tau_r;

    // per-chunk sums: [psi0, S_i..., sum psi_i r..., sum psi_i (r - mu_i)^2...]
    constexpr std::size_t kStride = 1 + 3 * kMaxComponents;
    const std::size_t chunks = (n + kernels::kChunk - 1) / kernels::kChunk;
    std::vector<std::array<double, kStride>> part(chunks);
    const auto nc = static_cast<std::ptrdiff_t>(chunks);
#pragma omp parallel for schedule(static) if (exec == kernels::Exec::parallel)
    for (std::ptrdiff_t c = 0; c < nc; ++c) {
        auto& acc = part[c];
        acc.fill(0.0);
        const std::size_t end = std::min(n, static_cast<std::size_t>(c + 1) * kernels::kChunk);
        for (std::size_t j = static_cast<std::size_t>(c) * kernels::kChunk; j < end; ++j) {
            const double r = data.r[j];
            const ComponentTerms t = component_terms(r, tau, prior);
            acc[0] += std::exp(t.logw[0] - t.log_evidence);
            for (std::size_t i = 0; i < k; ++i) {
                const double psi = std::exp(t.logw[i + 1] - t.log_evidence);
                const double d = r - prior.components[i].mean;
                acc[1 + i] += psi;
                acc[1 + kMaxComponents + i] += psi * r;
                acc[1 + 2 * kMaxComponents + i] += psi * d * d;
            }
        }
    }
    std::array<double, kStride> tot{};
    for (const auto& acc : part)
        for (std::size_t i = 0; i < kStride; ++i) tot[i] += acc[i];

    SignalPrior next = prior;
    double nz = 0.0;
    for (std::size_t i = 0; i < k; ++i) nz += tot[1 + i];
    next.kappa = std::clamp(nz / (tot[0] + nz), kKappaMin, 1.0 - kKappaMin);

    double wsum = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        auto& c = next.components[i];
        const double s_i = tot[1 + i];
        if (nz > 0.0) c.weight = std::max(s_i / nz, kWeightFloor);
        wsum += c.weight;
        if (s_i > 1e-300) {
            // the variance uses the previous mean
            c.var = tot[1 + 2 * kMaxComponents + i] / s_i - tau;
            if (i > 0) c.mean = tot[1 + kMaxComponents + i] / s_i;
        }
        c.var = std::max({c.var, kVarFloor, i == 0 ? first_var_floor : 0.0});
    }
    for (auto& c : next.components) c.weight /= wsum;
    next.components[0].mean = 0.0;
    return next;
}

double pe_objective(const InputPseudoData& data, const SignalPrior& prior, kernels::Exec exec) {
    check_tau(data.tau_r);
    std::vector<double> terms(data.r.size());
    const auto n = static_cast<std::ptrdiff_t>(terms.size());
#pragma omp parallel for schedule(static) if (exec == kernels::Exec::parallel)
    for (std::ptrdiff_t j = 0; j < n; ++j) terms[j] = component_terms(data.r[j], data.tau_r, prior).log_evidence;
    return kernels::sum(exec, terms);
}

double prior_variance(const SignalPrior& prior) {
    double m1 = 0.0, m2 = 0.0;
    for (const auto& c : prior.components) {
        m1 += c.weight * c.mean;
        m2 += c.weight * (c.var + c.mean * c.mean);
    }
    m1 *= prior.kappa;
    m2 *= prior.kappa;
    return std::max(m2 - m1 * m1, 0.0);
}

BgmDraws sample_bgm_labeled(const SignalPrior& prior, std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    BgmDraws out;
    out.values.resize(n);
    out.labels.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        if (rng.uniform() >= prior.kappa) {
            out.values[j] = 0.0;
            out.labels[j] = 0;
            continue;
        }
        const double u = rng.uniform();
        std::size_t i = 0;
        double cum = prior.components[0].weight;
        while (u >= cum && i + 1 < prior.size()) cum += prior.components[++i].weight;
        const auto& c = prior.components[i];
        out.values[j] = c.mean + std::sqrt(c.var) * rng.normal();
        out.labels[j] = static_cast<int>(i + 1);
    }
    return out;
}

std::vector<double> sample_bgm(const SignalPrior& prior, std::size_t n, std::uint64_t seed) {
    return sample_bgm_labeled(prior, n, seed).values;
}

SignalPrior damp(const SignalPrior& old_prior, const SignalPrior& new_prior, double eta) {
    if (!(eta > 0.0 && eta <= 1.0)) throw std::invalid_argument("damp: eta must be in (0, 1]");
    if (old_prior.size() != new_prior.size()) throw std::invalid_argument("damp: component count mismatch");
    if (eta == 1.0) return new_prior;
    auto mix = [eta](double a, double b) { return a + eta * (b - a); };
    SignalPrior out = old_prior;
    out.kappa = mix(old_prior.kappa, new_prior.kappa);
    for (std::size_t i = 0; i < out.size(); ++i) {
        auto& c = out.components[i];
        const auto& nc = new_prior.components[i];
        c.weight = mix(c.weight, nc.weight);
        c.mean = mix(c.mean, nc.mean);
        c.var = mix(c.var, nc.var);
    }
    return out;
}

void to_json(nlohmann::json& j, const SignalPrior& p) {
    std::vector<double> w, m, v;
    for (const auto& c : p.components) {
        w.push_back(c.weight);
        m.push_back(c.mean);
        v.push_back(c.var);
    }
    j = nlohmann::json{{"kappa", p.kappa}, {"weights", w}, {"means", m}, {"vars", v}};
}

void from_json(const nlohmann::json& j, SignalPrior& p) {
    p.kappa = j.at("kappa").get<double>();
    const auto w = j.at("weights").get<std::vector<double>>();
    const auto m = j.at("means").get<std::vector<double>>();
    const auto v = j.at("vars").get<std::vector<double>>();
    if (w.size() != m.size() || w.size() != v.size())
        throw std::invalid_argument("SignalPrior JSON: weights/means/vars length mismatch");
    p.components.clear();
    for (std::size_t i = 0; i < w.size(); ++i) p.components.push_back({w[i], m[i], v[i]});
    p.validate();
}

}  // namespace quantamp
