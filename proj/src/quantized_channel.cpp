#include "quantamp/quantized_channel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "quantamp/numerics.hpp"

namespace quantamp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_cell(CellIndex cell, const Quantizer& qz) {
    if (cell >= qz.cells()) throw std::out_of_range("quantizer: invalid cell index " + std::to_string(cell));
}

void check_variances(double tau_q, NoisePrior noise) {
    if (!(tau_q > 0.0)) throw std::domain_error("quantized channel: tau_q must be positive");
    if (!(noise.gamma_w > 0.0)) throw std::domain_error("quantized channel: gamma_w must be positive");
}

// log V0 and its first two derivatives in gamma_w for one measurement
ObjectiveDerivs cell_terms(double q, double tau_q, CellIndex cell, const Quantizer& qz, double gamma) {
    const double s = tau_q + gamma;
    const double sd = std::sqrt(s);
    const double al = (qz.lower(cell) - q) / sd;
    const double be = (qz.upper(cell) - q) / sd;
    const TruncatedMoments tm = truncated_std_normal(al, be);
    const double ta = std::isfinite(al) ? al * tm.rho_lo : 0.0;
    const double tb = std::isfinite(be) ? be * tm.rho_hi : 0.0;
    const double ca = std::isfinite(al) ? (3.0 * al - al * al * al) * tm.rho_lo : 0.0;
    const double cb = std::isfinite(be) ? (3.0 * be - be * be * be) * tm.rho_hi : 0.0;
    const double g1 = (ta - tb) / (2.0 * s);
    const double h = (cb - ca) / (4.0 * s * s);
    return {tm.log_mass.value, g1, -g1 * g1 + h};
}

// same quantities through the sign-quantizer h0 derivatives
ObjectiveDerivs sign_terms(double q, double tau_q, CellIndex cell, double threshold, double gamma) {
    const double s = tau_q + gamma;
    const double qb = (q - threshold) / std::sqrt(s);
    const double sgn = cell == 0 ? 1.0 : -1.0;  // dU0 = -dh0 for y = +1
    const double u = sgn * qb;
    const double hz = inv_mills_ratio(u);  // phi(qb) / U0
    const double g1 = sgn * qb * hz / (2.0 * s);
    const double h = sgn * (qb * qb * qb - 3.0 * qb) * hz / (4.0 * s * s);
    return {log_half_erfc(u), g1, -g1 * g1 + h};
}

double parse_extended(const nlohmann::json& v) {
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s == "-inf") return -kInf;
        if (s == "inf" || s == "+inf") return kInf;
        throw std::invalid_argument("quantizer JSON: unknown bound sentinel '" + s + "'");
    }
    return v.get<double>();
}

}  // namespace

void Quantizer::validate() const {
    if (bits < 1 || bits > 16) throw std::invalid_argument("Quantizer: bits must be in [1, 16]");
    const std::size_t k = std::size_t{1} << bits;
    if (symbols.size() != k || bounds.size() != k + 1)
        throw std::invalid_argument("Quantizer: expected 2^B symbols and 2^B+1 bounds");
    if (bounds.front() != -kInf || bounds.back() != kInf)
        throw std::invalid_argument("Quantizer: outer bounds must be -inf and +inf");
    for (std::size_t i = 0; i + 1 < bounds.size(); ++i)
        if (!(bounds[i] < bounds[i + 1])) throw std::invalid_argument("Quantizer: bounds must be strictly increasing");
    for (std::size_t i = 0; i < k; ++i) {
        if (!std::isfinite(symbols[i])) throw std::invalid_argument("Quantizer: symbols must be finite");
        if (std::isfinite(bounds[i]) && std::isfinite(bounds[i + 1]) &&
            !(symbols[i] >= bounds[i] && symbols[i] < bounds[i + 1]))
            throw std::invalid_argument("Quantizer: symbol outside its cell");
    }
}

CellIndex quantize(double v, const Quantizer& qz) {
    // sign quantizer sends the threshold itself to the lower cell
    if (qz.bits == 1) return v <= qz.bounds[1] ? 0 : 1;
    const auto first = qz.bounds.begin() + 1;
    const auto last = qz.bounds.end() - 1;
    return static_cast<CellIndex>(std::upper_bound(first, last, v) - first);
}

std::vector<CellIndex> quantize(std::span<const double> v, const Quantizer& qz) {
    std::vector<CellIndex> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = quantize(v[i], qz);
    return out;
}

std::vector<double> dequantize(std::span<const CellIndex> y, const Quantizer& qz) {
    std::vector<double> out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        check_cell(y[i], qz);
        out[i] = qz.symbols[y[i]];
    }
    return out;
}

Quantizer make_uniform_quantizer(int bits, double step) {
    if (bits < 1 || bits > 16) throw std::invalid_argument("make_uniform_quantizer: bits must be in [1, 16]");
    if (!(step > 0.0)) throw std::invalid_argument("make_uniform_quantizer: step must be positive");
    Quantizer qz;
    qz.bits = bits;
    if (bits == 1) {
        qz.bounds = {-kInf, 0.0, kInf};
        qz.symbols = {-1.0, 1.0};
        return qz;
    }
    const int half = (1 << (bits - 1)) - 1;
    qz.bounds.push_back(-kInf);
    for (int k = -half; k <= half; ++k) qz.bounds.push_back(k * step);
    qz.bounds.push_back(kInf);
    qz.symbols.push_back(-half * step - 0.5 * step);
    for (int k = -half; k < half; ++k) qz.symbols.push_back((k + 0.5) * step);
    qz.symbols.push_back(half * step + 0.5 * step);
    return qz;
}

Quantizer make_calibrated_quantizer(int bits, double sd) {
    if (!(sd > 0.0)) throw std::invalid_argument("make_calibrated_quantizer: spread must be positive");
    return make_uniform_quantizer(bits, 2.0 * sd * std::ldexp(1.0, 1 - bits));
}

CellMoments cell_moments(double q, double tau_q, CellIndex cell, const Quantizer& qz, NoisePrior noise) {
    check_cell(cell, qz);
    check_variances(tau_q, noise);
    const double s = tau_q + noise.gamma_w;
    const double sd = std::sqrt(s);
    const TruncatedMoments tm = truncated_std_normal((qz.lower(cell) - q) / sd, (qz.upper(cell) - q) / sd);
    const double v0 = tm.log_mass.prob();
    const double mean = q + tau_q / sd * tm.mean;
    const double var = tau_q * noise.gamma_w / s + tau_q * tau_q / s * tm.var;
    return {v0, v0 * mean, v0 * (var + mean * mean)};
}

// Closed forms in terms of the normal hazard; c is the standardised threshold
// seen from inside the half-line.
CellMoments sign_channel_moments(double q, double tau_q, int y, NoisePrior noise) {
    if (y != 1 && y != -1) throw std::invalid_argument("sign_channel_moments: y must be -1 or +1");
    check_variances(tau_q, noise);
    const double g = noise.gamma_w;
    const double s = tau_q + g;
    const double sd = std::sqrt(s);
    const double c = -y * q / sd;
    const double v0 = half_erfc(c);
    const double mean = q + y * tau_q / sd * inv_mills_ratio(c);
    const double var = tau_q * g / s + tau_q * tau_q / s * tail_var(c);
    return {v0, v0 * mean, v0 * (var + mean * mean)};
}

PosteriorMoments z_posterior_moments(double q, double tau_q, CellIndex cell, const Quantizer& qz,
                                     NoisePrior noise) {
    check_cell(cell, qz);
    check_variances(tau_q, noise);
    const double s = tau_q + noise.gamma_w;
    const double sd = std::sqrt(s);
    const TruncatedMoments tm = truncated_std_normal((qz.lower(cell) - q) / sd, (qz.upper(cell) - q) / sd);
    const double mean = q + tau_q / sd * tm.mean;
    const double var = tau_q * noise.gamma_w / s + tau_q * tau_q / s * tm.var;
    return {mean, std::clamp(var, 0.0, tau_q)};
}

ObjectiveDerivs noise_posterior_gradient(const OutputPseudoData& data, const Quantizer& qz, NoisePrior noise,
                                         GradientForm form, kernels::Exec exec) {
    check_variances(data.tau_q, noise);
    if (data.q.size() != data.y.size()) throw std::invalid_argument("noise_posterior_gradient: q/y size mismatch");
    const bool use_sign = form == GradientForm::sign || (form == GradientForm::automatic && qz.bits == 1);
    if (use_sign && qz.bits != 1) throw std::invalid_argument("noise_posterior_gradient: sign form needs 1 bit");

    const std::size_t m = data.q.size();
    std::vector<double> g(m), g1(m), g2(m);
    const auto mm = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (exec == kernels::Exec::parallel)
    for (std::ptrdiff_t i = 0; i < mm; ++i) {
        const CellIndex c = data.y[i];
        const ObjectiveDerivs t = use_sign ? sign_terms(data.q[i], data.tau_q, c, qz.bounds[1], noise.gamma_w)
                                           : cell_terms(data.q[i], data.tau_q, c, qz, noise.gamma_w);
        g[i] = t.g;
        g1[i] = t.g1;
        g2[i] = t.g2;
    }
    return {kernels::sum(exec, g), kernels::sum(exec, g1), kernels::sum(exec, g2)};
}

double second_order_variance_step(double gamma, const std::function<ObjectiveDerivs(double)>& eval) {
    const ObjectiveDerivs d = eval(gamma);
    if (!std::isfinite(d.g) || !std::isfinite(d.g1) || !std::isfinite(d.g2)) return gamma;
    double cand;
    if (d.g2 < 0.0) {
        cand = std::clamp(gamma - d.g1 / d.g2, 0.1 * gamma, 10.0 * gamma);
    } else {
        if (d.g1 == 0.0) return gamma;
        cand = d.g1 > 0.0 ? 2.0 * gamma : 0.5 * gamma;
    }
    cand = std::max(cand, kVarFloor);
    for (int k = 0; k < 40; ++k) {
        if (cand == gamma) return gamma;
        const double gn = eval(cand).g;
        if (std::isfinite(gn) && gn >= d.g - 1e-9) return cand;
        cand = std::max(std::sqrt(gamma * cand), kVarFloor);
    }
    return gamma;
}

NoisePrior update_gamma_w(const OutputPseudoData& data, const Quantizer& qz, NoisePrior noise,
                          kernels::Exec exec) {
    auto eval = [&](double gamma) { return noise_posterior_gradient(data, qz, NoisePrior{gamma}, GradientForm::automatic, exec); };
    return NoisePrior{second_order_variance_step(noise.gamma_w, eval)};
}

void to_json(nlohmann::json& j, const Quantizer& qz) {
    nlohmann::json b = nlohmann::json::array();
    for (double v : qz.bounds) {
        if (v == -kInf)
            b.push_back("-inf");
        else if (v == kInf)
            b.push_back("inf");
        else
            b.push_back(v);
    }
    j = nlohmann::json{{"bits", qz.bits}, {"bounds", b}, {"symbols", qz.symbols}};
}

void from_json(const nlohmann::json& j, Quantizer& qz) {
    qz.bits = j.at("bits").get<int>();
    qz.bounds.clear();
    for (const auto& v : j.at("bounds")) qz.bounds.push_back(parse_extended(v));
    qz.symbols = j.at("symbols").get<std::vector<double>>();
    qz.validate();
}

}  // namespace quantamp
