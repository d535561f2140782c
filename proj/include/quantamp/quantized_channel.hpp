#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "json.hpp"
#include "quantamp/kernels.hpp"
#include "quantamp/signal_prior.hpp"

namespace quantamp {

using CellIndex = std::uint32_t;

// Cells are 0-based here: cell k covers [bounds[k], bounds[k+1]).
struct Quantizer {
    int bits = 1;
    std::vector<double> bounds;
    std::vector<double> symbols;

    std::size_t cells() const { return symbols.size(); }
    double lower(CellIndex k) const { return bounds[k]; }
    double upper(CellIndex k) const { return bounds[k + 1]; }
    void validate() const;
};

struct NoisePrior {
    double gamma_w = 1e-6;
};

struct OutputPseudoData {
    std::span<const double> q;
    double tau_q;
    std::span<const CellIndex> y;
};

CellIndex quantize(double v, const Quantizer& qz);
std::vector<CellIndex> quantize(std::span<const double> v, const Quantizer& qz);
std::vector<double> dequantize(std::span<const CellIndex> y, const Quantizer& qz);

Quantizer make_uniform_quantizer(int bits, double step);
// step = 2 * sd * 2^(1 - bits), sd being the spread of the quantizer input
Quantizer make_calibrated_quantizer(int bits, double sd);

struct CellMoments {
    double v0;
    double v1;
    double v2;
};

// Closed-form cell moments on an arbitrary quantizer.
CellMoments cell_moments(double q, double tau_q, CellIndex cell, const Quantizer& qz, NoisePrior noise);

// Sign-quantizer closed forms built on h0, h1, h2; y is -1 or +1.
CellMoments sign_channel_moments(double q, double tau_q, int y, NoisePrior noise);

PosteriorMoments z_posterior_moments(double q, double tau_q, CellIndex cell, const Quantizer& qz,
                                     NoisePrior noise);

struct ObjectiveDerivs {
    double g;
    double g1;
    double g2;
};

// automatic: sign formulas for a 1-bit quantizer, cell formulas otherwise
enum class GradientForm { automatic, sign, cells };

ObjectiveDerivs noise_posterior_gradient(const OutputPseudoData& data, const Quantizer& qz, NoisePrior noise,
                                         GradientForm form = GradientForm::automatic,
                                         kernels::Exec exec = kernels::Exec::parallel);

// Second-order ascent on a scalar variance parameter: Newton when the curvature
// is negative (trust-clipped to [0.1x, 10x]), otherwise a gradient-sign step;
// backtracking keeps the objective from decreasing.
double second_order_variance_step(double gamma, const std::function<ObjectiveDerivs(double)>& eval);

NoisePrior update_gamma_w(const OutputPseudoData& data, const Quantizer& qz, NoisePrior noise,
                          kernels::Exec exec = kernels::Exec::parallel);

void to_json(nlohmann::json& j, const Quantizer& qz);
void from_json(const nlohmann::json& j, Quantizer& qz);

}  // namespace quantamp
