#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "quantamp/amp_solver.hpp"
#include "quantamp/linear_operator.hpp"
#include "quantamp/quantized_channel.hpp"
#include "quantamp/signal_prior.hpp"

namespace quantamp {

enum class NonzeroDist { gaussian, cauchy, laplace };
enum class MatrixScale { unit, one_over_m };

NonzeroDist parse_dist(const std::string& s);
std::string to_string(NonzeroDist d);
MatrixScale parse_matrix_scale(const std::string& s);
std::string to_string(MatrixScale m);

std::size_t nonzero_count(std::size_t n, double sparsity);

std::vector<double> gen_signal(std::size_t n, double sparsity, NonzeroDist dist, std::uint64_t seed);
DenseOperator gen_matrix(std::size_t m, std::size_t n, MatrixScale scale, std::uint64_t seed,
                         kernels::Exec exec = kernels::Exec::parallel);

double calibrate_noise(std::span<const double> z, double snr_db);

struct Nmse {
    double plain;
    double debiased;
};
Nmse nmse(std::span<const double> x_true, std::span<const double> x_hat);
double to_db(double v);

// keeps the e largest magnitudes, ties to the lower index
void hard_threshold(std::span<double> x, std::size_t e);

// step <= 0 selects N / ||A||_F^2
std::vector<double> qiht_baseline(const LinearOperator& op, std::span<const CellIndex> y, const Quantizer& qz,
                                  std::size_t e, double step, int iters);

// cell midpoints, the symbol itself for unbounded cells
std::vector<double> dequantize_midpoint(std::span<const CellIndex> y, const Quantizer& qz);

SolverResult amp_awgn_baseline(const LinearOperator& op, std::span<const CellIndex> y, const Quantizer& qz,
                               const SignalPrior& prior0, NoisePrior noise0, const SolverOptions& opts,
                               std::span<const double> truth = {});

}  // namespace quantamp
