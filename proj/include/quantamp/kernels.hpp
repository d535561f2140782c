#pragma once

#include <cstddef>
#include <span>

// Dense kernels in two flavours. The serial versions are the reference; the
// OpenMP versions perform the same floating-point operations in the same
// order, so results are bit-identical and independent of thread count.
namespace quantamp::kernels {

enum class Exec { serial, parallel };

// Reductions are summed in fixed-size chunks, then the chunk totals in order.
inline constexpr std::size_t kChunk = 1024;

namespace serial {
void gemv(std::span<const double> a, std::size_t rows, std::size_t cols, std::span<const double> x,
          std::span<double> y);
void gemv_t(std::span<const double> a, std::size_t rows, std::size_t cols, std::span<const double> s,
            std::span<double> y);
double sum(std::span<const double> v);
double dot(std::span<const double> u, std::span<const double> v);
}  // namespace serial

namespace parallel {
void gemv(std::span<const double> a, std::size_t rows, std::size_t cols, std::span<const double> x,
          std::span<double> y);
void gemv_t(std::span<const double> a, std::size_t rows, std::size_t cols, std::span<const double> s,
            std::span<double> y);
double sum(std::span<const double> v);
double dot(std::span<const double> u, std::span<const double> v);
}  // namespace parallel

void gemv(Exec e, std::span<const double> a, std::size_t rows, std::size_t cols, std::span<const double> x,
          std::span<double> y);
void gemv_t(Exec e, std::span<const double> a, std::size_t rows, std::size_t cols, std::span<const double> s,
            std::span<double> y);
double sum(Exec e, std::span<const double> v);
double dot(Exec e, std::span<const double> u, std::span<const double> v);

// Applies QUANTAMP_THREADS (if set) to the OpenMP runtime. Idempotent.
void configure_threads_from_env();

}  // namespace quantamp::kernels
