#include "quantamp/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cstdlib>
#include <string>
#include <vector>

namespace quantamp::kernels {

namespace {

// transposed product works on column blocks so each y_n accumulates over rows in order
constexpr std::size_t kColBlock = 256;

std::size_t n_chunks(std::size_t n) { return (n + kChunk - 1) / kChunk; }

}  // namespace

namespace serial {

void gemv(std::span<const double> a, std::size_t rows, std::size_t cols, std::span<const double> x,
          std::span<double> y) {
    for (std::size_t m = 0; m < rows; ++m) {
        const double* row = a.data() + m * cols;
        double acc = 0.0;
        for (std::size_t n = 0; n < cols; ++n) acc += row[n] * x[n];
        y[m] = acc;
    }
}

void gemv_t(std::span<const double> a, std::size_t rows, std::size_t cols, std::span<const double> s,
            std::span<double> y) {
    std::fill(y.begin(), y.end(), 0.0);
    for (std::size_t m = 0; m < rows; ++m) {
        const double* row = a.data() + m * cols;
        const double sm = s[m];
        for (std::size_t n = 0; n < cols; ++n) y[n] += row[n] * sm;
    }
}

double sum(std::span<const double> v) {
    double total = 0.0;
    for (std::size_t c = 0; c < n_chunks(v.size()); ++c) {
        const std::size_t end = std::min(v.size(), (c + 1) * kChunk);
        double acc = 0.0;
        for (std::size_t i = c * kChunk; i < end; ++i) acc += v[i];
        total += acc;
    }
    return total;
}

double dot(std::span<const double> u, std::span<const double> v) {
    double total = 0.0;
    for (std::size_t c = 0; c < n_chunks(u.size()); ++c) {
        const std::size_t end = std::min(u.size(), (c + 1) * kChunk);
        double acc = 0.0;
        for (std::size_t i = c * kChunk; i < end; ++i) acc += u[i] * v[i];
        total += acc;
    }
    return total;
}

}  // namespace serial

namespace parallel {

void gemv(std::span<const double> a, std::size_t rows, std::size_t cols, std::span<const double> x,
          std::span<double> y) {
    const auto m_end = static_cast<std::ptrdiff_t>(rows);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t m = 0; m < m_end; ++m) {
        const double* row = a.data() + static_cast<std::size_t>(m) * cols;
        double acc = 0.0;
        for (std::size_t n = 0; n < cols; ++n) acc += row[n] * x[n];
        y[m] = acc;
    }
}

void gemv_t(std::span<const double> a, std::size_t rows, std::size_t cols, std::span<const double> s,
            std::span<double> y) {
    const auto blocks = static_cast<std::ptrdiff_t>((cols + kColBlock - 1) / kColBlock);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t b = 0; b < blocks; ++b) {
        const std::size_t lo = static_cast<std::size_t>(b) * kColBlock;
        const std::size_t hi = std::min(cols, lo + kColBlock);
        for (std::size_t n = lo; n < hi; ++n) y[n] = 0.0;
        for (std::size_t m = 0; m < rows; ++m) {
            const double* row = a.data() + m * cols;
            const double sm = s[m];
            for (std::size_t n = lo; n < hi; ++n) y[n] += row[n] * sm;
        }
    }
}

double sum(std::span<const double> v) {
    std::vector<double> part(n_chunks(v.size()));
    const auto nc = static_cast<std::ptrdiff_t>(part.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t c = 0; c < nc; ++c) {
        const std::size_t end = std::min(v.size(), static_cast<std::size_t>(c + 1) * kChunk);
        double acc = 0.0;
        for (std::size_t i = static_cast<std::size_t>(c) * kChunk; i < end; ++i) acc += v[i];
        part[c] = acc;
    }
    double total = 0.0;
    for (double p : part) total += p;
    return total;
}

double dot(std::span<const double> u, std::span<const double> v) {
    std::vector<double> part(n_chunks(u.size()));
    const auto nc = static_cast<std::ptrdiff_t>(part.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t c = 0; c < nc; ++c) {
        const std::size_t end = std::min(u.size(), static_cast<std::size_t>(c + 1) * kChunk);
        double acc = 0.0;
        for (std::size_t i = static_cast<std::size_t>(c) * kChunk; i < end; ++i) acc += u[i] * v[i];
        part[c] = acc;
    }
    double total = 0.0;
    for (double p : part) total += p;
    return total;
}

}  // namespace parallel

void gemv(Exec e, std::span<const double> a, std::size_t rows, std::size_t cols, std::span<const double> x,
          std::span<double> y) {
    e == Exec::parallel ? parallel::gemv(a, rows, cols, x, y) : serial::gemv(a, rows, cols, x, y);
}

void gemv_t(Exec e, std::span<const double> a, std::size_t rows, std::size_t cols, std::span<const double> s,
            std::span<double> y) {
    e == Exec::parallel ? parallel::gemv_t(a, rows, cols, s, y) : serial::gemv_t(a, rows, cols, s, y);
}

double sum(Exec e, std::span<const double> v) { return e == Exec::parallel ? parallel::sum(v) : serial::sum(v); }

double dot(Exec e, std::span<const double> u, std::span<const double> v) {
    return e == Exec::parallel ? parallel::dot(u, v) : serial::dot(u, v);
}

void configure_threads_from_env() {
    const char* env = std::getenv("QUANTAMP_THREADS");
    if (!env) return;
    try {
        const int n = std::stoi(env);
        if (n >= 1) omp_set_num_threads(std::min(n, omp_get_max_threads()));
    } catch (const std::exception&) {
        // ignore malformed values
    }
}

}  // namespace quantamp::kernels
