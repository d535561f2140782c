// Serial reference kernels vs their OpenMP versions.
// Run with QUANTAMP_THREADS=k to pin the thread count.

#include <benchmark/benchmark.h>

#include <vector>

#include "quantamp/kernels.hpp"
#include "quantamp/numerics.hpp"

namespace {

using quantamp::kernels::Exec;

std::vector<double> noise(std::size_t n, std::uint64_t seed) {
    quantamp::Rng rng(seed);
    std::vector<double> v(n);
    for (auto& x : v) x = rng.normal();
    return v;
}

template <Exec E>
void bm_gemv(benchmark::State& st) {
    const auto rows = static_cast<std::size_t>(st.range(0));
    const std::size_t cols = rows / 2;
    const auto a = noise(rows * cols, 1);
    const auto x = noise(cols, 2);
    std::vector<double> y(rows);
    for (auto _ : st) {
        quantamp::kernels::gemv(E, a, rows, cols, x, y);
        benchmark::DoNotOptimize(y.data());
    }
    st.SetBytesProcessed(static_cast<int64_t>(st.iterations()) * static_cast<int64_t>(a.size() * sizeof(double)));
}

template <Exec E>
void bm_gemv_t(benchmark::State& st) {
    const auto rows = static_cast<std::size_t>(st.range(0));
    const std::size_t cols = rows / 2;
    const auto a = noise(rows * cols, 3);
    const auto s = noise(rows, 4);
    std::vector<double> y(cols);
    for (auto _ : st) {
        quantamp::kernels::gemv_t(E, a, rows, cols, s, y);
        benchmark::DoNotOptimize(y.data());
    }
    st.SetBytesProcessed(static_cast<int64_t>(st.iterations()) * static_cast<int64_t>(a.size() * sizeof(double)));
}

template <Exec E>
void bm_sum(benchmark::State& st) {
    const auto v = noise(static_cast<std::size_t>(st.range(0)), 5);
    for (auto _ : st) benchmark::DoNotOptimize(quantamp::kernels::sum(E, v));
    st.SetItemsProcessed(static_cast<int64_t>(st.iterations()) * st.range(0));
}

template <Exec E>
void bm_dot(benchmark::State& st) {
    const auto u = noise(static_cast<std::size_t>(st.range(0)), 6);
    const auto v = noise(static_cast<std::size_t>(st.range(0)), 7);
    for (auto _ : st) benchmark::DoNotOptimize(quantamp::kernels::dot(E, u, v));
    st.SetItemsProcessed(static_cast<int64_t>(st.iterations()) * st.range(0));
}

struct ThreadSetup {
    ThreadSetup() { quantamp::kernels::configure_threads_from_env(); }
} const setup;

}  // namespace

BENCHMARK(bm_gemv<Exec::serial>)->Arg(1000)->Arg(4000);
BENCHMARK(bm_gemv<Exec::parallel>)->Arg(1000)->Arg(4000);
BENCHMARK(bm_gemv_t<Exec::serial>)->Arg(1000)->Arg(4000);
BENCHMARK(bm_gemv_t<Exec::parallel>)->Arg(1000)->Arg(4000);
BENCHMARK(bm_sum<Exec::serial>)->Arg(1 << 12)->Arg(1 << 20);
BENCHMARK(bm_sum<Exec::parallel>)->Arg(1 << 12)->Arg(1 << 20);
BENCHMARK(bm_dot<Exec::serial>)->Arg(1 << 12)->Arg(1 << 20);
BENCHMARK(bm_dot<Exec::parallel>)->Arg(1 << 12)->Arg(1 << 20);

BENCHMARK_MAIN();
