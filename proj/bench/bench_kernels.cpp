// Serial reference kernels vs their OpenMP versions at the MNIST layer
// shapes. Run with OMP_NUM_THREADS set to compare thread counts.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "pcn/kernels.hpp"

namespace k = pcn::kernels;

namespace {

std::vector<double> randn(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

template <bool Parallel>
void BM_gemv(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0)), cols = static_cast<std::size_t>(state.range(1));
  const auto a = randn(rows * cols, 1), x = randn(cols, 2);
  std::vector<double> y(rows);
  for (auto _ : state) {
    if constexpr (Parallel) k::parallel::gemv(a, rows, cols, x, y);
    else k::serial::gemv(a, rows, cols, x, y);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rows * cols));
}

template <bool Parallel>
void BM_gemv_t(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0)), cols = static_cast<std::size_t>(state.range(1));
  const auto a = randn(rows * cols, 1), x = randn(rows, 2);
  std::vector<double> y(cols);
  for (auto _ : state) {
    if constexpr (Parallel) k::parallel::gemv_t(a, rows, cols, x, y);
    else k::serial::gemv_t(a, rows, cols, x, y);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rows * cols));
}

template <bool Parallel>
void BM_add_outer(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0)), cols = static_cast<std::size_t>(state.range(1));
  auto a = randn(rows * cols, 1);
  const auto u = randn(rows, 2), v = randn(cols, 3);
  for (auto _ : state) {
    if constexpr (Parallel) k::parallel::add_outer(a, rows, cols, 1e-9, u, v);
    else k::serial::add_outer(a, rows, cols, 1e-9, u, v);
    benchmark::DoNotOptimize(a.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rows * cols));
}

template <bool Parallel>
void BM_gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = randn(n * n, 1), b = randn(n * n, 2);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    if constexpr (Parallel) k::parallel::gemm(a, b, c, n, n, n);
    else k::serial::gemm(a, b, c, n, n, n);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}

void shapes(benchmark::internal::Benchmark* b) {
  b->Args({128, 784})->Args({64, 128})->Args({10, 64})->Args({1024, 1024});
}

}  // namespace

BENCHMARK(BM_gemv<false>)->Name("gemv/serial")->Apply(shapes);
BENCHMARK(BM_gemv<true>)->Name("gemv/parallel")->Apply(shapes);
BENCHMARK(BM_gemv_t<false>)->Name("gemv_t/serial")->Apply(shapes);
BENCHMARK(BM_gemv_t<true>)->Name("gemv_t/parallel")->Apply(shapes);
BENCHMARK(BM_add_outer<false>)->Name("add_outer/serial")->Apply(shapes);
BENCHMARK(BM_add_outer<true>)->Name("add_outer/parallel")->Apply(shapes);
BENCHMARK(BM_gemm<false>)->Name("gemm/serial")->Arg(64)->Arg(256);
BENCHMARK(BM_gemm<true>)->Name("gemm/parallel")->Arg(64)->Arg(256);

BENCHMARK_MAIN();
