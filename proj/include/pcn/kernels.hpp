#pragma once

// Inner-loop kernels used by the dense types. Each kernel exists twice:
// a plain serial loop kept as the reference, and an OpenMP version that
// splits output rows across threads. The parallel versions never change
// the per-element summation order, so both produce bitwise-identical
// results; tests/test_kernels.cpp holds them to that.

#include <cstddef>
#include <span>

namespace pcn::kernels {

// y = A x, A is rows x cols row-major.
// y = Aᵀ x.
// A += alpha * u vᵀ.
// C = A B, A is n x k, B is k x m.

namespace serial {
void gemv(std::span<const double> a, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<double> y);
void gemv_t(std::span<const double> a, std::size_t rows, std::size_t cols,
            std::span<const double> x, std::span<double> y);
void add_outer(std::span<double> a, std::size_t rows, std::size_t cols, double alpha,
               std::span<const double> u, std::span<const double> v);
void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
          std::size_t n, std::size_t k, std::size_t m);
}  // namespace serial

namespace parallel {
void gemv(std::span<const double> a, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<double> y);
void gemv_t(std::span<const double> a, std::size_t rows, std::size_t cols,
            std::span<const double> x, std::span<double> y);
void add_outer(std::span<double> a, std::size_t rows, std::size_t cols, double alpha,
               std::span<const double> u, std::span<const double> v);
void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
          std::size_t n, std::size_t k, std::size_t m);
}  // namespace parallel

// Work (multiply-adds) above which the dispatching entry points use the
// parallel kernels. Below it the fork/join overhead dominates.
inline constexpr std::size_t kParallelThreshold = 1 << 15;

void gemv(std::span<const double> a, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<double> y);
void gemv_t(std::span<const double> a, std::size_t rows, std::size_t cols,
            std::span<const double> x, std::span<double> y);
void add_outer(std::span<double> a, std::size_t rows, std::size_t cols, double alpha,
               std::span<const double> u, std::span<const double> v);
void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
          std::size_t n, std::size_t k, std::size_t m);

int max_threads();

}  // namespace pcn::kernels
