#include "pcn/kernels.hpp"

#include <algorithm>
#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace pcn::kernels {

namespace {

double row_dot(const double* ar, const double* x, std::size_t cols) {
  double acc = 0.0;
  for (std::size_t c = 0; c < cols; ++c) acc += ar[c] * x[c];
  return acc;
}

// Four independent row accumulators; each still sums its row left to right,
// so the result per element is the same as row_dot.
void gemv_rows4(const double* a, std::size_t cols, const double* x, double* y, std::size_t r0) {
  const double* a0 = a + r0 * cols;
  const double* a1 = a0 + cols;
  const double* a2 = a1 + cols;
  const double* a3 = a2 + cols;
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  for (std::size_t c = 0; c < cols; ++c) {
    const double xc = x[c];
    s0 += a0[c] * xc;
    s1 += a1[c] * xc;
    s2 += a2[c] * xc;
    s3 += a3[c] * xc;
  }
  y[r0] = s0;
  y[r0 + 1] = s1;
  y[r0 + 2] = s2;
  y[r0 + 3] = s3;
}

}  // namespace

namespace serial {

void gemv(std::span<const double> a, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<double> y) {
  const std::size_t blocks = rows / 4;
  for (std::size_t b = 0; b < blocks; ++b) gemv_rows4(a.data(), cols, x.data(), y.data(), 4 * b);
  for (std::size_t r = 4 * blocks; r < rows; ++r) y[r] = row_dot(a.data() + r * cols, x.data(), cols);
}

void gemv_t(std::span<const double> a, std::size_t rows, std::size_t cols,
            std::span<const double> x, std::span<double> y) {
  std::fill(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(cols), 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* ar = a.data() + r * cols;
    const double xr = x[r];
    for (std::size_t c = 0; c < cols; ++c) y[c] += ar[c] * xr;
  }
}

void add_outer(std::span<double> a, std::size_t rows, std::size_t cols, double alpha,
               std::span<const double> u, std::span<const double> v) {
  for (std::size_t r = 0; r < rows; ++r) {
    double* ar = a.data() + r * cols;
    const double s = alpha * u[r];
    for (std::size_t c = 0; c < cols; ++c) ar[c] += s * v[c];
  }
}

void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
          std::size_t n, std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    double* ci = c.data() + i * m;
    std::fill(ci, ci + m, 0.0);
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      const double* bp = b.data() + p * m;
      for (std::size_t j = 0; j < m; ++j) ci[j] += aip * bp[j];
    }
  }
}

}  // namespace serial

namespace parallel {

void gemv(std::span<const double> a, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<double> y) {
  const auto blocks = static_cast<std::int64_t>(rows / 4);
#pragma omp parallel for schedule(static)
  for (std::int64_t b = 0; b < blocks; ++b) {
    gemv_rows4(a.data(), cols, x.data(), y.data(), 4 * static_cast<std::size_t>(b));
  }
  for (std::size_t r = 4 * (rows / 4); r < rows; ++r) y[r] = row_dot(a.data() + r * cols, x.data(), cols);
}

// Columns are split across threads; each thread walks the rows in the same
// order as the serial kernel, so every y[c] accumulates identically.
void gemv_t(std::span<const double> a, std::size_t rows, std::size_t cols,
            std::span<const double> x, std::span<double> y) {
  const auto n = static_cast<std::int64_t>(cols);
#pragma omp parallel for schedule(static)
  for (std::int64_t c = 0; c < n; ++c) {
    const auto cc = static_cast<std::size_t>(c);
    double acc = 0.0;
    for (std::size_t r = 0; r < rows; ++r) acc += a[r * cols + cc] * x[r];
    y[cc] = acc;
  }
}

void add_outer(std::span<double> a, std::size_t rows, std::size_t cols, double alpha,
               std::span<const double> u, std::span<const double> v) {
  const auto n = static_cast<std::int64_t>(rows);
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < n; ++r) {
    double* ar = a.data() + static_cast<std::size_t>(r) * cols;
    const double s = alpha * u[static_cast<std::size_t>(r)];
    for (std::size_t c = 0; c < cols; ++c) ar[c] += s * v[c];
  }
}

void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
          std::size_t n, std::size_t k, std::size_t m) {
  const auto nn = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < nn; ++i) {
    const auto ii = static_cast<std::size_t>(i);
    double* ci = c.data() + ii * m;
    std::fill(ci, ci + m, 0.0);
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[ii * k + p];
      const double* bp = b.data() + p * m;
      for (std::size_t j = 0; j < m; ++j) ci[j] += aip * bp[j];
    }
  }
}

}  // namespace parallel

namespace {
bool use_parallel(std::size_t work) {
#ifdef _OPENMP
  return work >= kParallelThreshold && omp_get_max_threads() > 1 && !omp_in_parallel();
#else
  (void)work;
  return false;
#endif
}
}  // namespace

void gemv(std::span<const double> a, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<double> y) {
  if (use_parallel(rows * cols)) {
    parallel::gemv(a, rows, cols, x, y);
  } else {
    serial::gemv(a, rows, cols, x, y);
  }
}

void gemv_t(std::span<const double> a, std::size_t rows, std::size_t cols,
            std::span<const double> x, std::span<double> y) {
  if (use_parallel(rows * cols)) {
    parallel::gemv_t(a, rows, cols, x, y);
  } else {
    serial::gemv_t(a, rows, cols, x, y);
  }
}

void add_outer(std::span<double> a, std::size_t rows, std::size_t cols, double alpha,
               std::span<const double> u, std::span<const double> v) {
  if (use_parallel(rows * cols)) {
    parallel::add_outer(a, rows, cols, alpha, u, v);
  } else {
    serial::add_outer(a, rows, cols, alpha, u, v);
  }
}

void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
          std::size_t n, std::size_t k, std::size_t m) {
  if (use_parallel(n * k * m)) {
    parallel::gemm(a, b, c, n, k, m);
  } else {
    serial::gemm(a, b, c, n, k, m);
  }
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace pcn::kernels
