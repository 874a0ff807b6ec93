#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <omp.h>

#include <cstring>
#include <random>
#include <vector>

#include "pcn/kernels.hpp"

namespace k = pcn::kernels;

namespace {

// Several threads even on a single core, so the split is exercised.
const bool kThreads = (omp_set_num_threads(4), true);

std::vector<double> randn(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

// Shapes include row counts that are not multiples of the 4-row blocking
// and sizes on both sides of the dispatch threshold.
const std::vector<std::pair<std::size_t, std::size_t>> kShapes{
    {1, 1}, {3, 7}, {5, 5}, {4, 9}, {17, 13}, {128, 784}, {131, 257}, {10, 64}};

}  // namespace

TEST_CASE("gemv: serial, parallel and dispatch are bitwise identical") {
  for (auto [r, c] : kShapes) {
    const auto a = randn(r * c, r * 31 + c), x = randn(c, c);
    std::vector<double> ys(r), yp(r), yd(r);
    k::serial::gemv(a, r, c, x, ys);
    k::parallel::gemv(a, r, c, x, yp);
    k::gemv(a, r, c, x, yd);
    CHECK(bitwise_equal(ys, yp));
    CHECK(bitwise_equal(ys, yd));
    // Reference: straightforward double loop, compared with a tolerance
    // since the blocked kernel sums in its own order.
    for (std::size_t i = 0; i < r; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < c; ++j) s += a[i * c + j] * x[j];
      CHECK(ys[i] == doctest::Approx(s).epsilon(1e-12));
    }
  }
}

TEST_CASE("gemv_t: serial and parallel are bitwise identical") {
  for (auto [r, c] : kShapes) {
    const auto a = randn(r * c, r + 7 * c), x = randn(r, r + 1);
    std::vector<double> ys(c), yp(c), yd(c);
    k::serial::gemv_t(a, r, c, x, ys);
    k::parallel::gemv_t(a, r, c, x, yp);
    k::gemv_t(a, r, c, x, yd);
    CHECK(bitwise_equal(ys, yp));
    CHECK(bitwise_equal(ys, yd));
    for (std::size_t j = 0; j < c; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < r; ++i) s += a[i * c + j] * x[i];
      CHECK(ys[j] == doctest::Approx(s).epsilon(1e-12));
    }
  }
}

TEST_CASE("add_outer: serial and parallel are bitwise identical") {
  for (auto [r, c] : kShapes) {
    const auto base = randn(r * c, 3 * r + c), u = randn(r, r + 2), v = randn(c, c + 3);
    auto as = base, ap = base;
    k::serial::add_outer(as, r, c, -0.37, u, v);
    k::parallel::add_outer(ap, r, c, -0.37, u, v);
    CHECK(bitwise_equal(as, ap));
    CHECK(as[r * c - 1] == doctest::Approx(base[r * c - 1] - 0.37 * u[r - 1] * v[c - 1]));
  }
}

TEST_CASE("gemm: serial and parallel are bitwise identical") {
  for (auto [n, kk, m] : std::vector<std::tuple<std::size_t, std::size_t, std::size_t>>{
           {1, 1, 1}, {3, 5, 2}, {33, 17, 65}, {64, 64, 64}}) {
    const auto a = randn(n * kk, n + kk), b = randn(kk * m, kk + m);
    std::vector<double> cs(n * m), cp(n * m);
    k::serial::gemm(a, b, cs, n, kk, m);
    k::parallel::gemm(a, b, cp, n, kk, m);
    CHECK(bitwise_equal(cs, cp));
    double s = 0.0;
    for (std::size_t t = 0; t < kk; ++t) s += a[t] * b[t * m];
    CHECK(cs[0] == doctest::Approx(s).epsilon(1e-12));
  }
}

TEST_CASE("parallel kernels run with several threads") { CHECK((kThreads && k::max_threads() == 4)); }
