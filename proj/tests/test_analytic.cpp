#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pcn/analytic.hpp"
#include "pcn/inference.hpp"
#include "test_util.hpp"

using namespace pcn;
using namespace testutil;

TEST_CASE("scalar layer formula by hand") {
  // x* = (w1 x0 + w2 x2) / (1 + w2²)
  const Vector s = linear_equilibrium_layer(Matrix{{2.0}}, Matrix{{3.0}}, Vector{1.0}, Vector{4.0});
  CHECK(s[0] == doctest::Approx((2.0 + 12.0) / 10.0));
  // with precisions p1, p2: (p1 w1 x0 + p2 w2 x2) / (p1 + p2 w2²)
  const Vector p = precision_equilibrium_layer(Matrix{{2.0}}, Matrix{{3.0}}, Matrix{{0.5}}, Matrix{{2.0}},
                                               Vector{1.0}, Vector{4.0});
  CHECK(p[0] == doctest::Approx((0.5 * 2.0 + 2.0 * 12.0) / (0.5 + 18.0)));
}

TEST_CASE("direct and Gauss-Seidel solutions are stationary") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    Network net = random_net({3, 4, 5, 3, 2}, ActivationKind::Linear, rng, 0.5);
    if (trial % 2) {
      const Matrix b = randn(4, 4, rng, 0.3);
      net.set_precision(1, b.transpose() * b + Matrix::identity(4));
    }
    const Vector d = randn(3, rng), t = randn(2, rng);
    const auto direct = solve_linear_network_equilibrium(net, d, t);
    const auto gs = solve_linear_network_equilibrium(net, d, t, EquilibriumMethod::GaussSeidel, 1e-14);
    CHECK(sup_diff(direct.activities, gs.activities) < 1e-9);
    CHECK(gs.sweeps > 0);
    CHECK(direct.residual < 1e-10);
    // Stationarity by finite differences of the test-side energy.
    for (std::size_t l = 1; l < 4; ++l)
      for (std::size_t i = 0; i < direct.activities[l].size(); ++i)
        CHECK(std::abs(fd([&](const auto& xx) { return total_energy(net, xx); }, direct.activities, l, i)) < 1e-7);
  }
  const Network tanh_net({Matrix::identity(2), Matrix::identity(2)}, {ActivationKind::Tanh, ActivationKind::Linear});
  CHECK_THROWS_AS((solve_linear_network_equilibrium(tanh_net, Vector{1, 1}, Vector{1, 1})), Error);
}

TEST_CASE("path_to_convergence solves the fixed-neighbour ODE") {
  std::mt19937_64 rng(2);
  const Matrix w1 = randn(3, 2, rng), w2 = randn(2, 3, rng);
  const Vector below = randn(2, rng), above = randn(2, rng), x0 = randn(3, rng);
  const Vector star = linear_equilibrium_layer(w1, w2, below, above);
  CHECK(norm_inf(path_to_convergence(w1, w2, below, above, x0, 0.0) - x0) < 1e-14);
  CHECK(norm_inf(path_to_convergence(w1, w2, below, above, x0, 200.0) - star) < 1e-12);
  // ẋ = -(A x - b) at t = 0.3 by a central difference in time
  const double t = 0.3, h = 1e-5;
  const Vector xp = path_to_convergence(w1, w2, below, above, x0, t + h);
  const Vector xm = path_to_convergence(w1, w2, below, above, x0, t - h);
  const Vector x = path_to_convergence(w1, w2, below, above, x0, t);
  const Network net({w1, w2}, {ActivationKind::Linear, ActivationKind::Linear});
  const auto st = make_state(net, {below, x, above}, true, true);
  const auto v = activity_velocity(net, st, EnergyWeights::standard(), false);
  CHECK(norm_inf((1.0 / (2 * h)) * (xp - xm) - v[1]) < 1e-7);
}

TEST_CASE("convexity certificate") {
  std::mt19937_64 rng(3);
  const Network net = random_net({2, 3, 4, 2}, ActivationKind::Linear, rng);
  const auto c = convexity_certificate(net);
  REQUIRE(c.min_eigs.size() == 2);
  for (double e : c.min_eigs) CHECK(e >= 1.0 - 1e-12);
  CHECK(c.convex);
  // W_{l+1} with fewer rows than columns has a null space: min eig exactly 1.
  CHECK(c.min_eigs[1] == doctest::Approx(1.0));
}

TEST_CASE("zero-error residual") {
  const Network net({Matrix{{2.0}}, Matrix{{4.0}}}, {ActivationKind::Linear, ActivationKind::Linear});
  CHECK(zero_error_residual(net, {Vector{1.0}, Vector{2.0}, Vector{8.0}}) < 1e-15);
  CHECK(zero_error_residual(net, {Vector{1.0}, Vector{2.0}, Vector{4.0}}) == doctest::Approx(1.0));
  CHECK_THROWS_AS((zero_error_residual(net, {Vector{1.0}})), ShapeError);
}
