#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pcn/metrics.hpp"
#include "test_util.hpp"

using namespace pcn;
using namespace testutil;

TEST_CASE("energy report matches the definition") {
  std::mt19937_64 rng(1);
  Network net = random_net({3, 4, 2}, ActivationKind::Tanh, rng);
  const auto x = random_activities(net, rng);
  for (int pass = 0; pass < 2; ++pass) {
    const auto st = make_state(net, x, true, true);
    const auto r = energy_report(net, st);
    const auto e = layer_energies(net, x);
    CHECK(r.per_layer.size() == 2);
    CHECK(r.output_loss == doctest::Approx(e[1]).epsilon(1e-13));
    CHECK(r.residual == doctest::Approx(e[0]).epsilon(1e-13));
    CHECK(r.total == doctest::Approx(e[0] + e[1]).epsilon(1e-13));
    CHECK(layer_energy(net, st, 1) == doctest::Approx(e[0]).epsilon(1e-13));
    net.set_precision(2, Matrix{{2.0, 0.5}, {0.5, 1.0}});  // second pass is precision-weighted
  }
}

TEST_CASE("loss, residual and free-energy gradients match finite differences") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    Network net = random_net({2, 3, 4, 2}, trial % 2 ? ActivationKind::Tanh : ActivationKind::Linear, rng);
    if (trial % 3 == 0) net.set_precision(2, Matrix{{1.5, 0.1, 0, 0}, {0.1, 1, 0, 0}, {0, 0, 2, 0}, {0, 0, 0, .5}});
    const auto x = random_activities(net, rng);
    const auto st = make_state(net, x, trial % 2 == 0, trial % 4 < 2);
    const auto gl = loss_gradient(net, st), ge = residual_gradient(net, st), gf = free_energy_gradient(net, st);
    auto loss = [&](const auto& xx) { return layer_energies(net, xx).back(); };
    auto resid = [&](const auto& xx) {
      const auto e = layer_energies(net, xx);
      return e[0] + e[1];
    };
    auto total = [&](const auto& xx) { return total_energy(net, xx); };
    for (std::size_t l = 0; l <= 3; ++l) {
      for (std::size_t i = 0; i < x[l].size(); ++i) {
        CHECK(gl[l][i] == doctest::Approx(fd(loss, x, l, i)).epsilon(1e-7));
        CHECK(ge[l][i] == doctest::Approx(fd(resid, x, l, i)).epsilon(1e-7));
        CHECK(gf[l][i] == doctest::Approx(fd(total, x, l, i)).epsilon(1e-7));
      }
    }
  }
}

TEST_CASE("cosine") {
  CHECK(cosine_similarity(Vector{1.0, 0.0}, Vector{2.0, 0.0}) == doctest::Approx(1.0));
  CHECK(cosine_similarity(Vector{1.0, 0.0}, Vector{0.0, 3.0}) == doctest::Approx(0.0));
  CHECK(cosine_similarity(Vector{1.0, 1.0}, Vector{-1.0, -1.0}) == doctest::Approx(-1.0));
  CHECK(cosine(Vector{0.0, 0.0}, Vector{1.0, 1.0}).degenerate);
  // Scale invariance down to tiny magnitudes.
  CHECK(cosine_similarity(Vector{1e-200, 2e-200}, Vector{3e-200, 4e-200}) ==
        doctest::Approx(11.0 / (std::sqrt(5.0) * 5.0)));
  CHECK_THROWS_AS((cosine(Vector{1.0}, Vector{1.0, 2.0})), ShapeError);
}

TEST_CASE("lambda weights") {
  CHECK_THROWS_AS(EnergyWeights::lambda(-0.1), Error);
  CHECK_THROWS_AS(EnergyWeights::lambda(1.1), Error);
  EnergyReport r;
  r.output_loss = 2.0;
  r.residual = 4.0;
  CHECK(lambda_energy(r, 0.25) == doctest::Approx(0.5 + 3.0));
}

TEST_CASE("marginal residual is zero exactly at a stationary point") {
  // Scalar linear chain with both ends clamped: x1* = (w1 x0 + w2 x2)/(1 + w2²).
  const Network net({Matrix{{0.7}}, Matrix{{1.3}}}, {ActivationKind::Linear, ActivationKind::Linear});
  const double x0 = 0.4, x2 = -1.1;
  const double star = (0.7 * x0 + 1.3 * x2) / (1 + 1.3 * 1.3);
  CHECK(marginal_condition_residual(net, make_state(net, {Vector{x0}, Vector{star}, Vector{x2}}, true, true)) < 1e-15);
  CHECK(marginal_condition_residual(net, make_state(net, {Vector{x0}, Vector{star + 0.1}, Vector{x2}}, true, true)) ==
        doctest::Approx(2 * 0.1 * (1 + 1.3 * 1.3)));
}

TEST_CASE("distance to reference") {
  const Network net({Matrix{{1.0}}}, {ActivationKind::Linear});
  const auto st = make_state(net, {Vector{3.0}, Vector{4.0}}, true, false);
  const std::vector<Vector> ref{Vector{0.0}, Vector{0.0}};
  const std::vector<std::size_t> both{0, 1}, top{1};
  CHECK(distance_to_reference(st, ref, both) == doctest::Approx(5.0));
  CHECK(distance_to_reference(st, ref, top) == doctest::Approx(4.0));
}
