#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pcn/baselines.hpp"
#include "test_util.hpp"

using namespace pcn;
using namespace testutil;

namespace {

// ‖T - x_L‖² through a plain forward pass, as a function of the weights.
double loss_of(const Network& net, const Vector& x0, const Vector& t) {
  std::vector<Vector> x{x0};
  for (std::size_t l = 1; l <= net.depth(); ++l) {
    const Matrix& w = net.weight(l);
    Vector y(w.rows());
    for (std::size_t i = 0; i < w.rows(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < w.cols(); ++j) s += w(i, j) * x.back()[j];
      y[i] = act(net.activation(l), s);
    }
    x.push_back(y);
  }
  double e = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) e += (t[i] - x.back()[i]) * (t[i] - x.back()[i]);
  return e;
}

}  // namespace

TEST_CASE("backprop weight gradients and adjoints match finite differences") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 6; ++trial) {
    const Network net = random_net({3, 4, 3, 2}, trial % 2 ? ActivationKind::Tanh : ActivationKind::ReLU, rng, 0.8);
    const Vector x0 = randn(3, rng), t = randn(2, rng);
    const auto bp = backprop(net, x0, t);
    CHECK(bp.loss == doctest::Approx(loss_of(net, x0, t)).epsilon(1e-13));
    for (std::size_t l = 1; l <= 3; ++l) {
      for (std::size_t r = 0; r < net.weight(l).rows(); ++r) {
        for (std::size_t c = 0; c < net.weight(l).cols(); ++c) {
          const double want = fd_weight([&](const Network& n) { return loss_of(n, x0, t); }, net, l, r, c);
          CHECK(bp.weight_grads[l - 1](r, c) == doctest::Approx(want).epsilon(1e-6));
        }
      }
    }
    // δ_0 is the input gradient
    for (std::size_t i = 0; i < 3; ++i) {
      const double want = fd([&](const std::vector<Vector>& xx) { return loss_of(net, xx[0], t); },
                             std::vector<Vector>{x0}, 0, i);
      CHECK(bp.adjoints.deltas[0][i] == doctest::Approx(want).epsilon(1e-6));
    }
    CHECK(norm_inf(bp.adjoints.deltas[3] + 2.0 * (t - bp.activities[3])) < 1e-15);
  }
}

TEST_CASE("factor forms agree with the dense gradients") {
  std::mt19937_64 rng(2);
  const Network net = random_net({3, 4, 2}, ActivationKind::Tanh, rng);
  const Vector x0 = randn(3, rng), t = randn(2, rng);
  const auto bp = backprop(net, x0, t);
  double loss = 0.0;
  const auto f = backprop_gradient_factors(net, x0, t, &loss);
  CHECK(loss == bp.loss);
  const std::vector<GradientFactors> one{f};
  const auto g = average_gradients(net, one);
  for (std::size_t l = 0; l < 2; ++l) CHECK(max_abs_diff(g[l], bp.weight_grads[l]) < 1e-15);
  // x_L is not read by the sweep variant
  auto xs = bp.activities;
  xs.back() = Vector(2, 1e6);
  const std::vector<GradientFactors> two{backprop_factors_at(net, xs, t)};
  const auto g2 = average_gradients(net, two);
  for (std::size_t l = 0; l < 2; ++l) CHECK(g2[l] == g[l]);
  const auto ga = weight_gradient_at(net, bp.activities, t);
  for (std::size_t l = 0; l < 2; ++l) CHECK(max_abs_diff(ga[l], bp.weight_grads[l]) < 1e-15);
  CHECK_THROWS_AS((adjoints_at(net, {x0}, t)), ShapeError);
}

TEST_CASE("target propagation inverts the layers") {
  std::mt19937_64 rng(3);
  // Square, well-conditioned weights: t_l maps forward exactly onto t_{l+1}.
  Network net({Matrix::identity(3) + 0.2 * randn(3, 3, rng), Matrix::identity(3) + 0.2 * randn(3, 3, rng)},
              {ActivationKind::Tanh, ActivationKind::Linear});
  const Vector t{0.3, -0.2, 0.1};
  const auto tp = targetprop_targets(net, t);
  REQUIRE(tp.targets.size() == 3);
  CHECK(tp.targets[2] == t);
  CHECK(norm_inf(net.weight(2) * tp.targets[1] - t) < 1e-12);
  CHECK(norm_inf(activation_apply(ActivationKind::Tanh, net.weight(1) * tp.targets[0]) - tp.targets[1]) < 1e-12);
  const auto only_top = targetprop_targets(net, t, 1e-12, 1);
  CHECK(only_top.targets[0].empty());
  CHECK(norm_inf(only_top.targets[1] - tp.targets[1]) == 0.0);

  // Wide-to-narrow: pseudoinverse gives the minimum-norm preimage.
  const Network wide({Matrix{{1.0, 1.0}}}, {ActivationKind::Linear});
  const auto w = targetprop_targets(wide, Vector{2.0});
  CHECK(w.targets[0][0] == doctest::Approx(1.0));
  CHECK(w.targets[0][1] == doctest::Approx(1.0));

  const Network relu({Matrix::identity(2), Matrix::identity(2)}, {ActivationKind::ReLU, ActivationKind::Linear});
  CHECK_THROWS_AS((targetprop_targets(relu, Vector{1.0, 1.0})), NonInvertibleActivationError);
}

TEST_CASE("bp_train follows plain gradient descent") {
  std::mt19937_64 rng(4);
  Network net = random_net({2, 3, 2}, ActivationKind::Tanh, rng);
  const Dataset d = synthetic_gaussian(4, 2, 2, 9);
  Network want = net;
  std::vector<Matrix> mean;
  for (std::size_t i = 0; i < 4; ++i) {
    const auto g = backprop(want, d.inputs[i], d.targets[i]).weight_grads;
    if (mean.empty()) {
      mean = g;
      for (auto& m : mean) m *= 0.25;
    } else {
      for (std::size_t l = 0; l < 2; ++l) mean[l] += 0.25 * g[l];
    }
  }
  for (std::size_t l = 1; l <= 2; ++l) want.set_weight(l, want.weight(l) - 0.05 * mean[l - 1]);
  TrainSettings s;
  s.weight_lr = 0.05;
  const auto out = bp_train(net, d, s);
  for (std::size_t l = 1; l <= 2; ++l) CHECK(max_abs_diff(net.weight(l), want.weight(l)) < 1e-14);
  CHECK(out.records.front().cos_sim == std::vector<double>{1.0, 1.0});
}
