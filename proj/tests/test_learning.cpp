#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "pcn/baselines.hpp"
#include "pcn/learning.hpp"
#include "test_util.hpp"

using namespace pcn;
using namespace testutil;

TEST_CASE("weight gradient matches finite differences of F") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 6; ++trial) {
    const auto hidden = trial % 2 ? ActivationKind::Tanh : ActivationKind::Linear;
    Network net = random_net({3, 4, 2}, hidden, rng);
    if (trial >= 4) net.set_precision(1, Matrix{{2, .1, 0, 0}, {.1, 1, 0, 0}, {0, 0, .5, 0}, {0, 0, 0, 1}});
    const auto x = random_activities(net, rng);
    const auto st = make_state(net, x, true, true);
    const auto g = weight_gradient(net, st);
    REQUIRE(g.size() == 2);
    for (std::size_t l = 1; l <= 2; ++l) {
      for (std::size_t r = 0; r < g[l - 1].rows(); ++r) {
        for (std::size_t c = 0; c < g[l - 1].cols(); ++c) {
          const double want = fd_weight([&](const Network& n) { return total_energy(n, x); }, net, l, r, c);
          CHECK(g[l - 1](r, c) == doctest::Approx(want).epsilon(1e-7));
        }
      }
    }
    // factor form reproduces the matrix
    const auto f = weight_gradient_factors(net, st);
    const std::vector<GradientFactors> one{f};
    const auto avg = average_gradients(net, one);
    for (std::size_t l = 0; l < 2; ++l) CHECK(max_abs_diff(avg[l], g[l]) < 1e-15);
  }
}

TEST_CASE("average_gradients is the sample mean") {
  const Network net({Matrix{{0.0, 0.0}}}, {ActivationKind::Linear});
  std::vector<GradientFactors> f(2);
  f[0].u = {Vector{1.0}};
  f[0].x_below = {Vector{2.0, 0.0}};
  f[1].u = {Vector{3.0}};
  f[1].x_below = {Vector{0.0, 4.0}};
  const auto g = average_gradients(net, f);
  CHECK(g[0](0, 0) == 1.0);
  CHECK(g[0](0, 1) == 6.0);
}

TEST_CASE("optimizer: plain, heavy-ball and Nesterov updates by hand") {
  const std::vector<Matrix> g{Matrix{{1.0}}};
  {
    Network net({Matrix{{0.0}}}, {ActivationKind::Linear});
    Optimizer o(0.1, 0.0, false);
    o.step(net, g);
    o.step(net, g);
    CHECK(net.weight(1)(0, 0) == doctest::Approx(-0.2));
  }
  {
    Network net({Matrix{{0.0}}}, {ActivationKind::Linear});
    Optimizer o(0.1, 0.5, false);
    o.step(net, g);  // v = 1, w = -0.1
    o.step(net, g);  // v = 1.5, w = -0.25
    CHECK(net.weight(1)(0, 0) == doctest::Approx(-0.25));
  }
  {
    Network net({Matrix{{0.0}}}, {ActivationKind::Linear});
    Optimizer o(0.1, 0.5, true);
    o.step(net, g);  // v = 1, w -= 0.1 (1 + 0.5) = -0.15
    o.step(net, g);  // v = 1.5, w -= 0.1 (1 + 0.75) = -0.325
    CHECK(net.weight(1)(0, 0) == doctest::Approx(-0.325));
  }
  Network net({Matrix{{0.0}}}, {ActivationKind::Linear});
  Optimizer o(0.1, 0.0, false);
  CHECK_THROWS_AS((o.step(net, {})), ShapeError);
}

TEST_CASE("bound check is the sign of dL/dt along the dynamics") {
  // dL/dt = Σ ∂Lᵀẋ = -½(‖∂L‖² + ∂Lᵀ∂Ẽ); L is non-increasing iff lhs <= rhs.
  std::mt19937_64 rng(2);
  int agree = 0, total = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const Network net = random_net({2, 3, 3, 2}, ActivationKind::Tanh, rng, 1.0);
    const auto st = make_state(net, random_activities(net, rng), true, true);
    const auto b = energy_gradient_bound_check(net, st);
    const double h = 1e-7;
    const auto a = activity_step(net, st, h), z = activity_step(net, st, -h);
    const double dldt = (layer_energies(net, a.x).back() - layer_energies(net, z.x).back()) / (2 * h);
    CHECK(dldt == doctest::Approx(-0.5 * (b.rhs - b.lhs)).epsilon(1e-5).scale(1.0));
    if (std::abs(dldt) > 1e-6) {
      ++total;
      agree += (dldt <= 0) == b.satisfied;
    }
  }
  CHECK(agree == total);
}

TEST_CASE("mse loss") {
  CHECK(mse_loss(Vector{1.0, 2.0}, Vector{0.0, 0.0}) == 5.0);
  CHECK_THROWS_AS((mse_loss(Vector{1.0}, Vector{1.0, 2.0})), ShapeError);
}

TEST_CASE("zero learning rate leaves weights unchanged") {
  std::mt19937_64 rng(3);
  Network net = random_net({3, 4, 2}, ActivationKind::Tanh, rng);
  const Network before = net;
  const Dataset d = synthetic_gaussian(8, 3, 2, 1);
  TrainSettings s;
  s.weight_lr = 0.0;
  s.epochs = 2;
  s.batch_size = 3;
  const auto out = train(net, d, s);
  CHECK(net == before);
  CHECK(out.records.size() == 2);
}

TEST_CASE("training is deterministic and lowers the loss") {
  std::mt19937_64 rng(4);
  const Network init = random_net({3, 5, 2}, ActivationKind::Tanh, rng, 0.3);
  const Dataset d = synthetic_gaussian(16, 3, 2, 2);
  TrainSettings s;
  s.weight_lr = 0.02;
  s.epochs = 30;
  s.batch_size = 4;
  s.shuffle = true;
  s.seed = 5;
  Network a = init, b = init;
  const auto oa = train(a, d, s), ob = train(b, d, s);
  CHECK(a == b);
  REQUIRE(oa.records.size() == 30);
  CHECK(oa.records.back().loss < oa.records.front().loss);
  CHECK(oa.records.back().loss == ob.records.back().loss);
  CHECK(oa.records.front().cos_sim.size() == 2);
  CHECK(dataset_loss(a, d) == oa.records.back().loss);
  CHECK(dataset_bp_grad_norm(a, d) == oa.records.back().bp_grad_norm);
}

TEST_CASE("one EM step equals the hand-built PC update") {
  std::mt19937_64 rng(6);
  Network net = random_net({2, 3, 2}, ActivationKind::Tanh, rng);
  const Dataset d = synthetic_gaussian(2, 2, 2, 3);
  TrainSettings s;
  s.weight_lr = 0.1;
  s.inference.max_steps = 7;
  s.inference.convergence_tol = 0.0;
  // Manual: inference per sample, then mean weight gradient.
  std::vector<Matrix> mean(2);
  for (std::size_t i = 0; i < 2; ++i) {
    auto st = run_inference(net, ClampMode::supervised(d.inputs[i], d.targets[i]), s.inference).state;
    const auto g = weight_gradient(net, st);
    for (std::size_t l = 0; l < 2; ++l) mean[l] = i ? mean[l] + 0.5 * g[l] : 0.5 * g[l];
  }
  Network want = net;
  for (std::size_t l = 1; l <= 2; ++l) want.set_weight(l, net.weight(l) - 0.1 * mean[l - 1]);
  Optimizer o(0.1, 0.0, false);
  const std::vector<std::size_t> idx{0, 1};
  const auto m = em_train_step(net, d, idx, s, o);
  for (std::size_t l = 1; l <= 2; ++l) CHECK(max_abs_diff(net.weight(l), want.weight(l)) < 1e-14);
  CHECK(m.cos_sim.size() == 2);
  CHECK(m.loss_after <= m.loss_before);
}

TEST_CASE("lambda weight gradient approaches backprop as lambda goes to zero") {
  std::mt19937_64 rng(7);
  const Network net = random_net({3, 4, 4, 2}, ActivationKind::Tanh, rng, 0.6);
  const Vector x0 = randn(3, rng), t = randn(2, rng);
  const auto bp = backprop(net, x0, t);
  // λ = 0: activities frozen at the feedforward pass, exact limit
  const auto st0 = make_state(net, forward_pass(net, x0), true, true);
  auto st_ff = st0;
  st_ff.x.back() = t;
  refresh_errors(net, st_ff);
  const auto g0 = lambda_weight_gradient(net, st_ff, 0.0);
  for (std::size_t l = 0; l < 3; ++l) CHECK(max_abs_diff(g0[l], bp.weight_grads[l]) < 1e-12);
  double prev = 1e9;
  for (double lam : {1e-1, 1e-2, 1e-3}) {
    InferenceSettings s;
    s.lambda = lam;
    s.step_size = 0.1;
    s.max_steps = 20000;
    s.convergence_tol = 1e-13;
    const auto r = run_inference(net, ClampMode::supervised(x0, t), s);
    const auto g = lambda_weight_gradient(net, r.state, lam);
    double err = 0.0;
    for (std::size_t l = 0; l < 3; ++l) err = std::max(err, max_abs_diff(g[l], bp.weight_grads[l]));
    CHECK(err < prev);
    prev = err;
  }
  CHECK(prev < 1e-2);
}

TEST_CASE("train CSV header") {
  TrainOutcome o;
  o.records.push_back({});
  o.records.back().cos_sim = {0.5, 0.25};
  std::ostringstream os;
  write_train_csv(o, 2, os);
  CHECK(os.str().substr(0, os.str().find('\n')) ==
        "epoch,loss,bp_grad_norm,pc_grad_norm,accuracy,delta_L_inference,cos_sim_layer_1,cos_sim_layer_2");
}

TEST_CASE("settings validation") {
  TrainSettings s;
  s.momentum = 1.0;
  CHECK_THROWS_AS(s.validate(), Error);
  s.momentum = 0.0;
  s.weight_lr = -1.0;
  CHECK_THROWS_AS(s.validate(), Error);
}
