#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "pcn/analytic.hpp"
#include "pcn/inference.hpp"
#include "test_util.hpp"

using namespace pcn;
using namespace testutil;

TEST_CASE("one Euler step descends half the finite-difference gradient") {
  std::mt19937_64 rng(1);
  for (auto hidden : {ActivationKind::Linear, ActivationKind::Tanh}) {
    const Network net = random_net({3, 4, 5, 2}, hidden, rng);
    for (bool in_clamped : {true, false}) {
      for (bool out_clamped : {true, false}) {
        const auto x = random_activities(net, rng);
        const auto st = make_state(net, x, in_clamped, out_clamped);
        const double h = 0.01;
        const auto next = activity_step(net, st, h);
        for (std::size_t l = 0; l <= net.depth(); ++l) {
          for (std::size_t i = 0; i < x[l].size(); ++i) {
            const double g = fd([&](const auto& xx) { return total_energy(net, xx); }, x, l, i);
            const double want = st.is_free(l) ? x[l][i] - 0.5 * h * g : x[l][i];
            CHECK(next.x[l][i] == doctest::Approx(want).epsilon(1e-8));
          }
        }
        // errors refreshed
        const auto fresh = compute_errors(net, next);
        for (std::size_t l = 1; l <= net.depth(); ++l) CHECK(norm_inf(next.errors[l] - fresh[l]) < 1e-15);
      }
    }
  }
}

TEST_CASE("hand-computed step on a scalar chain") {
  // x0 -> x1 -> x2, all weights 2, linear; clamp both ends.
  const Network net({Matrix{{2.0}}, Matrix{{2.0}}}, {ActivationKind::Linear, ActivationKind::Linear});
  const auto st = make_state(net, {Vector{1.0}, Vector{0.5}, Vector{3.0}}, true, true);
  // ε1 = 0.5 - 2 = -1.5, ε2 = 3 - 1 = 2; ẋ1 = -ε1 + 2 ε2 = 5.5
  const auto next = activity_step(net, st, 0.1);
  CHECK(next.x[1][0] == doctest::Approx(0.5 + 0.55));
  CHECK(next.x[0][0] == 1.0);
  CHECK(next.x[2][0] == 3.0);
}

TEST_CASE("precision step equals the plain step when all precisions are identity") {
  std::mt19937_64 rng(2);
  const Network net = random_net({3, 4, 2}, ActivationKind::Tanh, rng);
  const auto st = make_state(net, random_activities(net, rng), true, true);
  const auto a = activity_step(net, st, 0.05), b = precision_activity_step(net, st, 0.05);
  CHECK(a.x == b.x);
}

TEST_CASE("precision-weighted step descends half the weighted energy gradient") {
  std::mt19937_64 rng(3);
  Network net = random_net({2, 3, 2}, ActivationKind::Tanh, rng);
  net.set_precision(1, Matrix{{2.0, 0.2, 0.0}, {0.2, 1.0, 0.1}, {0.0, 0.1, 0.5}});
  net.set_precision(2, Matrix{{0.3, 0.05}, {0.05, 3.0}});
  const auto x = random_activities(net, rng);
  const auto st = make_state(net, x, true, true);
  const auto next = precision_activity_step(net, st, 0.02);
  for (std::size_t i = 0; i < 3; ++i) {
    const double g = fd([&](const auto& xx) { return total_energy(net, xx); }, x, 1, i);
    CHECK(next.x[1][i] == doctest::Approx(x[1][i] - 0.01 * g).epsilon(1e-8));
  }
}

TEST_CASE("linear inference converges to the closed-form equilibrium") {
  std::mt19937_64 rng(4);
  const Network net = random_net({3, 4, 4, 2}, ActivationKind::Linear, rng, 0.4);
  const Vector data = randn(3, rng), target = randn(2, rng);
  InferenceSettings s;
  s.step_size = 0.1;
  s.max_steps = 20000;
  s.convergence_tol = 1e-12;
  const auto res = run_inference(net, ClampMode::supervised(data, target), s);
  CHECK(res.converged);
  const auto sol = solve_linear_network_equilibrium(net, data, target);
  CHECK(sup_diff(res.state.x, sol.activities) < 1e-10);
  CHECK(res.state.x[0] == data);
  CHECK(res.state.x[3] == target);
  CHECK(res.trace.rows.size() == res.steps + 1);
  CHECK(res.trace.rows.front().step == 0);
}

TEST_CASE("output-unclamped inference from the feedforward pass stays put") {
  std::mt19937_64 rng(5);
  const Network net = random_net({3, 4, 2}, ActivationKind::Tanh, rng);
  InferenceSettings s;
  const auto res = run_inference(net, ClampMode::input_only(randn(3, rng)), s);
  CHECK(res.converged);
  CHECK(res.steps == 0);
  CHECK(res.trace.rows[0].energy.total == 0.0);
}

TEST_CASE("init modes") {
  std::mt19937_64 rng(6);
  const Network net = random_net({3, 4, 2}, ActivationKind::Tanh, rng);
  const Vector d = randn(3, rng), t = randn(2, rng);
  const auto ff = init_activities(net, ClampMode::supervised(d, t), InitMode::feedforward());
  CHECK(ff.x[1] == forward_pass(net, d)[1]);
  CHECK(ff.x[2] == t);
  const auto r1 = init_activities(net, ClampMode::output_only(t), InitMode::random(1.0, 9));
  const auto r2 = init_activities(net, ClampMode::output_only(t), InitMode::random(1.0, 9));
  CHECK(r1.x == r2.x);
  CHECK_FALSE(r1.input_clamped);
  const auto z = init_activities(net, ClampMode::supervised(d, t), InitMode::zero());
  CHECK(z.x[1] == Vector(4));
  CHECK_THROWS_AS(init_activities(net, ClampMode::output_only(t), InitMode::feedforward()), Error);
}

TEST_CASE("divergence is reported") {
  const Network net({Matrix{{10.0}}, Matrix{{10.0}}}, {ActivationKind::Linear, ActivationKind::Linear});
  InferenceSettings s;
  s.step_size = 5.0;
  s.max_steps = 10000;
  CHECK_THROWS_AS((run_inference(net, ClampMode::supervised(Vector{1.0}, Vector{1.0}), s)), DivergenceError);
}

TEST_CASE("settings validation") {
  InferenceSettings s;
  s.step_size = 0.0;
  CHECK_THROWS_AS(s.validate(), Error);
  s = {};
  s.max_steps = 0;
  CHECK_THROWS_AS(s.validate(), Error);
  s = {};
  s.lambda = 1.5;
  CHECK_THROWS_AS(s.validate(), Error);
}

TEST_CASE("lambda-weighted inference descends lambda L + (1 - lambda) E~") {
  std::mt19937_64 rng(7);
  const Network net = random_net({2, 3, 3, 2}, ActivationKind::Tanh, rng);
  const auto x = random_activities(net, rng);
  const double lam = 0.3;
  auto f_lam = [&](const std::vector<Vector>& xx) {
    const auto e = layer_energies(net, xx);
    return lam * e.back() + (1 - lam) * (e[0] + e[1]);
  };
  const auto st = make_state(net, x, true, true);
  const auto v = activity_velocity(net, st, EnergyWeights::lambda(lam), false);
  for (std::size_t l = 1; l <= 2; ++l)
    for (std::size_t i = 0; i < 3; ++i) CHECK(v[l][i] == doctest::Approx(-0.5 * fd(f_lam, x, l, i)).epsilon(1e-7));
}

TEST_CASE("trace CSV layout") {
  std::mt19937_64 rng(8);
  const Network net = random_net({2, 2, 2}, ActivationKind::Linear, rng);
  InferenceSettings s;
  s.max_steps = 3;
  s.convergence_tol = 0.0;
  Probe p{"one", [](const Network&, const ActivityState&) { return 1.0; }};
  const auto res = run_inference(net, ClampMode::supervised(randn(2, rng), randn(2, rng)), s, {p});
  std::ostringstream os;
  write_trace_csv(res.trace, os);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "step,F,L,E_tilde,one");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == 4);
}
