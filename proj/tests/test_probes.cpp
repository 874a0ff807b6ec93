#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pcn/baselines.hpp"
#include "pcn/probes.hpp"
#include "test_util.hpp"

using namespace pcn;
using namespace testutil;

TEST_CASE("probes evaluate the documented quantities") {
  std::mt19937_64 rng(1);
  const Network net = random_net({3, 3, 3}, ActivationKind::Tanh, rng);
  const Vector x0 = randn(3, rng, 0.3), t = randn(3, rng, 0.3);
  const auto bp = backprop(net, x0, t);
  const auto tp = targetprop_targets(net, t, 1e-12, 1);
  ProbeContext ctx;
  ctx.bp_adjoints = bp.adjoints.deltas;
  ctx.tp_targets = tp.targets;
  ctx.feedforward = bp.activities;
  ctx.lambda = 0.25;
  const auto st = make_state(net, random_activities(net, rng), true, true);
  auto st2 = st;
  st2.x[0] = x0;
  st2.x[2] = t;
  refresh_errors(net, st2);

  CHECK(make_probe("cos_eps_bp_l1", ctx).fn(net, st2) ==
        doctest::Approx(cosine_similarity(st2.errors[1], -1.0 * bp.adjoints.deltas[1])));
  CHECK(make_probe("cos_x_tp_l1", ctx).fn(net, st2) == doctest::Approx(cosine_similarity(st2.x[1], tp.targets[1])));
  CHECK(make_probe("dist_tp_l1", ctx).fn(net, st2) == doctest::Approx(norm2(st2.x[1] - tp.targets[1])));
  CHECK(make_probe("dist_ff_l1", ctx).fn(net, st2) == doctest::Approx(norm2(st2.x[1] - bp.activities[1])));
  CHECK(make_probe("dist_ff", ctx).fn(net, st2) == doctest::Approx(norm2(st2.x[1] - bp.activities[1])));
  CHECK(make_probe("marginal_residual", ctx).fn(net, st2) == marginal_condition_residual(net, st2));
  const auto r = energy_report(net, st2);
  CHECK(make_probe("F_lambda", ctx).fn(net, st2) == doctest::Approx(0.25 * r.output_loss + 0.75 * r.residual));
  const auto b = energy_gradient_bound_check(net, st2);
  CHECK(make_probe("bound_lhs", ctx).fn(net, st2) == b.lhs);
  CHECK(make_probe("bound_rhs", ctx).fn(net, st2) == b.rhs);
  CHECK(make_probes({"bound_ok", "dist_tp"}, ctx).size() == 2);
}

TEST_CASE("probe errors") {
  ProbeContext empty;
  CHECK_THROWS_AS(make_probe("nonsense", empty), UnknownProbeError);
  CHECK_THROWS_AS(make_probe("dist_tp", empty), Error);
  CHECK_THROWS_AS(make_probe("cos_eps_bp_l1", empty), Error);
  CHECK_THROWS_AS(make_probe("F_lambda", empty), Error);
  ProbeContext ctx;
  ctx.bp_adjoints = std::vector<Vector>{Vector{1.0}, Vector{1.0}};
  CHECK_THROWS_AS(make_probe("cos_eps_bp_l0", ctx), Error);
  CHECK_THROWS_AS(make_probe("cos_eps_bp_l7", ctx), Error);
}

TEST_CASE("probes are recorded in the inference trace") {
  std::mt19937_64 rng(2);
  const Network net = random_net({2, 3, 2}, ActivationKind::Tanh, rng);
  const Vector x0 = randn(2, rng);
  ProbeContext ctx;
  ctx.feedforward = forward_pass(net, x0);
  InferenceSettings s;
  s.max_steps = 5;
  s.convergence_tol = 0.0;
  const auto res = run_inference(net, ClampMode::supervised(x0, randn(2, rng)), s,
                                 make_probes({"dist_ff", "bound_ok"}, ctx));
  CHECK(res.trace.probe_names == std::vector<std::string>{"dist_ff", "bound_ok"});
  CHECK(res.trace.rows[0].probes[0] == 0.0);
  CHECK(res.trace.rows[5].probes[0] > 0.0);
}
