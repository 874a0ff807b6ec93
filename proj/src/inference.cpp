#include "pcn/inference.hpp"

#include <cmath>
#include <ostream>
#include <random>

#include "pcn/csv.hpp"

namespace pcn {

void InferenceSettings::validate() const {
  if (!(step_size > 0.0)) throw Error("InferenceSettings: step_size must be > 0");
  if (max_steps < 1) throw Error("InferenceSettings: max_steps must be >= 1");
  if (!(convergence_tol >= 0.0)) throw Error("InferenceSettings: convergence_tol must be >= 0");
  if (lambda) EnergyWeights::lambda(*lambda);
}

ActivityState init_activities(const Network& net, const ClampMode& mode, const InitMode& init) {
  mode.validate(net);
  const std::size_t depth = net.depth();
  std::vector<Vector> xs;
  switch (init.kind) {
    case InitMode::Kind::FeedforwardPass:
      if (!mode.data) throw Error("init_activities: feedforward init needs a data vector");
      xs = forward_pass(net, *mode.data);
      break;
    case InitMode::Kind::Random: {
      std::mt19937_64 rng(init.seed);
      std::normal_distribution<double> normal(0.0, init.std);
      for (std::size_t l = 0; l <= depth; ++l) {
        Vector v(net.width(l));
        for (double& e : v) e = normal(rng);
        xs.push_back(std::move(v));
      }
      break;
    }
    case InitMode::Kind::Zero:
      for (std::size_t l = 0; l <= depth; ++l) xs.emplace_back(net.width(l));
      break;
  }
  if (mode.input_clamped) xs[0] = *mode.data;
  if (mode.output_clamped) xs[depth] = *mode.target;
  return make_state(net, std::move(xs), mode.input_clamped, mode.output_clamped);
}

std::vector<Vector> activity_velocity(const Network& net, const ActivityState& state,
                                      const EnergyWeights& weights, bool use_precisions) {
  auto v = half_energy_gradient(net, state, weights, use_precisions, true);
  for (std::size_t l = 0; l < v.size(); ++l)
    if (state.is_free(l)) v[l] *= -1.0;
  return v;
}

namespace {

void apply_step(const Network& net, ActivityState& state, const std::vector<Vector>& velocity,
                double step_size) {
  for (std::size_t l = 0; l < velocity.size(); ++l) {
    if (!state.is_free(l)) continue;
    for (std::size_t i = 0; i < velocity[l].size(); ++i) state.x[l][i] += step_size * velocity[l][i];
  }
  // Predictions from a clamped layer do not move; only refresh what can.
  for (std::size_t l = 1; l < state.x.size(); ++l) {
    if (state.is_free(l - 1)) state.preacts[l] = net.weight(l) * state.x[l - 1];
    if (state.is_free(l - 1) || state.is_free(l)) {
      state.errors[l] = state.x[l] - activation_apply(net.activation(l), state.preacts[l]);
    }
  }
}

double sup_norm(const ActivityState& state, const std::vector<Vector>& velocity) {
  double m = 0.0;
  for (std::size_t l : state.free_layers()) m = std::max(m, norm_inf(velocity[l]));
  return m;
}

bool state_finite(const ActivityState& state) {
  for (const auto& x : state.x)
    if (!all_finite(x.span())) return false;
  return true;
}

}  // namespace

ActivityState activity_step(const Network& net, const ActivityState& state, double step_size) {
  ActivityState next = state;
  apply_step(net, next, activity_velocity(net, state, EnergyWeights::standard(), false), step_size);
  return next;
}

ActivityState precision_activity_step(const Network& net, const ActivityState& state,
                                      double step_size) {
  ActivityState next = state;
  apply_step(net, next, activity_velocity(net, state, EnergyWeights::standard(), true), step_size);
  return next;
}

InferenceResult run_inference(const Network& net, const ClampMode& mode,
                              const InferenceSettings& settings, const std::vector<Probe>& probes) {
  settings.validate();
  return run_inference_from(net, init_activities(net, mode, settings.init), settings, probes);
}

InferenceResult run_inference_from(const Network& net, ActivityState state,
                                   const InferenceSettings& settings,
                                   const std::vector<Probe>& probes) {
  settings.validate();
  const EnergyWeights weights =
      settings.lambda ? EnergyWeights::lambda(*settings.lambda) : EnergyWeights::standard();
  const bool use_precisions = !net.identity_precisions();

  InferenceResult result;
  for (const auto& p : probes) result.trace.probe_names.push_back(p.name);

  auto record = [&](std::size_t step) {
    if (!settings.record_trace) return;
    TraceRow row;
    row.step = step;
    row.energy = energy_report(net, state);
    for (const auto& p : probes) row.probes.push_back(p.fn(net, state));
    if (settings.record_activities) row.activities = state.x;
    result.trace.rows.push_back(std::move(row));
  };

  for (std::size_t step = 0;; ++step) {
    record(step);
    const auto velocity = activity_velocity(net, state, weights, use_precisions);
    if (sup_norm(state, velocity) < settings.convergence_tol) {
      result.converged = true;
      break;
    }
    if (step == settings.max_steps) break;
    apply_step(net, state, velocity, settings.step_size);
    result.steps = step + 1;
    if (!state_finite(state)) throw DivergenceError(step + 1, "run_inference: non-finite activity");
  }
  result.state = std::move(state);
  return result;
}

void write_trace_csv(const InferenceTrace& trace, std::ostream& out) {
  CsvWriter csv(out);
  std::vector<std::string> header{"step", "F", "L", "E_tilde"};
  header.insert(header.end(), trace.probe_names.begin(), trace.probe_names.end());
  csv.header(header);
  for (const auto& row : trace.rows) {
    csv.field(row.step).field(row.energy.total).field(row.energy.output_loss).field(row.energy.residual);
    for (double p : row.probes) csv.field(p);
    csv.end_row();
  }
}

}  // namespace pcn
