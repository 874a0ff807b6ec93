#pragma once

// Inference phase: explicit-Euler descent of the activities on the free
// energy, with all free layers updated synchronously from the pre-step
// state. The step follows ẋ_l = -½ ∂F/∂x_l, i.e.
//   ẋ_l = -Π_l ε_l + W_{l+1}ᵀ (Π_{l+1} ε_{l+1} ⊙ f'(W_{l+1} x_l)),
// where the first term is absent for the input layer and the second for
// the output layer.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pcn/metrics.hpp"
#include "pcn/state.hpp"

namespace pcn {

class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t step, const std::string& what)
      : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

struct InitMode {
  enum class Kind { FeedforwardPass, Random, Zero };
  Kind kind = Kind::FeedforwardPass;
  double std = 1.0;
  std::uint64_t seed = 0;

  static InitMode feedforward() { return {}; }
  static InitMode random(double std, std::uint64_t seed) { return {Kind::Random, std, seed}; }
  static InitMode zero() { return {Kind::Zero, 0.0, 0}; }
};

struct InferenceSettings {
  double step_size = 0.05;
  std::size_t max_steps = 100;
  double convergence_tol = 1e-8;  // on the sup-norm of ẋ over free layers
  InitMode init;
  // When set, inference descends λL + (1-λ)Ẽ instead of F.
  std::optional<double> lambda;
  bool record_activities = false;
  bool record_trace = true;

  void validate() const;
};

// A named scalar evaluated on the state after every recorded step.
struct Probe {
  std::string name;
  std::function<double(const Network&, const ActivityState&)> fn;
};

struct TraceRow {
  std::size_t step = 0;
  EnergyReport energy;
  std::vector<double> probes;
  std::vector<Vector> activities;  // empty unless record_activities
};

struct InferenceTrace {
  std::vector<std::string> probe_names;
  std::vector<TraceRow> rows;
};

struct InferenceResult {
  ActivityState state;
  InferenceTrace trace;
  bool converged = false;
  std::size_t steps = 0;  // Euler steps applied
};

ActivityState init_activities(const Network& net, const ClampMode& mode, const InitMode& init);

// ẋ for every layer (zero on clamped layers).
std::vector<Vector> activity_velocity(const Network& net, const ActivityState& state,
                                      const EnergyWeights& weights, bool use_precisions);

// One identity-precision Euler step. Clamped layers are left untouched.
ActivityState activity_step(const Network& net, const ActivityState& state, double step_size);

// One precision-weighted Euler step; equals activity_step when all Π = I.
ActivityState precision_activity_step(const Network& net, const ActivityState& state,
                                      double step_size);

// Iterates until sup‖ẋ‖ < convergence_tol or max_steps. Uses precision
// weighting when the network carries non-identity precisions. Throws
// DivergenceError when an activity becomes non-finite.
InferenceResult run_inference(const Network& net, const ClampMode& mode,
                              const InferenceSettings& settings,
                              const std::vector<Probe>& probes = {});

// Same loop from an explicit starting state.
InferenceResult run_inference_from(const Network& net, ActivityState state,
                                   const InferenceSettings& settings,
                                   const std::vector<Probe>& probes = {});

// CSV: step,F,L,E_tilde,<probe names...>
void write_trace_csv(const InferenceTrace& trace, std::ostream& out);

}  // namespace pcn
