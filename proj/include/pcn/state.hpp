#pragma once

#include <optional>
#include <vector>

#include "pcn/network.hpp"

namespace pcn {

// Which ends of the network are held fixed, and to what.
// An unclamped end may still carry a vector: `data` seeds the
// feedforward initialization even when the input is free.
struct ClampMode {
  bool input_clamped = true;
  bool output_clamped = false;
  std::optional<Vector> data;
  std::optional<Vector> target;

  static ClampMode supervised(Vector data, Vector target);
  static ClampMode input_only(Vector data);
  // Input free (seeded from `init_data` when given), output clamped.
  static ClampMode output_only(Vector target, std::optional<Vector> init_data = std::nullopt);

  void validate(const Network& net) const;
};

// Activities x_0..x_L with their prediction errors. errors[l] and
// preacts[l] hold ε_l = x_l - f(W_l x_{l-1}) and W_l x_{l-1} for l >= 1;
// index 0 is empty since nothing predicts the input layer.
struct ActivityState {
  std::vector<Vector> x;
  std::vector<Vector> errors;
  std::vector<Vector> preacts;
  bool input_clamped = true;
  bool output_clamped = false;

  std::size_t depth() const { return x.empty() ? 0 : x.size() - 1; }
  bool is_free(std::size_t l) const {
    if (l == 0) return !input_clamped;
    if (l == depth()) return !output_clamped;
    return true;
  }
  std::vector<std::size_t> free_layers() const;
};

// Fresh ε_l for the given activities; result[0] is empty.
std::vector<Vector> compute_errors(const Network& net, const ActivityState& state);

// Recomputes preacts and errors in place.
void refresh_errors(const Network& net, ActivityState& state);

// Builds a state from explicit activities (errors computed).
ActivityState make_state(const Network& net, std::vector<Vector> activities, bool input_clamped,
                         bool output_clamped);

}  // namespace pcn
