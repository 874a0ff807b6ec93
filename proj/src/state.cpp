#include "pcn/state.hpp"

namespace pcn {

ClampMode ClampMode::supervised(Vector data, Vector target) {
  return ClampMode{true, true, std::move(data), std::move(target)};
}

ClampMode ClampMode::input_only(Vector data) {
  return ClampMode{true, false, std::move(data), std::nullopt};
}

ClampMode ClampMode::output_only(Vector target, std::optional<Vector> init_data) {
  return ClampMode{false, true, std::move(init_data), std::move(target)};
}

void ClampMode::validate(const Network& net) const {
  if (input_clamped && !data) throw Error("ClampMode: input clamped but no data vector");
  if (output_clamped && !target) throw Error("ClampMode: output clamped but no target vector");
  if (data && data->size() != net.width(0)) {
    throw ShapeError("ClampMode: data length " + std::to_string(data->size()) + ", input width " +
                     std::to_string(net.width(0)));
  }
  if (target && target->size() != net.width(net.depth())) {
    throw ShapeError("ClampMode: target length " + std::to_string(target->size()) +
                     ", output width " + std::to_string(net.width(net.depth())));
  }
}

std::vector<std::size_t> ActivityState::free_layers() const {
  std::vector<std::size_t> out;
  for (std::size_t l = 0; l <= depth(); ++l)
    if (is_free(l)) out.push_back(l);
  return out;
}

std::vector<Vector> compute_errors(const Network& net, const ActivityState& state) {
  std::vector<Vector> eps(net.depth() + 1);
  for (std::size_t l = 1; l <= net.depth(); ++l) {
    eps[l] = state.x[l] - activation_apply(net.activation(l), net.weight(l) * state.x[l - 1]);
  }
  return eps;
}

void refresh_errors(const Network& net, ActivityState& state) {
  const std::size_t depth = net.depth();
  if (state.x.size() != depth + 1) throw ShapeError("refresh_errors: state depth mismatch");
  state.preacts.resize(depth + 1);
  state.errors.resize(depth + 1);
  state.preacts[0] = Vector();
  state.errors[0] = Vector();
  for (std::size_t l = 1; l <= depth; ++l) {
    state.preacts[l] = net.weight(l) * state.x[l - 1];
    state.errors[l] = state.x[l] - activation_apply(net.activation(l), state.preacts[l]);
  }
}

ActivityState make_state(const Network& net, std::vector<Vector> activities, bool input_clamped,
                         bool output_clamped) {
  if (activities.size() != net.depth() + 1) throw ShapeError("make_state: wrong number of layers");
  for (std::size_t l = 0; l <= net.depth(); ++l) {
    if (activities[l].size() != net.width(l)) {
      throw ShapeError("make_state: layer " + std::to_string(l) + " has length " +
                       std::to_string(activities[l].size()) + ", expected " +
                       std::to_string(net.width(l)));
    }
  }
  ActivityState s;
  s.x = std::move(activities);
  s.input_clamped = input_clamped;
  s.output_clamped = output_clamped;
  refresh_errors(net, s);
  return s;
}

}  // namespace pcn
