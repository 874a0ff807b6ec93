#include "pcn/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace pcn {

EnergyWeights EnergyWeights::lambda(double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw Error("lambda must lie in [0, 1], got " + std::to_string(lambda));
  }
  return EnergyWeights{lambda, 1.0 - lambda};
}

namespace {

Vector weighted_error(const Network& net, const ActivityState& state, std::size_t l,
                      bool use_precisions) {
  if (use_precisions && !net.identity_precisions()) return net.precision(l) * state.errors[l];
  return state.errors[l];
}

}  // namespace

double layer_energy(const Network& net, const ActivityState& state, std::size_t l) {
  const Vector& e = state.errors.at(l);
  if (net.identity_precisions()) return dot(e, e);
  return dot(e, net.precision(l) * e);
}

EnergyReport energy_report(const Network& net, const ActivityState& state) {
  EnergyReport r;
  const std::size_t depth = net.depth();
  r.per_layer.reserve(depth);
  for (std::size_t l = 1; l <= depth; ++l) r.per_layer.push_back(layer_energy(net, state, l));
  for (std::size_t l = 0; l + 1 < depth; ++l) r.residual += r.per_layer[l];
  r.output_loss = r.per_layer.back();
  r.total = r.output_loss + r.residual;
  return r;
}

double lambda_energy(const EnergyReport& report, double lambda) {
  const auto w = EnergyWeights::lambda(lambda);
  return w.loss * report.output_loss + w.residual * report.residual;
}

std::vector<Vector> half_energy_gradient(const Network& net, const ActivityState& state,
                                         const EnergyWeights& weights, bool use_precisions,
                                         bool free_only) {
  const std::size_t depth = net.depth();
  auto coeff = [&](std::size_t l) { return l == depth ? weights.loss : weights.residual; };

  // Feedback term W_{l+1}ᵀ(c Π ε_{l+1} ⊙ f'), computed once per layer above.
  std::vector<Vector> grads(depth + 1);
  for (std::size_t l = 0; l <= depth; ++l) grads[l] = Vector(net.width(l));
  for (std::size_t l = 1; l <= depth; ++l) {
    const double c = coeff(l);
    if (c == 0.0) continue;
    Vector pe = weighted_error(net, state, l, use_precisions);
    if (!free_only || state.is_free(l))
      for (std::size_t i = 0; i < pe.size(); ++i) grads[l][i] += c * pe[i];
    if (free_only && !state.is_free(l - 1)) continue;
    Vector back = hadamard(pe, activation_derivative(net.activation(l), state.preacts[l]));
    back *= c;
    grads[l - 1] -= transpose_times(net.weight(l), back);
  }
  return grads;
}

namespace {
std::vector<Vector> doubled(std::vector<Vector> g) {
  for (auto& v : g) v *= 2.0;
  return g;
}
}  // namespace

std::vector<Vector> free_energy_gradient(const Network& net, const ActivityState& state) {
  return doubled(half_energy_gradient(net, state, EnergyWeights::standard(), true));
}

std::vector<Vector> loss_gradient(const Network& net, const ActivityState& state) {
  return doubled(half_energy_gradient(net, state, EnergyWeights{1.0, 0.0}, true));
}

std::vector<Vector> residual_gradient(const Network& net, const ActivityState& state) {
  return doubled(half_energy_gradient(net, state, EnergyWeights{0.0, 1.0}, true));
}

Cosine cosine(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw ShapeError("cosine: length mismatch");
  const double sa = norm_inf(a);
  const double sb = norm_inf(b);
  if (!(sa > 0.0) || !(sb > 0.0)) return {0.0, true};
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a[i] / sa;
    const double y = b[i] / sb;
    ab += x * y;
    aa += x * x;
    bb += y * y;
  }
  return {std::clamp(ab / std::sqrt(aa * bb), -1.0, 1.0), false};
}

double cosine_similarity(const Vector& a, const Vector& b) { return cosine(a, b).value; }

double marginal_condition_residual(const Network& net, const ActivityState& state) {
  const auto gl = loss_gradient(net, state);
  const auto ge = residual_gradient(net, state);
  double worst = 0.0;
  for (std::size_t l : state.free_layers()) worst = std::max(worst, norm_inf(gl[l] + ge[l]));
  return worst;
}

double distance_to_reference(const ActivityState& state, std::span<const Vector> reference,
                             std::span<const std::size_t> layers) {
  if (reference.size() != state.x.size()) throw ShapeError("distance_to_reference: layer count mismatch");
  double acc = 0.0;
  for (std::size_t l : layers) {
    if (l >= state.x.size() || reference[l].size() != state.x[l].size()) {
      throw ShapeError("distance_to_reference: shape mismatch at layer " + std::to_string(l));
    }
    for (std::size_t i = 0; i < state.x[l].size(); ++i) {
      const double d = state.x[l][i] - reference[l][i];
      acc += d * d;
    }
  }
  return std::sqrt(acc);
}

}  // namespace pcn
