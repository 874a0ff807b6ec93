#include "pcn/baselines.hpp"

namespace pcn {

namespace {

// Backward sweep. δ_0 is only formed when `with_input` is set; the weight
// gradients never need it and W_1 is usually the widest matrix.
struct Sweep {
  std::vector<Vector> deltas;
  std::vector<Vector> u;  // δ_l ⊙ f'(W_l x_{l-1}), l = 1..L at index l
};

Sweep backward_sweep(const Network& net, const std::vector<Vector>& xs, const Vector& target,
                     bool with_input) {
  const std::size_t depth = net.depth();
  if (xs.size() != depth + 1) throw ShapeError("adjoints_at: need activities x_0..x_L");
  if (target.size() != net.width(depth)) throw ShapeError("adjoints_at: target length mismatch");
  Sweep s;
  s.deltas.resize(depth + 1);
  s.u.resize(depth + 1);
  Vector pre = net.weight(depth) * xs[depth - 1];
  s.deltas[depth] = -2.0 * (target - activation_apply(net.activation(depth), pre));
  for (std::size_t l = depth; l >= 1; --l) {
    s.u[l] = hadamard(s.deltas[l], activation_derivative(net.activation(l), pre));
    if (l == 1 && !with_input) break;
    s.deltas[l - 1] = transpose_times(net.weight(l), s.u[l]);
    if (l > 1) pre = net.weight(l - 1) * xs[l - 2];
  }
  return s;
}

GradientFactors factors_of(Sweep&& sw, const std::vector<Vector>& xs) {
  GradientFactors f;
  for (std::size_t l = 1; l < sw.u.size(); ++l) {
    f.u.push_back(std::move(sw.u[l]));
    f.x_below.push_back(xs[l - 1]);
  }
  return f;
}

}  // namespace

std::vector<Vector> adjoints_at(const Network& net, const std::vector<Vector>& activities,
                                const Vector& target) {
  return backward_sweep(net, activities, target, true).deltas;
}

GradientFactors backprop_factors_at(const Network& net, const std::vector<Vector>& activities,
                                    const Vector& target) {
  return factors_of(backward_sweep(net, activities, target, false), activities);
}

GradientFactors backprop_gradient_factors(const Network& net, const Vector& input,
                                          const Vector& target, double* loss) {
  const auto xs = forward_pass(net, input);
  if (loss) *loss = mse_loss(xs.back(), target);
  return backprop_factors_at(net, xs, target);
}

std::vector<Matrix> weight_gradient_at(const Network& net, const std::vector<Vector>& activities,
                                       const Vector& target) {
  const GradientFactors f = backprop_factors_at(net, activities, target);
  return average_gradients(net, std::span<const GradientFactors>(&f, 1));
}

BackpropResult backprop(const Network& net, const Vector& input, const Vector& target) {
  BackpropResult r;
  r.activities = forward_pass(net, input);
  r.loss = mse_loss(r.activities.back(), target);
  Sweep sw = backward_sweep(net, r.activities, target, true);
  r.adjoints.deltas = sw.deltas;
  const GradientFactors f = factors_of(std::move(sw), r.activities);
  r.weight_grads = average_gradients(net, std::span<const GradientFactors>(&f, 1));
  return r;
}

TPTargets targetprop_targets(const Network& net, const Vector& target, double pinv_tol,
                             std::size_t lowest) {
  const std::size_t depth = net.depth();
  if (lowest >= depth) throw Error("targetprop_targets: lowest layer must be below the output");
  for (std::size_t l = lowest + 1; l <= depth; ++l) {
    if (!is_invertible(net.activation(l))) {
      throw NonInvertibleActivationError("targetprop_targets: layer " + std::to_string(l) + " uses " +
                                         std::string(to_string(net.activation(l))));
    }
  }
  if (target.size() != net.width(depth)) throw ShapeError("targetprop_targets: target length mismatch");
  TPTargets t;
  t.targets.resize(depth + 1);
  t.targets[depth] = target;
  for (std::size_t l = depth; l > lowest; --l) {
    t.targets[l - 1] =
        pseudoinverse(net.weight(l), pinv_tol) * activation_inverse(net.activation(l), t.targets[l]);
  }
  return t;
}

TrainOutcome bp_train(Network& net, const Dataset& train_set, const TrainSettings& settings,
                      const Dataset* eval_set) {
  return train_with_rule(net, train_set, settings, GradientRule::Backprop, eval_set);
}

}  // namespace pcn
