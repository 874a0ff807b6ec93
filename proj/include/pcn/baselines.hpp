#pragma once

// Exact backpropagation and exact (pseudoinverse) target propagation on
// the same Network, used as oracles for the PC equilibrium.

#include <vector>

#include "pcn/learning.hpp"
#include "pcn/network.hpp"

namespace pcn {

// δ_l = ∂L/∂x_l for l = 0..L at the feedforward pass, with
// L = ‖T - x_L‖², so δ_L = -2 (T - x̄_L).
struct Adjoints {
  std::vector<Vector> deltas;
};

struct BackpropResult {
  std::vector<Vector> activities;     // x̄_0..x̄_L
  Adjoints adjoints;
  std::vector<Matrix> weight_grads;   // ∂L/∂W_l at index l-1
  double loss = 0.0;
};

BackpropResult backprop(const Network& net, const Vector& input, const Vector& target);

// Adjoint recursion δ_{l-1} = W_lᵀ(δ_l ⊙ f'(W_l x_{l-1})) evaluated at
// arbitrary activities, seeded with δ_L = -2 (target - x_L_pred) where
// x_L_pred = f(W_L x_{L-1}).
std::vector<Vector> adjoints_at(const Network& net, const std::vector<Vector>& activities,
                                const Vector& target);

// Per-layer factors of the BP weight gradient, u_l = δ_l ⊙ f'(W_l x̄_{l-1});
// optionally reports the loss at the feedforward pass.
GradientFactors backprop_gradient_factors(const Network& net, const Vector& input,
                                          const Vector& target, double* loss = nullptr);

// Same factors from a precomputed sweep x_0..x_L; x_L itself is not read.
GradientFactors backprop_factors_at(const Network& net, const std::vector<Vector>& activities,
                                    const Vector& target);

// BP weight gradients through arbitrary activities x_0..x_L
// (the adjoints_at recursion, then (δ_l ⊙ f') x_{l-1}ᵀ).
std::vector<Matrix> weight_gradient_at(const Network& net, const std::vector<Vector>& activities,
                                       const Vector& target);

// t_L = target, t_l = W_{l+1}⁺ f_{l+1}⁻¹(t_{l+1}), down to layer `lowest`
// (targets below it are left empty).
struct TPTargets {
  std::vector<Vector> targets;
};

TPTargets targetprop_targets(const Network& net, const Vector& target, double pinv_tol = 1e-12,
                             std::size_t lowest = 0);

// Same trainer loop as `train`, driven by backprop gradients.
TrainOutcome bp_train(Network& net, const Dataset& train_set, const TrainSettings& settings,
                      const Dataset* eval_set = nullptr);

}  // namespace pcn
