#pragma once

// Energies and the quantities compared across PC, BP and TP.
//
// Energy convention: E_l = ε_lᵀ Π_l ε_l (‖ε_l‖² for identity precision),
// F = Σ_l E_l, L = E_L, Ẽ = Σ_{l<L} E_l. Gradients below are true
// gradients of these sums, so ∂L/∂x_L = 2 Π_L ε_L.
//
// Layer gradients of L and Ẽ are partial derivatives with every other
// layer's activity held fixed. This is the decomposition for which
// ∂F/∂x_l = ∂L/∂x_l + ∂Ẽ/∂x_l holds termwise and for which
// dL/dt = Σ_l ∂L/∂x_lᵀ ẋ_l along the inference dynamics.

#include <span>
#include <vector>

#include "pcn/state.hpp"

namespace pcn {

struct EnergyReport {
  double total = 0.0;        // F
  double output_loss = 0.0;  // L
  double residual = 0.0;     // Ẽ
  std::vector<double> per_layer;  // E_1..E_L at indices 0..L-1
};

// Relative weights on the output energy and the residual energy:
// F_λ = loss·L + residual·Ẽ.
struct EnergyWeights {
  double loss = 1.0;
  double residual = 1.0;

  static EnergyWeights standard() { return {}; }
  // λL + (1-λ)Ẽ; throws when λ is outside [0, 1].
  static EnergyWeights lambda(double lambda);
};

// Uses the network's precisions when any differ from identity.
EnergyReport energy_report(const Network& net, const ActivityState& state);
double layer_energy(const Network& net, const ActivityState& state, std::size_t l);

// λL + (1-λ)Ẽ from a report.
double lambda_energy(const EnergyReport& report, double lambda);

// ½ ∂F_w/∂x_l for every layer 0..L (clamped layers included). With
// use_precisions false all Π are taken as identity. With free_only the
// entries of clamped layers are left at zero and not computed.
std::vector<Vector> half_energy_gradient(const Network& net, const ActivityState& state,
                                         const EnergyWeights& weights, bool use_precisions,
                                         bool free_only = false);

std::vector<Vector> free_energy_gradient(const Network& net, const ActivityState& state);
std::vector<Vector> loss_gradient(const Network& net, const ActivityState& state);
std::vector<Vector> residual_gradient(const Network& net, const ActivityState& state);

struct Cosine {
  double value = 0.0;
  bool degenerate = false;
};

// aᵀb / (‖a‖‖b‖); returns {0, true} when either vector is (near) zero.
Cosine cosine(const Vector& a, const Vector& b);
double cosine_similarity(const Vector& a, const Vector& b);

// max over free layers of ‖∂L/∂x_l + ∂Ẽ/∂x_l‖∞.
double marginal_condition_residual(const Network& net, const ActivityState& state);

// Euclidean norm of concatenated differences over `layers`.
double distance_to_reference(const ActivityState& state, std::span<const Vector> reference,
                             std::span<const std::size_t> layers);

}  // namespace pcn
