#pragma once

// Learning phase and the EM training loop. Each training step runs the
// E-step (per-sample inference with both ends clamped) and then one
// optimizer update of every weight from the batch-averaged gradient.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "pcn/data.hpp"
#include "pcn/inference.hpp"

namespace pcn {

struct TrainSettings {
  double weight_lr = 1e-3;
  double momentum = 0.0;
  bool nesterov = false;
  std::size_t epochs = 1;
  std::size_t batch_size = 0;  // 0 means full batch
  InferenceSettings inference;
  // Track L and the energy-gradient bound at every inference step.
  bool loss_monitor = false;
  bool shuffle = false;
  std::uint64_t seed = 0;
  // Compare each PC batch gradient against the BP gradient of the same batch.
  bool compare_bp = true;
  // Full-dataset BP gradient norm at the end of every epoch.
  bool record_bp_grad_norm = true;
  // Argmax accuracy (one-hot targets) at the end of every epoch.
  bool record_accuracy = false;

  void validate() const;
};

// The ingredients of a rank-one weight gradient per layer:
// ∂/∂W_l = u_l x_{l-1}ᵀ. Index l-1 holds layer l.
struct GradientFactors {
  std::vector<Vector> u;
  std::vector<Vector> x_below;
};

// Sum of squares ‖target - output‖².
double mse_loss(const Vector& output, const Vector& target);

// ∂F/∂W_l = -2 (Π_l ε_l ⊙ f'(W_l x_{l-1})) x_{l-1}ᵀ at the given state.
std::vector<Matrix> weight_gradient(const Network& net, const ActivityState& state);
GradientFactors weight_gradient_factors(const Network& net, const ActivityState& state);

// Mean over samples of u xᵀ, accumulated in sample order.
std::vector<Matrix> average_gradients(const Network& net, std::span<const GradientFactors> factors);

// (1/λ) ∂F_λ/∂W_l at a state of the λ-weighted dynamics. At an
// equilibrium this is BP through the equilibrium activities; λ = 0 returns
// that limit directly (adjoint recursion at the state, seeded by ε_L).
std::vector<Matrix> lambda_weight_gradient(const Network& net, const ActivityState& state,
                                           double lambda);

double gradient_norm(const std::vector<Matrix>& grads);

struct BoundCheck {
  double lhs = 0.0;  // -Σ ∂L/∂x_lᵀ ∂Ẽ/∂x_l
  double rhs = 0.0;  // Σ ‖∂L/∂x_l‖²
  bool satisfied = true;
};

// Summed over free layers; satisfied = lhs <= rhs + 1e-12.
BoundCheck energy_gradient_bound_check(const Network& net, const ActivityState& state);

// SGD with optional (Nesterov) momentum:
//   v ← μ v + g;  W ← W - lr (g + μ v) with Nesterov, W ← W - lr v without.
class Optimizer {
 public:
  Optimizer(double lr, double momentum, bool nesterov);
  void step(Network& net, const std::vector<Matrix>& grads);

 private:
  double lr_, momentum_;
  bool nesterov_;
  std::vector<Matrix> velocity_;
};

struct StepMetrics {
  double loss_before = 0.0;      // mean L at the feedforward pass
  double loss_after = 0.0;       // mean L after inference
  double max_delta_L = 0.0;      // max over samples of L_after - L_before
  double pc_grad_norm = 0.0;
  double bp_grad_norm = 0.0;     // of the same batch; 0 unless compared
  std::vector<double> cos_sim;   // per layer, PC vs BP batch gradient
  std::size_t bound_violations = 0;
  std::size_t loss_increases = 0;  // inference steps where L went up
  std::size_t max_inference_steps = 0;
  bool all_converged = true;
};

// One EM step on the samples `indices` of `data`. Per-sample E-steps run
// in parallel; gradients are reduced in sample order.
StepMetrics em_train_step(Network& net, const Dataset& data, std::span<const std::size_t> indices,
                          const TrainSettings& settings, Optimizer& optimizer);

struct TrainRecord {
  std::size_t epoch = 0;
  double loss = 0.0;             // mean training L at epoch end
  double bp_grad_norm = 0.0;     // full training set, epoch end
  double pc_grad_norm = 0.0;     // mean over the epoch's updates
  double accuracy = 0.0;         // NaN unless recorded
  double delta_L_inference = 0.0;  // max over the epoch's inference phases
  std::vector<double> cos_sim;   // per layer, mean over the epoch's updates
  std::size_t bound_violations = 0;
  std::size_t loss_increases = 0;
};

struct TrainOutcome {
  std::vector<TrainRecord> records;
  bool diverged = false;
  std::string divergence_message;
};

enum class GradientRule { PredictiveCoding, Backprop };

// PC training. Divergence stops the loop and returns the partial record.
TrainOutcome train(Network& net, const Dataset& train_set, const TrainSettings& settings,
                   const Dataset* eval_set = nullptr);
TrainOutcome train_with_rule(Network& net, const Dataset& train_set, const TrainSettings& settings,
                             GradientRule rule, const Dataset* eval_set = nullptr);

// Mean L over a dataset at the feedforward pass.
double dataset_loss(const Network& net, const Dataset& data);
// Norm of the mean BP gradient over a dataset.
double dataset_bp_grad_norm(const Network& net, const Dataset& data);
// Fraction of samples whose output argmax matches the target argmax.
double dataset_accuracy(const Network& net, const Dataset& data);

// epoch,loss,bp_grad_norm,pc_grad_norm,accuracy,delta_L_inference,cos_sim_layer_1..L
void write_train_csv(const TrainOutcome& outcome, std::size_t depth, std::ostream& out);

}  // namespace pcn
