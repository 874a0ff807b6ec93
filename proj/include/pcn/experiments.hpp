#pragma once

// Named experiments behind the CLI. Every experiment is a loop over seeds
// of a per-seed function; the per-seed functions are public so the
// acceptance suite can apply its own thresholds to the raw numbers.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pcn/inference.hpp"
#include "pcn/learning.hpp"

namespace pcn {

// ---------------------------------------------------------------- configs

struct ExperimentConfig {
  std::string experiment;
  std::optional<std::size_t> seeds;  // per-experiment default when unset
  std::optional<std::size_t> steps;
  std::optional<double> step_size;
  std::optional<double> weight_lr;
  std::optional<double> momentum;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch_size;
  std::optional<std::size_t> digits;       // fig4c / fig4d sample count
  std::optional<std::size_t> train_size;   // fig4e
  std::optional<std::size_t> test_size;    // fig4e
  std::optional<std::size_t> record_every; // trace stride for per-step tables
  std::vector<double> ratios;              // empty: default grid
  std::filesystem::path out = "results";
  std::filesystem::path mnist_images, mnist_labels;
  std::filesystem::path mnist_test_images, mnist_test_labels;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Applies one `key = value` setting; unknown keys and bad values throw.
void apply_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);

// Plain `key = value` lines; `#` starts a comment; blank lines ignored.
std::map<std::string, std::string> parse_config_text(const std::string& text);
std::map<std::string, std::string> read_config_file(const std::filesystem::path& path);

std::vector<double> parse_number_list(const std::string& text);

// ---------------------------------------------------------------- results

// Long-form table: one row per (seed, key...) with value columns.
struct Table {
  std::string name;
  std::vector<std::string> keys;
  std::vector<std::string> values;
  struct Row {
    std::uint64_t seed = 0;
    std::vector<double> key;
    std::vector<double> value;
  };
  std::vector<Row> rows;

  void add(std::uint64_t seed, std::vector<double> key, std::vector<double> value);
};

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ExperimentResult {
  std::vector<Table> tables;
  std::vector<Check> checks;
  std::vector<std::string> notes;  // per-seed divergences and similar

  bool passed() const;
};

struct ExperimentInfo {
  std::string name;
  std::string description;
  std::size_t default_seeds;
};

const std::vector<ExperimentInfo>& experiment_catalog();
const ExperimentInfo* find_experiment(const std::string& name);

class UnknownExperimentError : public Error {
 public:
  using Error::Error;
};

// Runs one experiment (seeds in parallel, merged in seed order).
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// <table>.csv and <table>_summary.csv for each table, <experiment>_checks.csv.
void write_experiment(const ExperimentResult& result, const std::string& experiment,
                      const std::filesystem::path& dir);

// Per key tuple: n, then mean and sample standard deviation of each value.
void write_summary_csv(const Table& table, std::ostream& out);
void write_table_csv(const Table& table, std::ostream& out);

// Spearman rank correlation (average ranks on ties).
double spearman(const std::vector<double>& a, const std::vector<double>& b);
double median(std::vector<double> v);

// ---------------------------------------------------------- constructions

// Width-5 net with i.i.d. N(0, 0.05) weights: `layers` activity layers,
// `hidden` on the hidden layers, identity output.
Network small_network(std::size_t layers, ActivationKind hidden, std::uint64_t seed);

// Square invertible 5x5 weights Q diag(s) Rᵀ, Q and R Haar-like
// orthogonal, s ~ U[0.9, 1.1]; tanh hidden layers, identity output.
Network conditioned_square_network(std::size_t layers, std::uint64_t seed);

// Symmetric, strictly diagonally dominant with positive diagonal.
Matrix random_spd_precision(std::size_t n, std::uint64_t seed);

// Π_1 = min(1, 1/r) I, Π_2 = min(1, r) I, so r = Π_2/Π_1 and max(Π) = 1.
void set_ratio_precisions(Network& net, double ratio);

// One synthetic (data, target) pair.
std::pair<Vector, Vector> synthetic_pair(std::size_t in_dim, std::size_t out_dim, std::uint64_t seed);

// ------------------------------------------------------- per-seed results

struct FeedforwardSeed {          // output unclamped, random start
  std::vector<double> sup_dist;   // per layer 0..L, to the feedforward pass
  bool converged = false;
  std::size_t steps = 0;
};
FeedforwardSeed feedforward_seed(std::uint64_t seed, const InferenceSettings& settings);

struct TargetpropSeed {           // input unclamped, square tanh net
  std::vector<double> final_dist;    // sup-norm per layer 0..L
  std::vector<long> entry_step;      // first recorded step within the ball; -1 if never
  std::vector<std::vector<double>> trace;  // [row][layer] sup-norm distances
  std::vector<std::size_t> trace_steps;
  bool converged = false;
  std::size_t steps = 0;
};
TargetpropSeed targetprop_seed(std::uint64_t seed, const InferenceSettings& settings,
                               double ball = 1e-3, std::size_t record_every = 1);

struct LinearSeed {               // 3-layer linear, both ends clamped
  Vector equilibrium;             // analytic x*_1
  Vector final_x;                 // x_1 after inference
  double sup_dist = 0.0;
  std::vector<double> dist_trace; // Euclidean ‖x_1 - x*_1‖ per step, step 0 first
  std::vector<Vector> x_trace;    // x_1 per step (only when requested)
  bool converged = false;
  std::size_t steps = 0;
  Network net;
  ActivityState state;            // final state
};
// `precisions` selects random SPD precisions on both weight layers.
LinearSeed linear_seed(std::uint64_t seed, const InferenceSettings& settings, bool precisions,
                       bool keep_activities = false);

struct RatioSeed {                // 3-layer net at one precision ratio
  double cos_eps_bp = 0.0;        // cos(ε*_1, -δ_1)
  double cos_x_tp = 0.0;          // cos(x*_1, t_1)
  double dist_ff = 0.0;           // ‖x*_1 - x̄_1‖
  double dist_tp = 0.0;           // ‖x*_1 - t_1‖
  double marginal_residual = 0.0;
  bool converged = false;
  std::size_t steps = 0;
  Network net;
  ActivityState state;
};
RatioSeed ratio_seed(std::uint64_t seed, double ratio, ActivationKind hidden,
                     const InferenceSettings& settings);

struct CosineTraceSeed {          // cosines along one inference phase
  std::vector<std::size_t> steps;
  std::vector<double> cos_eps_bp, cos_x_tp;
};
CosineTraceSeed cosine_trace_seed(std::uint64_t seed, const InferenceSettings& settings);

struct EnergyTraceSeed {          // 4-layer relu inference from the feedforward pass
  std::vector<double> L, E_tilde, F, bound_lhs, bound_rhs;
  std::size_t loss_increases = 0;
  std::size_t residual_decreases = 0;
  std::size_t bound_violations = 0;
  double max_loss_increase = 0.0;
};
EnergyTraceSeed energy_trace_seed(std::uint64_t seed, const InferenceSettings& settings);

struct TrainingBoundSeed {        // EM training of the 4-layer relu net on synthetic data
  std::vector<TrainRecord> records;
  double max_delta_L = 0.0;
  std::size_t bound_violations = 0;
  std::size_t loss_increases = 0;
  bool diverged = false;
};
TrainingBoundSeed training_bound_seed(std::uint64_t seed, const TrainSettings& settings,
                                      std::size_t samples);

struct MarginalCheck {
  double residual = 0.0;          // marginal_condition_residual at the equilibrium
  double fd_gradient_sup = 0.0;   // sup of the central-difference ∂F/∂x there
  double fd_rel_error = 0.0;      // analytic ∂L/∂x + ∂Ẽ/∂x vs central differences, off equilibrium
};
// Relative error ‖g - g_fd‖ / ‖g_fd‖ over all free coordinates, with g the
// analytic ∂L/∂x + ∂Ẽ/∂x and g_fd central differences of F at step h.
double finite_difference_gradient_error(const Network& net, const ActivityState& state, double h = 1e-5);
// Central-difference ∂F/∂x over the free coordinates.
std::vector<Vector> finite_difference_gradient(const Network& net, const ActivityState& state, double h = 1e-5);
// The equilibrium check plus a finite-difference check at a point displaced
// by N(0, 1e-3²) noise (seeded) so the gradient is not zero.
MarginalCheck marginal_check(const Network& net, const ActivityState& equilibrium, std::uint64_t seed);

struct PathSeed {
  std::vector<double> step_sizes;
  std::vector<double> errors;     // sup-norm gap to the closed form at time T
};
PathSeed path_seed(std::uint64_t seed, double horizon, const std::vector<double>& step_sizes);

struct ZeroErrorSeed {
  double max_error = 0.0;         // sup-norm of the equilibrium errors
  double residual = 0.0;          // zero_error_residual
};
ZeroErrorSeed zero_error_seed(std::uint64_t seed);

// Random linear net (3 to 5 activity layers, widths 2 to 8).
Network random_linear_network(std::uint64_t seed);

// ------------------------------------------------------------------ MNIST

struct MnistPaths {
  std::filesystem::path train_images, train_labels, test_images, test_labels;
};
// Paths from the config, then from $PCN_MNIST_DIR with the standard names.
MnistPaths resolve_mnist_paths(const ExperimentConfig& cfg);
// Full-batch settings for the `digits`-sample training curve.
TrainSettings mnist_full_batch_settings(std::size_t digits);
// The PC-vs-BP comparison: Nesterov(1e-4, 0.9), 25 epochs.
TrainSettings mnist_minibatch_settings();
// 784-128-64-10, relu hidden, identity output, N(0, std²) weights.
Network mnist_network(std::uint64_t seed, double init_std = 0.05);

}  // namespace pcn
