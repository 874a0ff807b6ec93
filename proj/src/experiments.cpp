#include "pcn/experiments.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "pcn/analytic.hpp"
#include "pcn/baselines.hpp"
#include "pcn/csv.hpp"
#include "pcn/data.hpp"

namespace pcn {

namespace {

constexpr double kInitStd = 0.22360679774997896;  // sqrt(0.05)
constexpr std::size_t kWidth = 5;

// Independent streams per seed: network, data, activity start, precisions.
constexpr std::uint64_t kDataStream = 1000;
constexpr std::uint64_t kStartStream = 2000;
constexpr std::uint64_t kPrecisionStream = 3000;
constexpr std::uint64_t kNoiseStream = 4000;

const std::vector<double> kDefaultRatios{1e-2, 1e-1, 1.0, 1e1, 1e2};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  char* end = nullptr;
  const double d = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size() || !std::isfinite(d)) {
    throw ConfigError("config: '" + key + "' expects a number, got '" + v + "'");
  }
  return d;
}

std::size_t parse_count(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  std::size_t n = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), n);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    throw ConfigError("config: '" + key + "' expects a non-negative integer, got '" + v + "'");
  }
  return n;
}

}  // namespace

// ------------------------------------------------------------------ config

std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double("list", item));
  if (out.empty()) throw ConfigError("config: empty number list");
  return out;
}

void apply_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  const std::string k = trim(key);
  if (k == "experiment") cfg.experiment = trim(value);
  else if (k == "seeds") cfg.seeds = parse_count(k, value);
  else if (k == "steps") cfg.steps = parse_count(k, value);
  else if (k == "step_size") cfg.step_size = parse_double(k, value);
  else if (k == "weight_lr") cfg.weight_lr = parse_double(k, value);
  else if (k == "momentum") cfg.momentum = parse_double(k, value);
  else if (k == "epochs") cfg.epochs = parse_count(k, value);
  else if (k == "batch_size") cfg.batch_size = parse_count(k, value);
  else if (k == "digits") cfg.digits = parse_count(k, value);
  else if (k == "train_size") cfg.train_size = parse_count(k, value);
  else if (k == "test_size") cfg.test_size = parse_count(k, value);
  else if (k == "record_every") cfg.record_every = parse_count(k, value);
  else if (k == "ratios") cfg.ratios = parse_number_list(value);
  else if (k == "out") cfg.out = trim(value);
  else if (k == "mnist_images") cfg.mnist_images = trim(value);
  else if (k == "mnist_labels") cfg.mnist_labels = trim(value);
  else if (k == "mnist_test_images") cfg.mnist_test_images = trim(value);
  else if (k == "mnist_test_labels") cfg.mnist_test_labels = trim(value);
  else throw ConfigError("config: unknown key '" + k + "'");
  if (cfg.seeds && *cfg.seeds == 0) throw ConfigError("config: seeds must be >= 1");
  if (cfg.step_size && !(*cfg.step_size > 0.0)) throw ConfigError("config: step_size must be > 0");
  if (cfg.weight_lr && *cfg.weight_lr < 0.0) throw ConfigError("config: weight_lr must be >= 0");
  if (cfg.momentum && !(*cfg.momentum >= 0.0 && *cfg.momentum < 1.0)) {
    throw ConfigError("config: momentum must lie in [0, 1)");
  }
  if (cfg.record_every && *cfg.record_every == 0) throw ConfigError("config: record_every must be >= 1");
  for (double r : cfg.ratios)
    if (!(r > 0.0)) throw ConfigError("config: ratios must be positive");
}

std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> out;
  std::stringstream ss(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos || trim(line.substr(0, eq)).empty()) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

std::map<std::string, std::string> read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

// ------------------------------------------------------------------ tables

void Table::add(std::uint64_t seed, std::vector<double> key, std::vector<double> value) {
  if (key.size() != keys.size() || value.size() != values.size()) {
    throw ShapeError("Table " + name + ": row shape mismatch");
  }
  rows.push_back({seed, std::move(key), std::move(value)});
}

bool ExperimentResult::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

void write_table_csv(const Table& table, std::ostream& out) {
  CsvWriter csv(out);
  std::vector<std::string> header{"seed"};
  header.insert(header.end(), table.keys.begin(), table.keys.end());
  header.insert(header.end(), table.values.begin(), table.values.end());
  csv.header(header);
  for (const auto& r : table.rows) {
    csv.field(static_cast<std::size_t>(r.seed));
    for (double k : r.key) csv.field(k);
    for (double v : r.value) csv.field(v);
    csv.end_row();
  }
}

void write_summary_csv(const Table& table, std::ostream& out) {
  // Groups keep the order in which their key first appears.
  std::vector<std::vector<double>> order;
  std::map<std::vector<double>, std::vector<const Table::Row*>> groups;
  for (const auto& r : table.rows) {
    auto [it, fresh] = groups.try_emplace(r.key);
    if (fresh) order.push_back(r.key);
    it->second.push_back(&r);
  }
  CsvWriter csv(out);
  std::vector<std::string> header(table.keys);
  header.push_back("n");
  for (const auto& v : table.values) {
    header.push_back(v + "_mean");
    header.push_back(v + "_std");
  }
  csv.header(header);
  for (const auto& key : order) {
    const auto& rows = groups.at(key);
    for (double k : key) csv.field(k);
    csv.field(rows.size());
    for (std::size_t j = 0; j < table.values.size(); ++j) {
      double mean = 0.0;
      for (const auto* r : rows) mean += r->value[j];
      mean /= static_cast<double>(rows.size());
      double var = 0.0;
      for (const auto* r : rows) var += (r->value[j] - mean) * (r->value[j] - mean);
      const double sd = rows.size() > 1 ? std::sqrt(var / static_cast<double>(rows.size() - 1)) : 0.0;
      csv.field(mean).field(sd);
    }
    csv.end_row();
  }
}

void write_experiment(const ExperimentResult& result, const std::string& experiment,
                      const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [](const std::filesystem::path& p) {
    std::ofstream f(p);
    if (!f) throw Error("cannot write " + p.string());
    return f;
  };
  for (const auto& t : result.tables) {
    auto f = open(dir / (t.name + ".csv"));
    write_table_csv(t, f);
    auto s = open(dir / (t.name + "_summary.csv"));
    write_summary_csv(t, s);
  }
  auto c = open(dir / (experiment + "_checks.csv"));
  CsvWriter csv(c);
  csv.header({"check", "passed", "detail"});
  for (const auto& ch : result.checks) {
    csv.field(ch.name).field(ch.passed ? 1 : 0).field(ch.detail);
    csv.end_row();
  }
  for (const auto& n : result.notes) {
    csv.field("note").field(1).field(n);
    csv.end_row();
  }
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

namespace {

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) throw ShapeError("spearman: need two equal-length series");
  const auto ra = ranks(a), rb = ranks(b);
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / static_cast<double>(ra.size());
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / static_cast<double>(rb.size());
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

// ----------------------------------------------------------- constructions

Network small_network(std::size_t layers, ActivationKind hidden, std::uint64_t seed) {
  if (layers < 2) throw Error("small_network: need at least two activity layers");
  return build_network(NetworkSpec::uniform(std::vector<std::size_t>(layers, kWidth), hidden,
                                            ActivationKind::Linear, kInitStd, seed));
}

namespace {

Matrix random_orthogonal(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) = normal(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  const Eigen::MatrixXd q = qr.householderQ();
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m(i, j) = q(i, j);
  return m;
}

}  // namespace

Network conditioned_square_network(std::size_t layers, std::uint64_t seed) {
  if (layers < 2) throw Error("conditioned_square_network: need at least two activity layers");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> sv(0.9, 1.1);
  std::vector<Matrix> ws;
  for (std::size_t l = 1; l < layers; ++l) {
    Vector s(kWidth);
    for (double& v : s) v = sv(rng);
    const Matrix q = random_orthogonal(rng, kWidth);
    const Matrix r = random_orthogonal(rng, kWidth);
    ws.push_back(q * Matrix::diagonal(s) * r.transpose());
  }
  std::vector<ActivationKind> acts(layers - 1, ActivationKind::Tanh);
  acts.back() = ActivationKind::Linear;
  return Network(std::move(ws), std::move(acts));
}

Matrix random_spd_precision(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> off(-0.2, 0.2);
  std::uniform_real_distribution<double> margin(0.5, 1.5);
  Matrix p(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) p(i, j) = p(j, i) = off(rng);
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) row += std::abs(p(i, j));
    p(i, i) = row + margin(rng);
  }
  return p;
}

void set_ratio_precisions(Network& net, double ratio) {
  if (!(ratio > 0.0) || !std::isfinite(ratio)) throw Error("set_ratio_precisions: ratio must be positive");
  if (net.depth() != 2) throw Error("set_ratio_precisions: expects a 3-layer network");
  net.set_precision(1, std::min(1.0, 1.0 / ratio) * Matrix::identity(net.width(1)));
  net.set_precision(2, std::min(1.0, ratio) * Matrix::identity(net.width(2)));
}

std::pair<Vector, Vector> synthetic_pair(std::size_t in_dim, std::size_t out_dim, std::uint64_t seed) {
  const Dataset d = synthetic_gaussian(1, in_dim, out_dim, seed);
  return {d.inputs[0], d.targets[0]};
}

Network random_linear_network(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> layers(3, 5), width(2, 8);
  const std::size_t n = layers(rng);
  std::vector<std::size_t> widths(n);
  for (auto& w : widths) w = width(rng);
  return build_network(NetworkSpec::uniform(widths, ActivationKind::Linear, ActivationKind::Linear, 1.0,
                                            rng()));
}

// --------------------------------------------------------------- per seed

FeedforwardSeed feedforward_seed(std::uint64_t seed, const InferenceSettings& settings) {
  const Network net = small_network(5, ActivationKind::Tanh, seed);
  const auto [data, target] = synthetic_pair(kWidth, kWidth, seed + kDataStream);
  (void)target;
  InferenceSettings s = settings;
  s.init = InitMode::random(1.0, seed + kStartStream);
  s.record_trace = false;
  const InferenceResult r = run_inference(net, ClampMode::input_only(data), s);
  const auto ff = forward_pass(net, data);
  FeedforwardSeed out;
  for (std::size_t l = 0; l <= net.depth(); ++l) out.sup_dist.push_back(norm_inf(r.state.x[l] - ff[l]));
  out.converged = r.converged;
  out.steps = r.steps;
  return out;
}

TargetpropSeed targetprop_seed(std::uint64_t seed, const InferenceSettings& settings, double ball,
                               std::size_t record_every) {
  const Network net = conditioned_square_network(5, seed);
  std::mt19937_64 rng(seed + kDataStream);
  std::normal_distribution<double> normal(0.0, 0.5);
  Vector source(kWidth), start(kWidth);
  for (double& v : source) v = normal(rng);
  for (double& v : start) v = normal(rng);
  // A reachable target keeps every tanh inverse inside its domain.
  const Vector target = forward_pass(net, source).back();
  const TPTargets tp = targetprop_targets(net, target);

  std::vector<Probe> probes;
  for (std::size_t l = 0; l <= net.depth(); ++l) {
    probes.push_back({"dist_tp_l" + std::to_string(l), [t = tp.targets[l], l](const Network&, const ActivityState& st) {
                        return norm_inf(st.x[l] - t);
                      }});
  }
  InferenceSettings s = settings;
  s.init = InitMode::feedforward();
  s.record_trace = true;
  s.record_activities = false;
  const InferenceResult r = run_inference(net, ClampMode::output_only(target, start), s, probes);

  TargetpropSeed out;
  out.entry_step.assign(net.depth() + 1, -1);
  for (std::size_t l = 0; l <= net.depth(); ++l) out.final_dist.push_back(norm_inf(r.state.x[l] - tp.targets[l]));
  for (std::size_t i = 0; i < r.trace.rows.size(); ++i) {
    const auto& row = r.trace.rows[i];
    for (std::size_t l = 0; l <= net.depth(); ++l) {
      if (out.entry_step[l] < 0 && row.probes[l] < ball) out.entry_step[l] = static_cast<long>(row.step);
    }
    if (i % record_every == 0 || i + 1 == r.trace.rows.size()) {
      out.trace.push_back(row.probes);
      out.trace_steps.push_back(row.step);
    }
  }
  out.converged = r.converged;
  out.steps = r.steps;
  return out;
}

namespace {

Network linear_network(std::uint64_t seed, bool precisions) {
  Network net = small_network(3, ActivationKind::Linear, seed);
  if (precisions) {
    net.set_precision(1, random_spd_precision(kWidth, seed + kPrecisionStream));
    net.set_precision(2, random_spd_precision(kWidth, seed + kPrecisionStream + 1));
  }
  return net;
}

}  // namespace

LinearSeed linear_seed(std::uint64_t seed, const InferenceSettings& settings, bool precisions,
                       bool keep_activities) {
  LinearSeed out;
  out.net = linear_network(seed, precisions);
  const Network& net = out.net;
  const auto [data, target] = synthetic_pair(kWidth, kWidth, seed + kDataStream);
  out.equilibrium =
      precisions ? precision_equilibrium_layer(net.weight(1), net.weight(2), net.precision(1), net.precision(2),
                                               data, target)
                 : linear_equilibrium_layer(net.weight(1), net.weight(2), data, target);
  const Vector star = out.equilibrium;
  std::vector<Probe> probes{{"dist_eq", [star](const Network&, const ActivityState& st) {
                               return norm2(st.x[1] - star);
                             }}};
  InferenceSettings s = settings;
  s.init = InitMode::feedforward();
  s.record_trace = true;
  s.record_activities = keep_activities;
  InferenceResult r = run_inference(net, ClampMode::supervised(data, target), s, probes);
  for (const auto& row : r.trace.rows) {
    out.dist_trace.push_back(row.probes[0]);
    if (keep_activities) out.x_trace.push_back(row.activities[1]);
  }
  out.final_x = r.state.x[1];
  out.sup_dist = norm_inf(out.final_x - star);
  out.converged = r.converged;
  out.steps = r.steps;
  out.state = std::move(r.state);
  return out;
}

RatioSeed ratio_seed(std::uint64_t seed, double ratio, ActivationKind hidden,
                     const InferenceSettings& settings) {
  RatioSeed out;
  out.net = small_network(3, hidden, seed);
  set_ratio_precisions(out.net, ratio);
  const Network& net = out.net;
  const auto [data, target] = synthetic_pair(kWidth, kWidth, seed + kDataStream);
  const BackpropResult bp = backprop(net, data, target);
  const TPTargets tp = targetprop_targets(net, target, 1e-12, 1);
  InferenceSettings s = settings;
  s.init = InitMode::feedforward();
  s.record_trace = false;
  InferenceResult r = run_inference(net, ClampMode::supervised(data, target), s);
  out.cos_eps_bp = cosine_similarity(r.state.errors[1], -1.0 * bp.adjoints.deltas[1]);
  out.cos_x_tp = cosine_similarity(r.state.x[1], tp.targets[1]);
  out.dist_ff = norm2(r.state.x[1] - bp.activities[1]);
  out.dist_tp = norm2(r.state.x[1] - tp.targets[1]);
  out.marginal_residual = marginal_condition_residual(net, r.state);
  out.converged = r.converged;
  out.steps = r.steps;
  out.state = std::move(r.state);
  return out;
}

CosineTraceSeed cosine_trace_seed(std::uint64_t seed, const InferenceSettings& settings) {
  const Network net = small_network(3, ActivationKind::Tanh, seed);
  const auto [data, target] = synthetic_pair(kWidth, kWidth, seed + kDataStream);
  const BackpropResult bp = backprop(net, data, target);
  const TPTargets tp = targetprop_targets(net, target, 1e-12, 1);
  const Vector neg_delta = -1.0 * bp.adjoints.deltas[1];
  const Vector t1 = tp.targets[1];
  std::vector<Probe> probes{
      {"cos_eps_bp_l1", [neg_delta](const Network&, const ActivityState& st) {
         return cosine_similarity(st.errors[1], neg_delta);
       }},
      {"cos_x_tp_l1", [t1](const Network&, const ActivityState& st) { return cosine_similarity(st.x[1], t1); }}};
  InferenceSettings s = settings;
  s.init = InitMode::feedforward();
  s.record_trace = true;
  const InferenceResult r = run_inference(net, ClampMode::supervised(data, target), s, probes);
  CosineTraceSeed out;
  for (const auto& row : r.trace.rows) {
    out.steps.push_back(row.step);
    out.cos_eps_bp.push_back(row.probes[0]);
    out.cos_x_tp.push_back(row.probes[1]);
  }
  return out;
}

EnergyTraceSeed energy_trace_seed(std::uint64_t seed, const InferenceSettings& settings) {
  const Network net = small_network(4, ActivationKind::ReLU, seed);
  const auto [data, target] = synthetic_pair(kWidth, kWidth, seed + kDataStream);
  std::vector<Probe> probes{
      {"bound_lhs", [](const Network& n, const ActivityState& st) { return energy_gradient_bound_check(n, st).lhs; }},
      {"bound_rhs", [](const Network& n, const ActivityState& st) { return energy_gradient_bound_check(n, st).rhs; }},
      {"bound_ok", [](const Network& n, const ActivityState& st) {
         return energy_gradient_bound_check(n, st).satisfied ? 1.0 : 0.0;
       }}};
  InferenceSettings s = settings;
  s.init = InitMode::feedforward();
  s.record_trace = true;
  const InferenceResult r = run_inference(net, ClampMode::supervised(data, target), s, probes);
  EnergyTraceSeed out;
  for (std::size_t i = 0; i < r.trace.rows.size(); ++i) {
    const auto& row = r.trace.rows[i];
    out.L.push_back(row.energy.output_loss);
    out.E_tilde.push_back(row.energy.residual);
    out.F.push_back(row.energy.total);
    out.bound_lhs.push_back(row.probes[0]);
    out.bound_rhs.push_back(row.probes[1]);
    if (row.probes[2] == 0.0) ++out.bound_violations;
    if (i > 0) {
      const double dl = out.L[i] - out.L[i - 1];
      if (dl > 0.0) {
        ++out.loss_increases;
        out.max_loss_increase = std::max(out.max_loss_increase, dl);
      }
      if (out.E_tilde[i] < out.E_tilde[i - 1]) ++out.residual_decreases;
    }
  }
  return out;
}

TrainingBoundSeed training_bound_seed(std::uint64_t seed, const TrainSettings& settings, std::size_t samples) {
  Network net = small_network(4, ActivationKind::ReLU, seed);
  const Dataset data = synthetic_gaussian(samples, kWidth, kWidth, seed + kDataStream);
  TrainSettings s = settings;
  s.inference.init = InitMode::feedforward();
  s.loss_monitor = true;
  const TrainOutcome o = train(net, data, s);
  TrainingBoundSeed out;
  out.records = o.records;
  out.diverged = o.diverged;
  out.max_delta_L = -std::numeric_limits<double>::infinity();
  for (const auto& r : o.records) {
    out.max_delta_L = std::max(out.max_delta_L, r.delta_L_inference);
    out.bound_violations += r.bound_violations;
    out.loss_increases += r.loss_increases;
  }
  return out;
}

std::vector<Vector> finite_difference_gradient(const Network& net, const ActivityState& state, double h) {
  std::vector<Vector> g(state.x.size());
  ActivityState probe = state;
  for (std::size_t l = 0; l < state.x.size(); ++l) {
    g[l] = Vector(state.x[l].size());
    if (!state.is_free(l)) continue;
    for (std::size_t i = 0; i < state.x[l].size(); ++i) {
      const double x = state.x[l][i];
      probe.x[l][i] = x + h;
      refresh_errors(net, probe);
      const double up = energy_report(net, probe).total;
      probe.x[l][i] = x - h;
      refresh_errors(net, probe);
      const double down = energy_report(net, probe).total;
      probe.x[l][i] = x;
      g[l][i] = (up - down) / (2.0 * h);
    }
  }
  return g;
}

double finite_difference_gradient_error(const Network& net, const ActivityState& state, double h) {
  const auto fd = finite_difference_gradient(net, state, h);
  const auto dl = loss_gradient(net, state);
  const auto de = residual_gradient(net, state);
  double diff = 0.0, ref = 0.0;
  for (std::size_t l = 0; l < state.x.size(); ++l) {
    if (!state.is_free(l)) continue;
    for (std::size_t i = 0; i < state.x[l].size(); ++i) {
      const double a = dl[l][i] + de[l][i];
      diff += (a - fd[l][i]) * (a - fd[l][i]);
      ref += fd[l][i] * fd[l][i];
    }
  }
  if (ref == 0.0) return diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return std::sqrt(diff / ref);
}

MarginalCheck marginal_check(const Network& net, const ActivityState& equilibrium, std::uint64_t seed) {
  MarginalCheck c;
  c.residual = marginal_condition_residual(net, equilibrium);
  for (const auto& g : finite_difference_gradient(net, equilibrium)) c.fd_gradient_sup = std::max(c.fd_gradient_sup, norm_inf(g));
  ActivityState off = equilibrium;
  std::mt19937_64 rng(seed + kNoiseStream);
  std::normal_distribution<double> noise(0.0, 1e-3);
  for (std::size_t l = 0; l < off.x.size(); ++l) {
    if (!off.is_free(l)) continue;
    for (double& v : off.x[l]) v += noise(rng);
  }
  refresh_errors(net, off);
  c.fd_rel_error = finite_difference_gradient_error(net, off);
  return c;
}

PathSeed path_seed(std::uint64_t seed, double horizon, const std::vector<double>& step_sizes) {
  const Network net = small_network(3, ActivationKind::Linear, seed);
  const auto [data, target] = synthetic_pair(kWidth, kWidth, seed + kDataStream);
  const auto ff = forward_pass(net, data);
  const Vector exact = path_to_convergence(net.weight(1), net.weight(2), data, target, ff[1], horizon);
  PathSeed out;
  for (double h : step_sizes) {
    const double n = std::round(horizon / h);
    if (n < 1.0 || std::abs(n * h - horizon) > 1e-9 * horizon) {
      throw Error("path_seed: step size must divide the horizon");
    }
    InferenceSettings s;
    s.step_size = h;
    s.max_steps = static_cast<std::size_t>(n);
    s.convergence_tol = 0.0;
    s.record_trace = false;
    const InferenceResult r = run_inference(net, ClampMode::supervised(data, target), s);
    out.step_sizes.push_back(h);
    out.errors.push_back(norm_inf(r.state.x[1] - exact));
  }
  return out;
}

ZeroErrorSeed zero_error_seed(std::uint64_t seed) {
  // Non-decreasing widths keep every W_{l+1} of full column rank, and a
  // target generated by the network itself admits a zero-error equilibrium.
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> layers(3, 5), grow(0, 2);
  const std::size_t n = layers(rng);
  std::vector<std::size_t> widths{std::uniform_int_distribution<std::size_t>(2, 5)(rng)};
  while (widths.size() < n) widths.push_back(widths.back() + grow(rng));
  const Network net =
      build_network(NetworkSpec::uniform(widths, ActivationKind::Linear, ActivationKind::Linear, 1.0, rng()));
  Vector data(widths.front());
  std::normal_distribution<double> normal;
  for (double& v : data) v = normal(rng);
  const Vector target = forward_pass(net, data).back();
  const EquilibriumSolution eq = solve_linear_network_equilibrium(net, data, target);
  const ActivityState st = make_state(net, eq.activities, true, true);
  ZeroErrorSeed out;
  for (std::size_t l = 1; l <= net.depth(); ++l) out.max_error = std::max(out.max_error, norm_inf(st.errors[l]));
  out.residual = zero_error_residual(net, eq.activities);
  return out;
}

// ------------------------------------------------------------------- MNIST

MnistPaths resolve_mnist_paths(const ExperimentConfig& cfg) {
  std::filesystem::path dir;
  if (const char* env = std::getenv("PCN_MNIST_DIR"); env && *env) dir = env;
  auto pick = [&](const std::filesystem::path& given, const char* file) {
    if (!given.empty()) return given;
    if (!cfg.mnist_images.empty()) return cfg.mnist_images.parent_path() / file;
    return dir.empty() ? std::filesystem::path() : dir / file;
  };
  MnistPaths p;
  p.train_images = cfg.mnist_images.empty() ? pick({}, "train-images-idx3-ubyte") : cfg.mnist_images;
  p.train_labels = pick(cfg.mnist_labels, "train-labels-idx1-ubyte");
  p.test_images = pick(cfg.mnist_test_images, "t10k-images-idx3-ubyte");
  p.test_labels = pick(cfg.mnist_test_labels, "t10k-labels-idx1-ubyte");
  return p;
}

Network mnist_network(std::uint64_t seed, double init_std) {
  return build_network(
      NetworkSpec::uniform({784, 128, 64, 10}, ActivationKind::ReLU, ActivationKind::Linear, init_std, seed));
}

// ------------------------------------------------------------- experiments

namespace {

struct Defaults {
  std::size_t steps;
  double step_size;
  double tol;
};

InferenceSettings inference_from(const ExperimentConfig& cfg, const Defaults& d) {
  InferenceSettings s;
  s.max_steps = cfg.steps.value_or(d.steps);
  s.step_size = cfg.step_size.value_or(d.step_size);
  s.convergence_tol = d.tol;
  s.validate();
  return s;
}

// Runs fn(seed) for every seed, possibly in parallel, returning results in
// seed order. A seed that throws is reported through `notes` and skipped.
template <class R>
std::vector<std::optional<R>> over_seeds(std::size_t seeds, const std::function<R(std::uint64_t)>& fn,
                                         std::vector<std::string>& notes) {
  std::vector<std::optional<R>> out(seeds);
  std::vector<std::string> errs(seeds);
  const auto n = static_cast<std::ptrdiff_t>(seeds);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      out[i] = fn(static_cast<std::uint64_t>(i));
    } catch (const std::exception& e) {
      errs[i] = e.what();
    }
  }
  for (std::size_t i = 0; i < seeds; ++i) {
    if (!errs[i].empty()) notes.push_back("seed " + std::to_string(i) + ": " + errs[i]);
  }
  return out;
}

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(3);
  ss << v;
  return ss.str();
}

std::string count_of(std::size_t k, std::size_t n) { return std::to_string(k) + "/" + std::to_string(n); }

using Runner = std::function<ExperimentResult(const ExperimentConfig&, std::size_t seeds)>;

// fig1a, thm33
ExperimentResult run_targetprop(const ExperimentConfig& cfg, std::size_t seeds, bool figure) {
  const InferenceSettings s = inference_from(cfg, {40000, 0.2, 1e-12});
  const std::size_t every = cfg.record_every.value_or(figure ? 20 : 1000000);
  ExperimentResult res;
  const auto runs = over_seeds<TargetpropSeed>(
      seeds, [&](std::uint64_t seed) { return targetprop_seed(seed, s, 1e-3, every); }, res.notes);
  Table final{"thm33", {"layer"}, {"final_sup_dist", "entry_step"}, {}};
  Table trace{"fig1a", {"step", "layer"}, {"sup_dist_tp"}, {}};
  std::size_t close = 0, ordered = 0;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (!runs[i]) continue;
    const auto& r = *runs[i];
    bool ok = true, ord = true;
    for (std::size_t l = 0; l < r.final_dist.size(); ++l) {
      final.add(i, {double(l)}, {r.final_dist[l], double(r.entry_step[l])});
      ok = ok && r.final_dist[l] < 1e-5;
      if (l + 1 < r.final_dist.size()) ord = ord && r.entry_step[l] >= 0 && r.entry_step[l] >= r.entry_step[l + 1];
    }
    if (figure) {
      for (std::size_t k = 0; k < r.trace.size(); ++k)
        for (std::size_t l = 0; l < r.trace[k].size(); ++l) trace.add(i, {double(r.trace_steps[k]), double(l)}, {r.trace[k][l]});
    }
    close += ok;
    ordered += ok && ord;
  }
  res.tables.push_back(figure ? trace : final);
  res.checks.push_back({"targetprop_match_and_layerwise_order", ordered * 10 >= seeds * 9,
                        count_of(ordered, seeds) + " seeds within 1e-5 and ordered (" + count_of(close, seeds) +
                            " within 1e-5)"});
  return res;
}

// fig1b, fig1c, thm34 and the precision variants fig3a, fig3b, thm35
ExperimentResult run_linear(const ExperimentConfig& cfg, std::size_t seeds, const std::string& panel,
                            bool precisions) {
  const InferenceSettings s = inference_from(cfg, {4000, 0.05, 1e-10});
  const std::size_t every = cfg.record_every.value_or(1);
  const bool per_neuron = panel == "fig1b" || panel == "fig3a";
  ExperimentResult res;
  const auto runs = over_seeds<LinearSeed>(
      seeds, [&](std::uint64_t seed) { return linear_seed(seed, s, precisions, per_neuron); }, res.notes);
  Table t{panel, {}, {}, {}};
  if (per_neuron) {
    t.keys = {"step", "neuron"};
    t.values = {"x", "x_star"};
  } else if (panel == "fig1c" || panel == "fig3b") {
    t.keys = {"step"};
    t.values = {"dist_eq"};
  } else {
    t.keys = {};
    t.values = {"sup_dist", "steps", "converged"};
  }
  std::size_t good = 0, identity_ok = 0;
  double worst = 0.0, worst_identity = 0.0;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (!runs[i]) continue;
    const auto& r = *runs[i];
    bool decreasing = true;
    for (std::size_t k = 1; k < r.dist_trace.size(); ++k) {
      if (r.dist_trace[k - 1] < 1e-8) break;
      decreasing = decreasing && r.dist_trace[k] < r.dist_trace[k - 1];
    }
    const bool ok = r.sup_dist < 1e-8 && decreasing;
    good += ok;
    worst = std::max(worst, r.sup_dist);
    for (std::size_t k = 0; k < r.dist_trace.size(); k += every) {
      if (per_neuron) {
        for (std::size_t j = 0; j < r.final_x.size(); ++j) t.add(i, {double(k), double(j)}, {r.x_trace[k][j], r.equilibrium[j]});
      } else if (!t.keys.empty()) {
        t.add(i, {double(k)}, {r.dist_trace[k]});
      }
    }
    if (t.keys.empty()) t.add(i, {}, {r.sup_dist, double(r.steps), r.converged ? 1.0 : 0.0});
  }
  if (precisions && panel == "thm35") {
    // Identity precisions through the precision-weighted step must retrace
    // the identity-precision run.
    const auto pairs = over_seeds<double>(
        seeds,
        [&](std::uint64_t seed) {
          const LinearSeed plain = linear_seed(seed, s, false);
          Network net = plain.net;
          net.set_precision(1, Matrix::identity(kWidth));
          const auto [data, target] = synthetic_pair(kWidth, kWidth, seed + kDataStream);
          ActivityState st = init_activities(net, ClampMode::supervised(data, target), InitMode::feedforward());
          for (std::size_t k = 0; k < plain.steps; ++k) st = precision_activity_step(net, st, s.step_size);
          return norm_inf(st.x[1] - plain.final_x);
        },
        res.notes);
    for (const auto& d : pairs) {
      if (!d) continue;
      worst_identity = std::max(worst_identity, *d);
      identity_ok += *d <= 1e-12;
    }
    res.checks.push_back({"identity_precision_reproduces_linear", identity_ok == seeds,
                          count_of(identity_ok, seeds) + " seeds, max gap " + fmt(worst_identity)});
  }
  res.tables.push_back(std::move(t));
  res.checks.push_back({precisions ? "precision_equilibrium_match" : "linear_equilibrium_match", good == seeds,
                        count_of(good, seeds) + " seeds within 1e-8 with a decreasing trace, max gap " + fmt(worst)});
  return res;
}

std::vector<double> ratio_grid(const ExperimentConfig& cfg) {
  return cfg.ratios.empty() ? kDefaultRatios : cfg.ratios;
}

// fig3c and the linear half of fig2
ExperimentResult run_ratios(const ExperimentConfig& cfg, std::size_t seeds, const std::string& panel,
                            ActivationKind hidden) {
  const InferenceSettings s = inference_from(cfg, {50000, 0.2, 1e-10});
  const auto grid = ratio_grid(cfg);
  ExperimentResult res;
  Table t{panel, {"ratio"}, {"cos_eps_bp", "cos_x_tp", "dist_ff", "dist_tp", "converged"}, {}};
  std::vector<double> med_bp, med_tp, med_ff, med_dtp;
  std::vector<std::vector<std::optional<RatioSeed>>> all;
  for (double ratio : grid) {
    all.push_back(over_seeds<RatioSeed>(
        seeds, [&](std::uint64_t seed) { return ratio_seed(seed, ratio, hidden, s); }, res.notes));
  }
  for (std::size_t i = 0; i < seeds; ++i) {
    for (std::size_t g = 0; g < grid.size(); ++g) {
      if (!all[g][i]) continue;
      const auto& r = *all[g][i];
      t.add(i, {grid[g]}, {r.cos_eps_bp, r.cos_x_tp, r.dist_ff, r.dist_tp, r.converged ? 1.0 : 0.0});
    }
  }
  for (std::size_t g = 0; g < grid.size(); ++g) {
    std::vector<double> a, b, c, d;
    for (const auto& r : all[g]) {
      if (!r) continue;
      a.push_back(r->cos_eps_bp);
      b.push_back(r->cos_x_tp);
      c.push_back(r->dist_ff);
      d.push_back(r->dist_tp);
    }
    med_bp.push_back(median(a));
    med_tp.push_back(median(b));
    med_ff.push_back(median(c));
    med_dtp.push_back(median(d));
  }
  res.tables.push_back(std::move(t));
  if (grid.size() >= 2) {
    if (hidden == ActivationKind::Linear) {
      res.checks.push_back({"dist_ff_increasing", spearman(grid, med_ff) == 1.0,
                            "spearman " + fmt(spearman(grid, med_ff))});
      res.checks.push_back({"dist_tp_decreasing", spearman(grid, med_dtp) == -1.0,
                            "spearman " + fmt(spearman(grid, med_dtp))});
    } else {
      res.checks.push_back({"cos_bp_decreasing", spearman(grid, med_bp) == -1.0,
                            "spearman " + fmt(spearman(grid, med_bp))});
      res.checks.push_back({"cos_tp_increasing", spearman(grid, med_tp) == 1.0,
                            "spearman " + fmt(spearman(grid, med_tp))});
    }
  }
  return res;
}

ExperimentResult run_fig2(const ExperimentConfig& cfg, std::size_t seeds) {
  ExperimentResult res = run_ratios(cfg, seeds, "fig2_ratio", ActivationKind::Linear);
  const InferenceSettings s = inference_from(cfg, {100, 0.05, 0.0});
  const std::size_t every = cfg.record_every.value_or(1);
  const auto runs = over_seeds<CosineTraceSeed>(
      seeds, [&](std::uint64_t seed) { return cosine_trace_seed(seed, s); }, res.notes);
  Table t{"fig2_trace", {"step"}, {"cos_eps_bp", "cos_x_tp"}, {}};
  std::size_t moved = 0;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (!runs[i]) continue;
    const auto& r = *runs[i];
    for (std::size_t k = 0; k < r.steps.size(); k += every) t.add(i, {double(r.steps[k])}, {r.cos_eps_bp[k], r.cos_x_tp[k]});
    // Step 0 is the feedforward pass where ε = 0 and the cosine is degenerate.
    if (r.steps.size() < 3) continue;
    moved += r.cos_x_tp.back() > r.cos_x_tp[1] && r.cos_eps_bp.back() < r.cos_eps_bp[1];
  }
  res.tables.push_back(std::move(t));
  res.checks.push_back({"trace_moves_from_bp_to_tp", moved * 2 > seeds,
                        count_of(moved, seeds) + " seeds end closer to TP and further from BP"});
  return res;
}

ExperimentResult run_thm31(const ExperimentConfig& cfg, std::size_t seeds) {
  const InferenceSettings s = inference_from(cfg, {2000, 0.05, 1e-12});
  ExperimentResult res;
  const auto runs = over_seeds<FeedforwardSeed>(seeds, [&](std::uint64_t seed) { return feedforward_seed(seed, s); },
                                                res.notes);
  Table t{"thm31", {"layer"}, {"sup_dist_ff"}, {}};
  std::size_t good = 0;
  double worst = 0.0;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (!runs[i]) continue;
    bool ok = true;
    for (std::size_t l = 0; l < runs[i]->sup_dist.size(); ++l) {
      t.add(i, {double(l)}, {runs[i]->sup_dist[l]});
      ok = ok && runs[i]->sup_dist[l] < 1e-6;
      worst = std::max(worst, runs[i]->sup_dist[l]);
    }
    good += ok;
  }
  res.tables.push_back(std::move(t));
  res.checks.push_back({"feedforward_match", good == seeds,
                        count_of(good, seeds) + " seeds within 1e-6, max gap " + fmt(worst)});
  return res;
}

ExperimentResult run_lemma32(const ExperimentConfig& cfg, std::size_t seeds) {
  const InferenceSettings lin = inference_from(cfg, {4000, 0.05, 1e-10});
  const InferenceSettings rat = inference_from(cfg, {50000, 0.2, 1e-10});
  const auto grid = ratio_grid(cfg);
  ExperimentResult res;
  // setting 0: linear, 1: linear with precisions, 2+g: tanh at ratio grid[g]
  const auto runs = over_seeds<std::vector<MarginalCheck>>(
      seeds,
      [&](std::uint64_t seed) {
        std::vector<MarginalCheck> out;
        for (bool prec : {false, true}) {
          const LinearSeed r = linear_seed(seed, lin, prec);
          if (r.converged) out.push_back(marginal_check(r.net, r.state, seed));
          else out.push_back({std::numeric_limits<double>::quiet_NaN(), 0.0, 0.0});
        }
        for (double ratio : grid) {
          const RatioSeed r = ratio_seed(seed, ratio, ActivationKind::Tanh, rat);
          if (r.converged) out.push_back(marginal_check(r.net, r.state, seed));
          else out.push_back({std::numeric_limits<double>::quiet_NaN(), 0.0, 0.0});
        }
        return out;
      },
      res.notes);
  Table t{"lemma32", {"setting"}, {"residual", "fd_gradient_sup", "fd_rel_error"}, {}};
  std::size_t checked = 0, good = 0;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (!runs[i]) continue;
    for (std::size_t k = 0; k < runs[i]->size(); ++k) {
      const auto& c = (*runs[i])[k];
      t.add(i, {double(k)}, {c.residual, c.fd_gradient_sup, c.fd_rel_error});
      if (std::isnan(c.residual)) continue;
      ++checked;
      good += c.residual < 1e-6 && c.fd_gradient_sup < 1e-6 && c.fd_rel_error < 1e-5;
    }
  }
  res.tables.push_back(std::move(t));
  res.checks.push_back({"marginal_condition", checked > 0 && good == checked,
                        count_of(good, checked) + " converged equilibria pass"});
  return res;
}

InferenceSettings relu_inference(const ExperimentConfig& cfg) { return inference_from(cfg, {100, 0.1, 0.0}); }

TrainSettings synthetic_training(const ExperimentConfig& cfg) {
  TrainSettings t;
  t.inference = relu_inference(cfg);
  t.inference.convergence_tol = 1e-8;
  t.weight_lr = cfg.weight_lr.value_or(0.01);
  t.momentum = cfg.momentum.value_or(0.0);
  t.nesterov = t.momentum > 0.0;
  t.epochs = cfg.epochs.value_or(20);
  t.batch_size = cfg.batch_size.value_or(16);
  t.shuffle = true;
  return t;
}

constexpr std::size_t kSyntheticSamples = 64;

ExperimentResult run_fig4a(const ExperimentConfig& cfg, std::size_t seeds) {
  const InferenceSettings s = relu_inference(cfg);
  ExperimentResult res;
  const auto runs = over_seeds<EnergyTraceSeed>(seeds, [&](std::uint64_t seed) { return energy_trace_seed(seed, s); },
                                                res.notes);
  Table t{"fig4a", {"step"}, {"L", "E_tilde", "F", "bound_lhs", "bound_rhs"}, {}};
  std::size_t inc = 0, dec = 0, viol = 0;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (!runs[i]) continue;
    const auto& r = *runs[i];
    for (std::size_t k = 0; k < r.L.size(); ++k) t.add(i, {double(k)}, {r.L[k], r.E_tilde[k], r.F[k], r.bound_lhs[k], r.bound_rhs[k]});
    inc += r.loss_increases;
    dec += r.residual_decreases;
    viol += r.bound_violations;
  }
  res.tables.push_back(std::move(t));
  res.checks.push_back({"L_non_increasing", inc == 0, std::to_string(inc) + " increasing steps"});
  res.checks.push_back({"E_tilde_non_decreasing", dec == 0, std::to_string(dec) + " decreasing steps"});
  res.checks.push_back({"bound_holds", viol == 0, std::to_string(viol) + " violating steps"});
  return res;
}

ExperimentResult run_training_bound(const ExperimentConfig& cfg, std::size_t seeds, const std::string& panel) {
  const TrainSettings ts = synthetic_training(cfg);
  ExperimentResult res;
  const auto runs = over_seeds<TrainingBoundSeed>(
      seeds, [&](std::uint64_t seed) { return training_bound_seed(seed, ts, kSyntheticSamples); }, res.notes);
  Table t{panel, {"epoch"}, {"loss", "delta_L_inference", "bound_violations", "loss_increases"}, {}};
  double worst = -std::numeric_limits<double>::infinity();
  std::size_t viol = 0, inc = 0, diverged = 0;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (!runs[i]) continue;
    const auto& r = *runs[i];
    for (const auto& rec : r.records) {
      t.add(i, {double(rec.epoch)},
            {rec.loss, rec.delta_L_inference, double(rec.bound_violations), double(rec.loss_increases)});
    }
    worst = std::max(worst, r.max_delta_L);
    viol += r.bound_violations;
    inc += r.loss_increases;
    diverged += r.diverged;
  }
  res.tables.push_back(std::move(t));
  res.checks.push_back({"delta_L_non_positive", worst <= 0.0, "max delta L " + fmt(worst)});
  if (panel == "bound") {
    res.checks.push_back({"bound_every_step", viol == 0, std::to_string(viol) + " violating steps"});
    res.checks.push_back({"L_every_step", inc == 0, std::to_string(inc) + " steps with L increasing"});
  }
  if (diverged) res.notes.push_back(std::to_string(diverged) + " seeds diverged");
  return res;
}

// ---- MNIST panels

struct MnistRun {
  std::vector<TrainRecord> records;
  bool diverged = false;
};

Dataset load_train(const ExperimentConfig& cfg, std::size_t n) {
  const MnistPaths p = resolve_mnist_paths(cfg);
  if (p.train_images.empty() || p.train_labels.empty()) {
    throw ConfigError("MNIST paths not given (use --mnist-images/--mnist-labels or PCN_MNIST_DIR)");
  }
  return load_mnist_idx(p.train_images, p.train_labels, n);
}

}  // namespace

TrainSettings mnist_full_batch_settings(std::size_t digits) {
  TrainSettings t;
  t.batch_size = 0;
  t.inference.step_size = 0.1;
  t.inference.convergence_tol = 1e-10;
  if (digits <= 1) {
    t.weight_lr = 0.01;
    t.inference.max_steps = 100;
    t.epochs = 1000;
  } else {
    t.weight_lr = 0.5;
    t.momentum = 0.9;
    t.nesterov = true;
    t.inference.max_steps = 10;
    t.epochs = 3000;
  }
  return t;
}

TrainSettings mnist_minibatch_settings() {
  TrainSettings t;
  t.weight_lr = 1e-4;
  t.momentum = 0.9;
  t.nesterov = true;
  t.epochs = 25;
  t.batch_size = 1;
  t.shuffle = true;
  t.inference.step_size = 0.1;
  t.inference.max_steps = 20;
  t.inference.convergence_tol = 1e-10;
  t.compare_bp = false;
  t.record_bp_grad_norm = false;
  t.record_accuracy = true;
  return t;
}

namespace {

void override_training(const ExperimentConfig& cfg, TrainSettings& t) {
  if (cfg.weight_lr) t.weight_lr = *cfg.weight_lr;
  if (cfg.momentum) {
    t.momentum = *cfg.momentum;
    t.nesterov = t.momentum > 0.0;
  }
  if (cfg.epochs) t.epochs = *cfg.epochs;
  if (cfg.batch_size) t.batch_size = *cfg.batch_size;
  if (cfg.steps) t.inference.max_steps = *cfg.steps;
  if (cfg.step_size) t.inference.step_size = *cfg.step_size;
}

ExperimentResult run_full_batch(const ExperimentConfig& cfg, std::size_t seeds, const std::string& panel) {
  const std::size_t digits = cfg.digits.value_or(panel == "fig4d" ? 500 : 1);
  TrainSettings ts = mnist_full_batch_settings(digits);
  override_training(cfg, ts);
  const Dataset data = load_train(cfg, digits);
  ExperimentResult res;
  const auto runs = over_seeds<MnistRun>(
      seeds,
      [&](std::uint64_t seed) {
        Network net = mnist_network(seed);
        const TrainOutcome o = train(net, data, ts);
        return MnistRun{o.records, o.diverged};
      },
      res.notes);
  Table curve{panel, {"epoch"}, {"loss", "bp_grad_norm", "pc_grad_norm"}, {}};
  Table cos{panel + "_cos", {"epoch", "layer"}, {"cos_sim"}, {}};
  std::size_t good = 0, below = 0;
  std::string detail;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (!runs[i] || runs[i]->records.empty()) continue;
    const auto& recs = runs[i]->records;
    std::vector<double> mean_cos(recs.front().cos_sim.size(), 0.0);
    for (const auto& r : recs) {
      curve.add(i, {double(r.epoch)}, {r.loss, r.bp_grad_norm, r.pc_grad_norm});
      for (std::size_t l = 0; l < r.cos_sim.size(); ++l) {
        cos.add(i, {double(r.epoch), double(l + 1)}, {r.cos_sim[l]});
        mean_cos[l] += r.cos_sim[l] / static_cast<double>(recs.size());
      }
    }
    const auto& first = recs.front();
    const auto& last = recs.back();
    bool ok;
    if (digits <= 1) {
      ok = !runs[i]->diverged && last.loss < 1e-10 && last.bp_grad_norm < 1e-8;
    } else {
      ok = !runs[i]->diverged && last.loss <= 1e-3 * first.loss && last.bp_grad_norm <= 1e-3 * first.bp_grad_norm;
    }
    good += ok;
    bool differs = false;
    for (std::size_t l = 0; l + 1 < mean_cos.size(); ++l) differs = differs || mean_cos[l] < 0.999;
    below += differs;
    detail = "seed " + std::to_string(i) + ": loss " + fmt(first.loss) + " -> " + fmt(last.loss) + ", bp norm " +
             fmt(first.bp_grad_norm) + " -> " + fmt(last.bp_grad_norm);
  }
  res.tables.push_back(std::move(curve));
  if (panel == "fig4d") res.tables.push_back(std::move(cos));
  res.checks.push_back({digits <= 1 ? "converges_to_zero_loss" : "three_orders_drop", good == seeds,
                        count_of(good, seeds) + " seeds; last " + detail});
  if (panel == "fig4d") {
    res.checks.push_back({"pc_differs_from_bp", below == seeds,
                          count_of(below, seeds) + " seeds with a hidden layer below 0.999 mean cosine"});
  }
  return res;
}

ExperimentResult run_fig4e(const ExperimentConfig& cfg, std::size_t seeds) {
  TrainSettings ts = mnist_minibatch_settings();
  override_training(cfg, ts);
  const std::size_t n_train = cfg.train_size.value_or(10000);
  const std::size_t n_test = cfg.test_size.value_or(2000);
  const MnistPaths p = resolve_mnist_paths(cfg);
  const Dataset train_set = load_train(cfg, n_train);
  if (p.test_images.empty() || p.test_labels.empty()) throw ConfigError("MNIST test paths not given");
  const Dataset test_set = load_mnist_idx(p.test_images, p.test_labels, n_test);
  ExperimentResult res;
  using Pair = std::pair<MnistRun, MnistRun>;
  const auto runs = over_seeds<Pair>(
      seeds,
      [&](std::uint64_t seed) {
        TrainSettings s = ts;
        s.seed = seed;
        Network pc_net = mnist_network(seed);
        Network bp_net = pc_net;
        const TrainOutcome pc = train(pc_net, train_set, s, &test_set);
        const TrainOutcome bp = bp_train(bp_net, train_set, s, &test_set);
        return Pair{{pc.records, pc.diverged}, {bp.records, bp.diverged}};
      },
      res.notes);
  Table t{"fig4e", {"epoch", "rule"}, {"test_accuracy", "train_loss"}, {}};
  std::size_t good = 0;
  std::string detail;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (!runs[i]) continue;
    const auto& [pc, bp] = *runs[i];
    for (const auto& r : pc.records) t.add(i, {double(r.epoch), 0.0}, {r.accuracy, r.loss});
    for (const auto& r : bp.records) t.add(i, {double(r.epoch), 1.0}, {r.accuracy, r.loss});
    if (pc.records.empty() || bp.records.empty()) continue;
    const double a = pc.records.back().accuracy, b = bp.records.back().accuracy;
    good += !pc.diverged && !bp.diverged && a >= 0.9 && b >= 0.9 && std::abs(a - b) <= 0.02;
    detail = "seed " + std::to_string(i) + ": PC " + fmt(100 * a) + "%, BP " + fmt(100 * b) + "%";
  }
  res.tables.push_back(std::move(t));
  res.checks.push_back({"pc_matches_bp_accuracy", good == seeds, count_of(good, seeds) + " seeds; last " + detail});
  return res;
}

ExperimentResult run_convexity(const ExperimentConfig&, std::size_t seeds) {
  ExperimentResult res;
  const auto runs = over_seeds<ConvexityCertificate>(
      seeds, [](std::uint64_t seed) { return convexity_certificate(random_linear_network(seed)); }, res.notes);
  Table t{"convexity", {"layer"}, {"min_eig"}, {}};
  std::size_t good = 0;
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (!runs[i]) continue;
    bool ok = true;
    for (std::size_t l = 0; l < runs[i]->min_eigs.size(); ++l) {
      t.add(i, {double(l + 1)}, {runs[i]->min_eigs[l]});
      ok = ok && runs[i]->min_eigs[l] >= 1.0 - 1e-9;
      worst = std::min(worst, runs[i]->min_eigs[l]);
    }
    good += ok;
  }
  res.tables.push_back(std::move(t));
  res.checks.push_back({"min_eig_at_least_one", good == seeds, count_of(good, seeds) + " nets, smallest " + fmt(worst)});
  return res;
}

const std::vector<double> kPathSteps{0.02, 0.01, 0.005, 0.0025};

ExperimentResult run_path(const ExperimentConfig&, std::size_t seeds) {
  ExperimentResult res;
  const auto runs = over_seeds<PathSeed>(seeds, [](std::uint64_t seed) { return path_seed(seed, 1.0, kPathSteps); },
                                         res.notes);
  Table t{"path", {"step_size"}, {"error"}, {}};
  std::size_t good = 0;
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (!runs[i]) continue;
    const auto& r = *runs[i];
    bool ok = true;
    for (std::size_t k = 0; k < r.errors.size(); ++k) {
      t.add(i, {r.step_sizes[k]}, {r.errors[k]});
      if (k == 0) continue;
      const double ratio = r.errors[k - 1] / r.errors[k];
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
      ok = ok && std::abs(ratio - 2.0) <= 0.2;
    }
    good += ok;
  }
  res.tables.push_back(std::move(t));
  res.checks.push_back({"first_order_halving", good == seeds,
                        count_of(good, seeds) + " seeds, ratios in [" + fmt(lo) + ", " + fmt(hi) + "]"});
  return res;
}

ExperimentResult run_zero_error(const ExperimentConfig&, std::size_t seeds) {
  ExperimentResult res;
  const auto runs = over_seeds<ZeroErrorSeed>(seeds, [](std::uint64_t seed) { return zero_error_seed(seed); }, res.notes);
  Table t{"zero_error", {}, {"max_error", "residual"}, {}};
  std::size_t applicable = 0, good = 0;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (!runs[i]) continue;
    t.add(i, {}, {runs[i]->max_error, runs[i]->residual});
    if (runs[i]->max_error < 1e-8) {
      ++applicable;
      good += runs[i]->residual < 1e-6;
    }
  }
  res.tables.push_back(std::move(t));
  res.checks.push_back({"zero_error_condition", applicable > 0 && good == applicable,
                        count_of(good, applicable) + " zero-error equilibria satisfy it"});
  return res;
}

struct Entry {
  ExperimentInfo info;
  Runner run;
};

const std::vector<Entry>& entries() {
  static const std::vector<Entry> e{
      {{"fig1a", "per-step distance of each layer to its TP target; input-unclamped square tanh net", 50},
       [](const ExperimentConfig& c, std::size_t n) { return run_targetprop(c, n, true); }},
      {{"fig1b", "hidden activities converging to the analytic linear equilibrium; 3-layer linear net", 50},
       [](const ExperimentConfig& c, std::size_t n) { return run_linear(c, n, "fig1b", false); }},
      {{"fig1c", "distance of the hidden layer to the linear equilibrium during inference", 50},
       [](const ExperimentConfig& c, std::size_t n) { return run_linear(c, n, "fig1c", false); }},
      {{"fig2", "equilibrium distances to FF and TP over precision ratios (linear), and cosines to BP/TP along inference (tanh)", 50},
       run_fig2},
      {{"fig3a", "hidden activities converging to the precision-weighted equilibrium", 50},
       [](const ExperimentConfig& c, std::size_t n) { return run_linear(c, n, "fig3a", true); }},
      {{"fig3b", "distance to the precision-weighted equilibrium during inference", 50},
       [](const ExperimentConfig& c, std::size_t n) { return run_linear(c, n, "fig3b", true); }},
      {{"fig3c", "equilibrium cosine to BP adjoints and TP targets over precision ratios; 3-layer tanh net", 50},
       [](const ExperimentConfig& c, std::size_t n) { return run_ratios(c, n, "fig3c", ActivationKind::Tanh); }},
      {{"fig4a", "L, E_tilde and F along one inference phase; 4-layer relu net, step 0.1", 50}, run_fig4a},
      {{"fig4b", "change of L over every inference phase during 20 epochs of training", 50},
       [](const ExperimentConfig& c, std::size_t n) { return run_training_bound(c, n, "fig4b"); }},
      {{"fig4c", "full-batch MNIST training curve (--digits, default 1): loss and gradient norms", 1},
       [](const ExperimentConfig& c, std::size_t n) { return run_full_batch(c, n, "fig4c"); }},
      {{"fig4d", "per-layer cosine of PC and BP updates during full-batch training on 500 digits", 1},
       [](const ExperimentConfig& c, std::size_t n) { return run_full_batch(c, n, "fig4d"); }},
      {{"fig4e", "PC vs BP test accuracy, MNIST 10k/2k subset, 25 epochs", 1}, run_fig4e},
      {{"thm31", "output-unclamped tanh net relaxes to the feedforward pass", 50}, run_thm31},
      {{"thm33", "input-unclamped square tanh net reaches the TP targets, layer by layer from the top", 50},
       [](const ExperimentConfig& c, std::size_t n) { return run_targetprop(c, n, false); }},
      {{"thm34", "linear net inference equilibrium equals the closed form", 50},
       [](const ExperimentConfig& c, std::size_t n) { return run_linear(c, n, "thm34", false); }},
      {{"thm35", "precision-weighted linear equilibrium equals the closed form", 50},
       [](const ExperimentConfig& c, std::size_t n) { return run_linear(c, n, "thm35", true); }},
      {{"lemma32", "marginal condition at converged equilibria, with finite-difference gradients", 50}, run_lemma32},
      {{"bound", "energy-gradient bound and L monotonicity at every inference step during training", 50},
       [](const ExperimentConfig& c, std::size_t n) { return run_training_bound(c, n, "bound"); }},
      {{"convexity", "minimum eigenvalue of I + WᵀW on random linear nets", 100}, run_convexity},
      {{"path", "closed-form trajectory vs Euler, error ratio under step halving", 50}, run_path},
      {{"zero-error", "zero-error equilibria satisfy W_l x_{l-1} = pinv(W_{l+1}) x_{l+1}", 50}, run_zero_error},
  };
  return e;
}

}  // namespace

const std::vector<ExperimentInfo>& experiment_catalog() {
  static const std::vector<ExperimentInfo> c = [] {
    std::vector<ExperimentInfo> out;
    for (const auto& e : entries()) out.push_back(e.info);
    return out;
  }();
  return c;
}

const ExperimentInfo* find_experiment(const std::string& name) {
  for (const auto& i : experiment_catalog())
    if (i.name == name) return &i;
  return nullptr;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  for (const auto& e : entries()) {
    if (e.info.name == cfg.experiment) return e.run(cfg, cfg.seeds.value_or(e.info.default_seeds));
  }
  throw UnknownExperimentError("unknown experiment '" + cfg.experiment + "'");
}

}  // namespace pcn
