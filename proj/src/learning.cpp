#include "pcn/learning.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>

#include "pcn/baselines.hpp"
#include "pcn/csv.hpp"
#include "pcn/kernels.hpp"

namespace pcn {

void TrainSettings::validate() const {
  if (!(weight_lr >= 0.0) || !std::isfinite(weight_lr)) throw Error("TrainSettings: weight_lr must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw Error("TrainSettings: momentum must lie in [0, 1)");
  inference.validate();
}

double mse_loss(const Vector& output, const Vector& target) {
  if (output.size() != target.size()) {
    throw ShapeError("mse_loss: lengths " + std::to_string(output.size()) + " and " +
                     std::to_string(target.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < output.size(); ++i) {
    const double d = target[i] - output[i];
    s += d * d;
  }
  return s;
}

GradientFactors weight_gradient_factors(const Network& net, const ActivityState& state) {
  GradientFactors f;
  const bool prec = !net.identity_precisions();
  for (std::size_t l = 1; l <= net.depth(); ++l) {
    Vector pe = prec ? net.precision(l) * state.errors[l] : state.errors[l];
    Vector u = hadamard(pe, activation_derivative(net.activation(l), state.preacts[l]));
    u *= -2.0;
    f.u.push_back(std::move(u));
    f.x_below.push_back(state.x[l - 1]);
  }
  return f;
}

namespace {

std::vector<Matrix> zero_grads(const Network& net) {
  std::vector<Matrix> g;
  for (const auto& w : net.weights()) g.emplace_back(w.rows(), w.cols());
  return g;
}

}  // namespace

std::vector<Matrix> average_gradients(const Network& net, std::span<const GradientFactors> factors) {
  auto g = zero_grads(net);
  if (factors.empty()) return g;
  const double scale = 1.0 / static_cast<double>(factors.size());
  for (const auto& f : factors) {
    for (std::size_t l = 0; l < g.size(); ++l) {
      kernels::add_outer(g[l].span(), g[l].rows(), g[l].cols(), scale, f.u[l].span(),
                         f.x_below[l].span());
    }
  }
  return g;
}

std::vector<Matrix> weight_gradient(const Network& net, const ActivityState& state) {
  const GradientFactors f = weight_gradient_factors(net, state);
  return average_gradients(net, std::span<const GradientFactors>(&f, 1));
}

std::vector<Matrix> lambda_weight_gradient(const Network& net, const ActivityState& state,
                                           double lambda) {
  const auto w = EnergyWeights::lambda(lambda);
  if (lambda == 0.0) return weight_gradient_at(net, state.x, state.x.back());
  auto g = weight_gradient(net, state);
  for (std::size_t l = 0; l < g.size(); ++l) {
    const double c = (l + 1 == g.size() ? w.loss : w.residual) / lambda;
    g[l] *= c;
  }
  return g;
}

double gradient_norm(const std::vector<Matrix>& grads) {
  double s = 0.0;
  for (const auto& g : grads)
    for (double v : g.span()) s += v * v;
  return std::sqrt(s);
}

BoundCheck energy_gradient_bound_check(const Network& net, const ActivityState& state) {
  const auto dl = loss_gradient(net, state);
  const auto de = residual_gradient(net, state);
  BoundCheck b;
  for (std::size_t l : state.free_layers()) {
    b.lhs -= dot(dl[l], de[l]);
    b.rhs += dot(dl[l], dl[l]);
  }
  b.satisfied = b.lhs <= b.rhs + 1e-12;
  return b;
}

Optimizer::Optimizer(double lr, double momentum, bool nesterov)
    : lr_(lr), momentum_(momentum), nesterov_(nesterov) {}

void Optimizer::step(Network& net, const std::vector<Matrix>& grads) {
  if (grads.size() != net.depth()) throw ShapeError("Optimizer::step: one gradient per layer");
  if (velocity_.empty()) velocity_ = zero_grads(net);
  for (std::size_t l = 0; l < grads.size(); ++l) {
    Matrix& w = net.weight(l + 1);
    Matrix& v = velocity_[l];
    const auto g = grads[l].span();
    auto ws = w.span();
    auto vs = v.span();
    if (g.size() != ws.size()) throw ShapeError("Optimizer::step: gradient shape mismatch");
    for (std::size_t i = 0; i < ws.size(); ++i) {
      if (momentum_ == 0.0) {
        ws[i] -= lr_ * g[i];
        continue;
      }
      vs[i] = momentum_ * vs[i] + g[i];
      ws[i] -= lr_ * (nesterov_ ? g[i] + momentum_ * vs[i] : vs[i]);
    }
  }
}

namespace {

struct SampleOutcome {
  GradientFactors pc;
  std::optional<GradientFactors> bp;
  double loss_before = 0.0;
  double loss_after = 0.0;
  std::size_t steps = 0;
  bool converged = true;
  std::size_t bound_violations = 0;
  std::size_t loss_increases = 0;
};

SampleOutcome run_sample(const Network& net, const Vector& input, const Vector& target,
                         const TrainSettings& settings, GradientRule rule, bool want_bp) {
  SampleOutcome out;
  if (rule == GradientRule::Backprop) {
    out.bp = backprop_gradient_factors(net, input, target, &out.loss_before);
    out.loss_after = out.loss_before;
    return out;
  }

  InferenceSettings inf = settings.inference;
  inf.record_activities = false;
  inf.record_trace = settings.loss_monitor;
  std::vector<Probe> probes;
  if (settings.loss_monitor) {
    probes.push_back({"bound_ok", [](const Network& n, const ActivityState& s) {
                        return energy_gradient_bound_check(n, s).satisfied ? 1.0 : 0.0;
                      }});
  }
  ActivityState init = init_activities(net, ClampMode::supervised(input, target), inf.init);
  out.loss_before = energy_report(net, init).output_loss;
  // A feedforward start already holds x̄_0..x̄_{L-1}; the BP sweep only reads those.
  if (want_bp && inf.init.kind == InitMode::Kind::FeedforwardPass) out.bp = backprop_factors_at(net, init.x, target);
  InferenceResult res = run_inference_from(net, std::move(init), inf, probes);
  out.loss_after = energy_report(net, res.state).output_loss;
  out.steps = res.steps;
  out.converged = res.converged;
  for (std::size_t r = 0; r < res.trace.rows.size(); ++r) {
    const auto& row = res.trace.rows[r];
    if (row.probes[0] == 0.0) ++out.bound_violations;
    if (r > 0 && row.energy.output_loss > res.trace.rows[r - 1].energy.output_loss) {
      ++out.loss_increases;
    }
  }
  out.pc = weight_gradient_factors(net, res.state);
  if (want_bp && !out.bp) out.bp = backprop_gradient_factors(net, input, target);
  return out;
}

double matrix_cosine(const Matrix& a, const Matrix& b) {
  return cosine_similarity(Vector(std::vector<double>(a.span().begin(), a.span().end())),
                           Vector(std::vector<double>(b.span().begin(), b.span().end())));
}

StepMetrics train_step(Network& net, const Dataset& data, std::span<const std::size_t> indices,
                       const TrainSettings& settings, Optimizer& optimizer, GradientRule rule) {
  const std::size_t n = indices.size();
  if (n == 0) throw Error("em_train_step: empty batch");
  const bool want_bp = rule == GradientRule::PredictiveCoding && settings.compare_bp;

  std::vector<SampleOutcome> outcomes(n);
  std::vector<std::exception_ptr> errors(n);
  const auto sn = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic) if (n > 1)
  for (std::ptrdiff_t s = 0; s < sn; ++s) {
    const std::size_t idx = indices[static_cast<std::size_t>(s)];
    try {
      outcomes[s] = run_sample(net, data.inputs.at(idx), data.targets.at(idx), settings, rule, want_bp);
    } catch (...) {
      errors[s] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  StepMetrics m;
  m.max_delta_L = -std::numeric_limits<double>::infinity();
  std::vector<GradientFactors> pc, bp;
  for (auto& o : outcomes) {
    m.loss_before += o.loss_before / static_cast<double>(n);
    m.loss_after += o.loss_after / static_cast<double>(n);
    m.max_delta_L = std::max(m.max_delta_L, o.loss_after - o.loss_before);
    m.bound_violations += o.bound_violations;
    m.loss_increases += o.loss_increases;
    m.max_inference_steps = std::max(m.max_inference_steps, o.steps);
    m.all_converged = m.all_converged && o.converged;
    if (rule == GradientRule::PredictiveCoding) pc.push_back(std::move(o.pc));
    if (o.bp) bp.push_back(std::move(*o.bp));
  }

  std::vector<Matrix> grads;
  if (rule == GradientRule::PredictiveCoding) {
    grads = average_gradients(net, pc);
    if (want_bp) {
      const auto bpg = average_gradients(net, bp);
      m.bp_grad_norm = gradient_norm(bpg);
      for (std::size_t l = 0; l < grads.size(); ++l) m.cos_sim.push_back(matrix_cosine(grads[l], bpg[l]));
    }
  } else {
    grads = average_gradients(net, bp);
    m.bp_grad_norm = gradient_norm(grads);
    m.cos_sim.assign(grads.size(), 1.0);
  }
  m.pc_grad_norm = gradient_norm(grads);
  optimizer.step(net, grads);
  return m;
}

}  // namespace

StepMetrics em_train_step(Network& net, const Dataset& data, std::span<const std::size_t> indices,
                          const TrainSettings& settings, Optimizer& optimizer) {
  settings.validate();
  return train_step(net, data, indices, settings, optimizer, GradientRule::PredictiveCoding);
}

namespace {

struct DatasetPass {
  double loss = 0.0;
  double bp_grad_norm = std::numeric_limits<double>::quiet_NaN();
};

// One forward sweep per sample; the loss sum and the gradient reduction both
// run in sample order after the parallel part.
DatasetPass dataset_pass(const Network& net, const Dataset& data, bool want_grad) {
  const std::size_t n = data.size();
  DatasetPass out;
  if (n == 0) return out;
  std::vector<double> losses(n);
  std::vector<GradientFactors> f(want_grad ? n : 0);
  const auto sn = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < sn; ++i) {
    const auto xs = forward_pass(net, data.inputs[i]);
    losses[i] = mse_loss(xs.back(), data.targets[i]);
    if (want_grad) f[i] = backprop_factors_at(net, xs, data.targets[i]);
  }
  for (double l : losses) out.loss += l;
  out.loss /= static_cast<double>(n);
  if (want_grad) out.bp_grad_norm = gradient_norm(average_gradients(net, f));
  return out;
}

}  // namespace

double dataset_loss(const Network& net, const Dataset& data) { return dataset_pass(net, data, false).loss; }

double dataset_bp_grad_norm(const Network& net, const Dataset& data) {
  return data.size() ? dataset_pass(net, data, true).bp_grad_norm : 0.0;
}

double dataset_accuracy(const Network& net, const Dataset& data) {
  if (data.size() == 0) return std::numeric_limits<double>::quiet_NaN();
  std::vector<char> hit(data.size());
  const auto sn = static_cast<std::ptrdiff_t>(data.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < sn; ++i) {
    hit[i] = argmax(forward_pass(net, data.inputs[i]).back()) == argmax(data.targets[i]);
  }
  const auto hits = std::count(hit.begin(), hit.end(), char{1});
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

TrainOutcome train_with_rule(Network& net, const Dataset& train_set, const TrainSettings& settings,
                             GradientRule rule, const Dataset* eval_set) {
  settings.validate();
  train_set.validate();
  if (train_set.size() == 0) throw Error("train: empty dataset");

  TrainOutcome outcome;
  Optimizer opt(settings.weight_lr, settings.momentum, settings.nesterov);
  std::mt19937_64 rng(settings.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t batch =
      settings.batch_size == 0 ? train_set.size() : std::min(settings.batch_size, train_set.size());

  for (std::size_t epoch = 1; epoch <= settings.epochs; ++epoch) {
    if (settings.shuffle) std::shuffle(order.begin(), order.end(), rng);
    TrainRecord rec;
    rec.epoch = epoch;
    rec.delta_L_inference = -std::numeric_limits<double>::infinity();
    rec.cos_sim.assign(net.depth(), 0.0);
    std::size_t updates = 0;
    try {
      for (std::size_t begin = 0; begin < order.size(); begin += batch) {
        const std::size_t count = std::min(batch, order.size() - begin);
        const auto m = train_step(net, train_set, std::span(order).subspan(begin, count), settings,
                                  opt, rule);
        ++updates;
        rec.pc_grad_norm += m.pc_grad_norm;
        rec.delta_L_inference = std::max(rec.delta_L_inference, m.max_delta_L);
        rec.bound_violations += m.bound_violations;
        rec.loss_increases += m.loss_increases;
        for (std::size_t l = 0; l < m.cos_sim.size(); ++l) rec.cos_sim[l] += m.cos_sim[l];
      }
      for (const auto& w : net.weights()) {
        if (!all_finite(w.span())) throw DivergenceError(epoch, "train: non-finite weights");
      }
    } catch (const DivergenceError& e) {
      outcome.diverged = true;
      outcome.divergence_message = e.what();
      return outcome;
    }
    rec.pc_grad_norm /= static_cast<double>(updates);
    for (double& c : rec.cos_sim) c /= static_cast<double>(updates);
    if (!settings.compare_bp && rule == GradientRule::PredictiveCoding) {
      rec.cos_sim.assign(net.depth(), std::numeric_limits<double>::quiet_NaN());
    }
    const DatasetPass pass = dataset_pass(net, train_set, settings.record_bp_grad_norm);
    rec.loss = pass.loss;
    rec.bp_grad_norm = pass.bp_grad_norm;
    rec.accuracy = settings.record_accuracy
                       ? dataset_accuracy(net, eval_set ? *eval_set : train_set)
                       : std::numeric_limits<double>::quiet_NaN();
    if (!std::isfinite(rec.loss)) {
      outcome.diverged = true;
      outcome.divergence_message = "train: non-finite loss at epoch " + std::to_string(epoch);
      return outcome;
    }
    outcome.records.push_back(std::move(rec));
  }
  return outcome;
}

TrainOutcome train(Network& net, const Dataset& train_set, const TrainSettings& settings,
                   const Dataset* eval_set) {
  return train_with_rule(net, train_set, settings, GradientRule::PredictiveCoding, eval_set);
}

void write_train_csv(const TrainOutcome& outcome, std::size_t depth, std::ostream& out) {
  CsvWriter csv(out);
  std::vector<std::string> header{"epoch", "loss", "bp_grad_norm", "pc_grad_norm", "accuracy",
                                  "delta_L_inference"};
  for (std::size_t l = 1; l <= depth; ++l) header.push_back("cos_sim_layer_" + std::to_string(l));
  csv.header(header);
  for (const auto& r : outcome.records) {
    csv.field(r.epoch).field(r.loss).field(r.bp_grad_norm).field(r.pc_grad_norm).field(r.accuracy);
    csv.field(r.delta_L_inference);
    for (std::size_t l = 0; l < depth; ++l) {
      csv.field(l < r.cos_sim.size() ? r.cos_sim[l] : std::numeric_limits<double>::quiet_NaN());
    }
    csv.end_row();
  }
}

}  // namespace pcn
