#include "pcn/probes.hpp"

#include <charconv>
#include <memory>

#include "pcn/learning.hpp"

namespace pcn {

namespace {

using Ref = std::shared_ptr<const std::vector<Vector>>;

Ref need(const std::optional<std::vector<Vector>>& ref, const std::string& probe, const char* what) {
  if (!ref) throw Error("probe '" + probe + "' needs " + what);
  return std::make_shared<const std::vector<Vector>>(*ref);
}

std::optional<std::size_t> layer_suffix(const std::string& name, const std::string& prefix) {
  if (name.rfind(prefix, 0) != 0) return std::nullopt;
  std::size_t k = 0;
  const char* b = name.data() + prefix.size();
  const char* e = name.data() + name.size();
  auto [ptr, ec] = std::from_chars(b, e, k);
  if (ec != std::errc() || ptr != e || b == e) return std::nullopt;
  return k;
}

void check_layer(const Ref& ref, std::size_t k, const std::string& name) {
  if (k >= ref->size()) throw Error("probe '" + name + "': no layer " + std::to_string(k));
}

double free_distance(const ActivityState& s, const std::vector<Vector>& ref) {
  const auto layers = s.free_layers();
  return distance_to_reference(s, ref, layers);
}

}  // namespace

Probe make_probe(const std::string& name, const ProbeContext& ctx) {
  if (auto k = layer_suffix(name, "cos_eps_bp_l")) {
    auto ref = need(ctx.bp_adjoints, name, "BP adjoints");
    check_layer(ref, *k, name);
    if (*k == 0) throw Error("probe '" + name + "': layer 0 has no error");
    return {name, [ref, l = *k](const Network&, const ActivityState& s) {
              return cosine_similarity(s.errors[l], -1.0 * (*ref)[l]);
            }};
  }
  if (auto k = layer_suffix(name, "cos_x_tp_l")) {
    auto ref = need(ctx.tp_targets, name, "TP targets");
    check_layer(ref, *k, name);
    return {name, [ref, l = *k](const Network&, const ActivityState& s) {
              return cosine_similarity(s.x[l], (*ref)[l]);
            }};
  }
  if (auto k = layer_suffix(name, "dist_tp_l")) {
    auto ref = need(ctx.tp_targets, name, "TP targets");
    check_layer(ref, *k, name);
    return {name, [ref, l = *k](const Network&, const ActivityState& s) {
              return norm2(s.x[l] - (*ref)[l]);
            }};
  }
  if (auto k = layer_suffix(name, "dist_ff_l")) {
    auto ref = need(ctx.feedforward, name, "feedforward values");
    check_layer(ref, *k, name);
    return {name, [ref, l = *k](const Network&, const ActivityState& s) {
              return norm2(s.x[l] - (*ref)[l]);
            }};
  }
  if (name == "dist_tp" || name == "dist_ff" || name == "dist_eq") {
    const auto& src = name == "dist_tp" ? ctx.tp_targets
                      : name == "dist_ff" ? ctx.feedforward
                                          : ctx.equilibrium;
    auto ref = need(src, name, "a reference");
    return {name, [ref](const Network&, const ActivityState& s) { return free_distance(s, *ref); }};
  }
  if (name == "marginal_residual") {
    return {name, [](const Network& n, const ActivityState& s) { return marginal_condition_residual(n, s); }};
  }
  if (name == "bound_lhs") {
    return {name, [](const Network& n, const ActivityState& s) { return energy_gradient_bound_check(n, s).lhs; }};
  }
  if (name == "bound_rhs") {
    return {name, [](const Network& n, const ActivityState& s) { return energy_gradient_bound_check(n, s).rhs; }};
  }
  if (name == "bound_ok") {
    return {name, [](const Network& n, const ActivityState& s) {
              return energy_gradient_bound_check(n, s).satisfied ? 1.0 : 0.0;
            }};
  }
  if (name == "F_lambda") {
    if (!ctx.lambda) throw Error("probe 'F_lambda' needs lambda");
    return {name, [lam = *ctx.lambda](const Network& n, const ActivityState& s) {
              return lambda_energy(energy_report(n, s), lam);
            }};
  }
  throw UnknownProbeError("unknown probe '" + name + "'");
}

std::vector<Probe> make_probes(const std::vector<std::string>& names, const ProbeContext& ctx) {
  std::vector<Probe> out;
  out.reserve(names.size());
  for (const auto& n : names) out.push_back(make_probe(n, ctx));
  return out;
}

}  // namespace pcn
