#pragma once

// Trace probes addressable by name. Reference-based probes need the
// matching reference in the context.
//
//   cos_eps_bp_l<k>    cosine(ε_k, -δ_k)     needs bp_adjoints
//   cos_x_tp_l<k>      cosine(x_k, t_k)      needs tp_targets
//   dist_tp_l<k>       ‖x_k - t_k‖           needs tp_targets
//   dist_ff_l<k>       ‖x_k - x̄_k‖           needs feedforward
//   dist_tp, dist_ff, dist_eq   distance over the free layers
//   marginal_residual  marginal_condition_residual
//   bound_lhs, bound_rhs, bound_ok   energy-gradient bound terms
//   F_lambda           λ-weighted energy      needs lambda

#include <optional>
#include <string>
#include <vector>

#include "pcn/inference.hpp"

namespace pcn {

struct ProbeContext {
  std::optional<std::vector<Vector>> bp_adjoints;
  std::optional<std::vector<Vector>> tp_targets;
  std::optional<std::vector<Vector>> feedforward;
  std::optional<std::vector<Vector>> equilibrium;
  std::optional<double> lambda;
};

class UnknownProbeError : public Error {
 public:
  using Error::Error;
};

Probe make_probe(const std::string& name, const ProbeContext& ctx);
std::vector<Probe> make_probes(const std::vector<std::string>& names, const ProbeContext& ctx);

}  // namespace pcn
