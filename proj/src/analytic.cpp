#include "pcn/analytic.hpp"

#include <algorithm>
#include <cmath>

#include "pcn/state.hpp"
#include "pcn/metrics.hpp"

namespace pcn {

namespace {

Matrix shifted_gram(const Matrix& w) {
  Matrix a = w.transpose() * w;
  for (std::size_t i = 0; i < a.rows(); ++i) a(i, i) += 1.0;
  return a;
}

void require_linear(const Network& net, const char* who) {
  for (auto a : net.activations()) {
    if (a != ActivationKind::Linear) throw Error(std::string(who) + ": all activations must be linear");
  }
}

}  // namespace

Vector linear_equilibrium_layer(const Matrix& w_l, const Matrix& w_lp1, const Vector& x_below,
                                const Vector& x_above) {
  if (w_lp1.cols() != w_l.rows()) throw ShapeError("linear_equilibrium_layer: W_l / W_{l+1} mismatch");
  return solve_spd(shifted_gram(w_lp1), w_l * x_below + transpose_times(w_lp1, x_above));
}

Vector precision_equilibrium_layer(const Matrix& w_l, const Matrix& w_lp1, const Matrix& pi_l,
                                   const Matrix& pi_lp1, const Vector& x_below,
                                   const Vector& x_above) {
  if (w_lp1.cols() != w_l.rows()) throw ShapeError("precision_equilibrium_layer: W_l / W_{l+1} mismatch");
  // M = Π_l⁻¹ W_{l+1}ᵀ Π_{l+1}
  const Matrix m = solve_general(pi_l, w_lp1.transpose() * pi_lp1);
  Matrix a = m * w_lp1;
  for (std::size_t i = 0; i < a.rows(); ++i) a(i, i) += 1.0;
  return solve_general(a, w_l * x_below + m * x_above);
}

namespace {

double stationarity_residual(const Network& net, const std::vector<Vector>& xs) {
  const ActivityState st = make_state(net, xs, true, true);
  const auto g = half_energy_gradient(net, st, EnergyWeights::standard(), true);
  double r = 0.0;
  for (std::size_t l = 1; l < net.depth(); ++l) r = std::max(r, norm_inf(g[l]));
  return r;
}

std::vector<Vector> direct_solve(const Network& net, const Vector& data, const Vector& target) {
  const std::size_t depth = net.depth();
  std::vector<std::size_t> offset(depth + 1, 0);
  for (std::size_t l = 1; l < depth; ++l) offset[l + 1] = offset[l] + net.width(l);
  const std::size_t n = offset[depth];

  Matrix a(n, n);
  Vector b(n);
  auto put = [&](std::size_t r0, std::size_t c0, const Matrix& block) {
    for (std::size_t i = 0; i < block.rows(); ++i)
      for (std::size_t j = 0; j < block.cols(); ++j) a(r0 + i, c0 + j) = block(i, j);
  };
  for (std::size_t l = 1; l < depth; ++l) {
    const Matrix& w_up = net.weight(l + 1);
    const Matrix wt_pi = w_up.transpose() * net.precision(l + 1);
    put(offset[l], offset[l], net.precision(l) + wt_pi * w_up);
    if (l + 1 < depth) {
      const Matrix off = -1.0 * wt_pi;
      put(offset[l], offset[l + 1], off);
      put(offset[l + 1], offset[l], off.transpose());
    }
  }
  const Vector b_first = net.precision(1) * (net.weight(1) * data);
  for (std::size_t i = 0; i < b_first.size(); ++i) b[offset[1] + i] += b_first[i];
  const Vector b_last = transpose_times(net.weight(depth), net.precision(depth) * target);
  for (std::size_t i = 0; i < b_last.size(); ++i) b[offset[depth - 1] + i] += b_last[i];

  // Symmetrize away rounding in the assembled products before Cholesky.
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) a(i, j) = a(j, i) = 0.5 * (a(i, j) + a(j, i));

  const Vector x = solve_spd(a, b);
  std::vector<Vector> xs(depth + 1);
  xs[0] = data;
  xs[depth] = target;
  for (std::size_t l = 1; l < depth; ++l) {
    Vector v(net.width(l));
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = x[offset[l] + i];
    xs[l] = std::move(v);
  }
  return xs;
}

}  // namespace

EquilibriumSolution solve_linear_network_equilibrium(const Network& net, const Vector& data,
                                                     const Vector& target, EquilibriumMethod method,
                                                     double tol, std::size_t max_sweeps) {
  require_linear(net, "solve_linear_network_equilibrium");
  if (data.size() != net.width(0) || target.size() != net.width(net.depth())) {
    throw ShapeError("solve_linear_network_equilibrium: data/target length mismatch");
  }
  EquilibriumSolution sol;
  sol.method = method;
  const std::size_t depth = net.depth();
  if (method == EquilibriumMethod::DirectSolve) {
    sol.activities = depth > 1 ? direct_solve(net, data, target) : std::vector<Vector>{data, target};
  } else {
    auto xs = forward_pass(net, data);
    xs[depth] = target;
    const bool prec = !net.identity_precisions();
    for (;;) {
      if (sol.sweeps == max_sweeps) {
        throw ConvergenceError("solve_linear_network_equilibrium: Gauss-Seidel did not converge in " +
                               std::to_string(max_sweeps) + " sweeps");
      }
      ++sol.sweeps;
      double change = 0.0;
      for (std::size_t l = 1; l < depth; ++l) {
        Vector next = prec ? precision_equilibrium_layer(net.weight(l), net.weight(l + 1),
                                                         net.precision(l), net.precision(l + 1),
                                                         xs[l - 1], xs[l + 1])
                           : linear_equilibrium_layer(net.weight(l), net.weight(l + 1), xs[l - 1],
                                                      xs[l + 1]);
        change = std::max(change, norm_inf(next - xs[l]));
        xs[l] = std::move(next);
      }
      if (change < tol) break;
    }
    sol.activities = std::move(xs);
  }
  sol.residual = stationarity_residual(net, sol.activities);
  return sol;
}

Vector path_to_convergence(const Matrix& w_l, const Matrix& w_lp1, const Vector& x_below,
                           const Vector& x_above, const Vector& x0, double t) {
  const Vector star = linear_equilibrium_layer(w_l, w_lp1, x_below, x_above);
  if (x0.size() != star.size()) throw ShapeError("path_to_convergence: x0 length mismatch");
  return matrix_exponential(shifted_gram(w_lp1), -t) * (x0 - star) + star;
}

ConvexityCertificate convexity_certificate(const Network& net) {
  require_linear(net, "convexity_certificate");
  ConvexityCertificate c;
  for (std::size_t l = 1; l < net.depth(); ++l) {
    const double e = min_eigenvalue_symmetric(shifted_gram(net.weight(l + 1)));
    c.min_eigs.push_back(e);
    c.convex = c.convex && e >= 1.0 - 1e-9;
  }
  return c;
}

double zero_error_residual(const Network& net, const std::vector<Vector>& activities) {
  if (activities.size() != net.depth() + 1) throw ShapeError("zero_error_residual: need x_0..x_L");
  double r = 0.0;
  for (std::size_t l = 1; l < net.depth(); ++l) {
    const Vector ff = net.weight(l) * activities[l - 1];
    const Vector fb = pseudoinverse(net.weight(l + 1)) * activities[l + 1];
    r = std::max(r, norm_inf(ff - fb));
  }
  return r;
}

}  // namespace pcn
