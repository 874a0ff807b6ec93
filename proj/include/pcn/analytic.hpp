#pragma once

// Closed-form equilibria of linear networks and related certificates.

#include <vector>

#include "pcn/network.hpp"

namespace pcn {

// (I + W_{l+1}ᵀW_{l+1})⁻¹ [W_l x_below + W_{l+1}ᵀ x_above]
Vector linear_equilibrium_layer(const Matrix& w_l, const Matrix& w_lp1, const Vector& x_below,
                                const Vector& x_above);

// (I + Π_l⁻¹W_{l+1}ᵀΠ_{l+1}W_{l+1})⁻¹ [W_l x_below + Π_l⁻¹W_{l+1}ᵀΠ_{l+1} x_above].
// The prefactor is not symmetric in general, so this uses LU.
Vector precision_equilibrium_layer(const Matrix& w_l, const Matrix& w_lp1, const Matrix& pi_l,
                                   const Matrix& pi_lp1, const Vector& x_below,
                                   const Vector& x_above);

enum class EquilibriumMethod { DirectSolve, GaussSeidel };

struct EquilibriumSolution {
  std::vector<Vector> activities;  // x*_0..x*_L
  double residual = 0.0;           // sup-norm of ½∂F/∂x over hidden layers
  EquilibriumMethod method = EquilibriumMethod::DirectSolve;
  std::size_t sweeps = 0;          // GaussSeidel only
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

// Both ends clamped, all activations linear. Honours the network's
// precisions. DirectSolve factors the block-tridiagonal stationarity
// system by Cholesky; GaussSeidel sweeps the layer formula upward until
// the largest change is below `tol`.
EquilibriumSolution solve_linear_network_equilibrium(const Network& net, const Vector& data,
                                                     const Vector& target,
                                                     EquilibriumMethod method = EquilibriumMethod::DirectSolve,
                                                     double tol = 1e-12, std::size_t max_sweeps = 200000);

// Fixed-neighbour trajectory x(t) = e^{-At}(x0 - x*) + x*, A = I + W_{l+1}ᵀW_{l+1}.
Vector path_to_convergence(const Matrix& w_l, const Matrix& w_lp1, const Vector& x_below,
                           const Vector& x_above, const Vector& x0, double t);

struct ConvexityCertificate {
  std::vector<double> min_eigs;  // hidden layers 1..L-1
  bool convex = true;
};

// Smallest eigenvalue of I + W_{l+1}ᵀW_{l+1} per hidden layer of a linear net.
ConvexityCertificate convexity_certificate(const Network& net);

// max over hidden l of ‖W_l x_{l-1} - W_{l+1}⁺ x_{l+1}‖∞.
double zero_error_residual(const Network& net, const std::vector<Vector>& activities);

}  // namespace pcn
