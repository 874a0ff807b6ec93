#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "pcn/linalg.hpp"

namespace pcn {

enum class ActivationKind : std::uint8_t { Linear = 0, Tanh = 1, ReLU = 2 };

std::string_view to_string(ActivationKind kind);
ActivationKind activation_from_string(std::string_view name);
bool is_invertible(ActivationKind kind);

class NonInvertibleActivationError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

// Layer l (1..L) predicts x_l = f_l(W_l x_{l-1}); activations[l-1] is f_l.
struct NetworkSpec {
  std::vector<std::size_t> layer_widths;     // w_0 .. w_L
  std::vector<ActivationKind> activations;   // f_1 .. f_L
  double weight_init_std = 0.0;
  std::uint64_t seed = 0;

  // Every hidden layer uses `hidden`, the output layer uses `output`.
  static NetworkSpec uniform(std::vector<std::size_t> widths, ActivationKind hidden,
                             ActivationKind output = ActivationKind::Linear,
                             double weight_init_std = 0.0, std::uint64_t seed = 0);

  void validate() const;
};

class Network {
 public:
  Network() = default;
  // weights[l-1] is W_l; precisions default to identity.
  Network(std::vector<Matrix> weights, std::vector<ActivationKind> activations);

  // Number of weight layers L (activity layers are 0..L).
  std::size_t depth() const { return weights_.size(); }
  std::size_t width(std::size_t layer) const;
  std::vector<std::size_t> widths() const;

  const Matrix& weight(std::size_t l) const { return weights_.at(l - 1); }
  Matrix& weight(std::size_t l) { return weights_.at(l - 1); }
  void set_weight(std::size_t l, Matrix w);

  const Matrix& precision(std::size_t l) const { return precisions_.at(l - 1); }
  // Validates symmetry and positive definiteness.
  void set_precision(std::size_t l, Matrix p);
  bool identity_precisions() const { return identity_precisions_; }

  ActivationKind activation(std::size_t l) const { return activations_.at(l - 1); }
  const std::vector<ActivationKind>& activations() const { return activations_; }
  const std::vector<Matrix>& weights() const { return weights_; }

  bool operator==(const Network& o) const = default;

 private:
  void refresh_identity_flag();

  std::vector<Matrix> weights_;
  std::vector<Matrix> precisions_;
  std::vector<ActivationKind> activations_;
  bool identity_precisions_ = true;
};

// Weights are i.i.d. N(0, weight_init_std²) from a seeded mt19937_64,
// drawn layer by layer in row-major order.
Network build_network(const NetworkSpec& spec);

Vector activation_apply(ActivationKind kind, const Vector& v);
Vector activation_derivative(ActivationKind kind, const Vector& preact);
// Tanh inputs must lie in (-1, 1); they are clipped to |v| <= 1 - 1e-12
// before atanh. Inputs at or beyond ±1 raise DomainError.
Vector activation_inverse(ActivationKind kind, const Vector& v);

// Returns x̄_0..x̄_L with x̄_0 = input and x̄_l = f_l(W_l x̄_{l-1}).
std::vector<Vector> forward_pass(const Network& net, const Vector& input);

// Flat little-endian container:
//   "PCN1" | u32 activity layer count (L+1) | u32 widths[L+1]
//   | u8 activation codes[L+1] (code 0 for the input layer)
//   | f64 W_1..W_L row-major | f64 Π_1..Π_L row-major
std::vector<std::uint8_t> serialize_network(const Network& net);
Network deserialize_network(const std::vector<std::uint8_t>& bytes);
void save_network(const Network& net, const std::filesystem::path& path);
Network load_network(const std::filesystem::path& path);

}  // namespace pcn
