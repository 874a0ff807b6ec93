#include "pcn/network.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <random>

namespace pcn {

std::string_view to_string(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::Linear: return "linear";
    case ActivationKind::Tanh: return "tanh";
    case ActivationKind::ReLU: return "relu";
  }
  return "unknown";
}

ActivationKind activation_from_string(std::string_view name) {
  if (name == "linear" || name == "identity") return ActivationKind::Linear;
  if (name == "tanh") return ActivationKind::Tanh;
  if (name == "relu") return ActivationKind::ReLU;
  throw Error("unknown activation '" + std::string(name) + "'");
}

bool is_invertible(ActivationKind kind) { return kind != ActivationKind::ReLU; }

NetworkSpec NetworkSpec::uniform(std::vector<std::size_t> widths, ActivationKind hidden,
                                 ActivationKind output, double weight_init_std,
                                 std::uint64_t seed) {
  NetworkSpec spec;
  spec.layer_widths = std::move(widths);
  const std::size_t depth = spec.layer_widths.empty() ? 0 : spec.layer_widths.size() - 1;
  spec.activations.assign(depth, hidden);
  if (depth > 0) spec.activations.back() = output;
  spec.weight_init_std = weight_init_std;
  spec.seed = seed;
  return spec;
}

void NetworkSpec::validate() const {
  if (layer_widths.size() < 2) throw Error("NetworkSpec: at least 2 layers required");
  if (std::any_of(layer_widths.begin(), layer_widths.end(), [](std::size_t w) { return w == 0; })) {
    throw Error("NetworkSpec: layer widths must be >= 1");
  }
  if (activations.size() != layer_widths.size() - 1) {
    throw Error("NetworkSpec: need one activation per weight layer");
  }
  if (!(weight_init_std >= 0.0) || !std::isfinite(weight_init_std)) {
    throw Error("NetworkSpec: weight_init_std must be finite and >= 0");
  }
}

Network::Network(std::vector<Matrix> weights, std::vector<ActivationKind> activations)
    : weights_(std::move(weights)), activations_(std::move(activations)) {
  if (weights_.empty()) throw Error("Network: at least one weight layer required");
  if (activations_.size() != weights_.size()) {
    throw Error("Network: need one activation per weight layer");
  }
  for (std::size_t l = 1; l < weights_.size(); ++l) {
    if (weights_[l].cols() != weights_[l - 1].rows()) {
      throw ShapeError("Network: W_" + std::to_string(l + 1) + " has " +
                       std::to_string(weights_[l].cols()) + " columns, layer " + std::to_string(l) +
                       " has width " + std::to_string(weights_[l - 1].rows()));
    }
  }
  precisions_.reserve(weights_.size());
  for (const auto& w : weights_) precisions_.push_back(Matrix::identity(w.rows()));
}

std::size_t Network::width(std::size_t layer) const {
  if (layer == 0) return weights_.front().cols();
  return weights_.at(layer - 1).rows();
}

std::vector<std::size_t> Network::widths() const {
  std::vector<std::size_t> w;
  for (std::size_t l = 0; l <= depth(); ++l) w.push_back(width(l));
  return w;
}

void Network::set_weight(std::size_t l, Matrix w) {
  const Matrix& old = weight(l);
  if (w.rows() != old.rows() || w.cols() != old.cols()) {
    throw ShapeError("set_weight: shape mismatch for W_" + std::to_string(l));
  }
  weights_.at(l - 1) = std::move(w);
}

void Network::set_precision(std::size_t l, Matrix p) {
  if (p.rows() != width(l) || p.cols() != width(l)) {
    throw ShapeError("set_precision: Π_" + std::to_string(l) + " must be " +
                     std::to_string(width(l)) + "x" + std::to_string(width(l)));
  }
  if (!is_symmetric(p, 1e-10)) throw ShapeError("set_precision: matrix is not symmetric");
  if (!(min_eigenvalue_symmetric(p) > 0.0)) {
    throw DefinitenessError("set_precision: matrix is not positive definite");
  }
  precisions_.at(l - 1) = std::move(p);
  refresh_identity_flag();
}

void Network::refresh_identity_flag() {
  identity_precisions_ = std::all_of(precisions_.begin(), precisions_.end(), [](const Matrix& p) {
    return p == Matrix::identity(p.rows());
  });
}

Network build_network(const NetworkSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Matrix> weights;
  for (std::size_t l = 1; l < spec.layer_widths.size(); ++l) {
    Matrix w(spec.layer_widths[l], spec.layer_widths[l - 1]);
    for (double& v : w.span()) v = spec.weight_init_std * normal(rng);
    weights.push_back(std::move(w));
  }
  return Network(std::move(weights), spec.activations);
}

Vector activation_apply(ActivationKind kind, const Vector& v) {
  Vector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    switch (kind) {
      case ActivationKind::Linear: out[i] = v[i]; break;
      case ActivationKind::Tanh: out[i] = std::tanh(v[i]); break;
      case ActivationKind::ReLU: out[i] = v[i] > 0.0 ? v[i] : 0.0; break;
    }
  }
  return out;
}

Vector activation_derivative(ActivationKind kind, const Vector& preact) {
  Vector out(preact.size());
  for (std::size_t i = 0; i < preact.size(); ++i) {
    switch (kind) {
      case ActivationKind::Linear: out[i] = 1.0; break;
      case ActivationKind::Tanh: {
        const double t = std::tanh(preact[i]);
        out[i] = 1.0 - t * t;
        break;
      }
      // f'(0) = 0 by convention.
      case ActivationKind::ReLU: out[i] = preact[i] > 0.0 ? 1.0 : 0.0; break;
    }
  }
  return out;
}

Vector activation_inverse(ActivationKind kind, const Vector& v) {
  constexpr double kTanhBand = 1.0 - 1e-12;
  switch (kind) {
    case ActivationKind::Linear: return v;
    case ActivationKind::ReLU:
      throw NonInvertibleActivationError("activation_inverse: relu is not invertible");
    case ActivationKind::Tanh: {
      Vector out(v.size());
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (!(std::abs(v[i]) < 1.0)) {
          throw DomainError("activation_inverse: tanh input " + std::to_string(v[i]) +
                            " outside (-1, 1)");
        }
        const double clipped = std::clamp(v[i], -kTanhBand, kTanhBand);
        out[i] = std::atanh(clipped);
      }
      return out;
    }
  }
  throw Error("activation_inverse: unknown activation");
}

std::vector<Vector> forward_pass(const Network& net, const Vector& input) {
  if (input.size() != net.width(0)) {
    throw ShapeError("forward_pass: input length " + std::to_string(input.size()) +
                     ", network expects " + std::to_string(net.width(0)));
  }
  std::vector<Vector> xs;
  xs.reserve(net.depth() + 1);
  xs.push_back(input);
  for (std::size_t l = 1; l <= net.depth(); ++l) {
    xs.push_back(activation_apply(net.activation(l), net.weight(l) * xs.back()));
  }
  return xs;
}

// ---------------------------------------------------------------- serialization

namespace {

constexpr char kMagic[4] = {'P', 'C', 'N', '1'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double d) {
  const auto bits = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw Error("deserialize_network: truncated container");
  }
  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
    return std::bit_cast<double>(bits);
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

Matrix read_matrix(Reader& in, std::size_t rows, std::size_t cols) {
  std::vector<double> entries(rows * cols);
  for (double& v : entries) v = in.f64();
  return Matrix(rows, cols, std::move(entries));
}

}  // namespace

std::vector<std::uint8_t> serialize_network(const Network& net) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  const auto widths = net.widths();
  put_u32(out, static_cast<std::uint32_t>(widths.size()));
  for (auto w : widths) put_u32(out, static_cast<std::uint32_t>(w));
  out.push_back(static_cast<std::uint8_t>(ActivationKind::Linear));
  for (auto a : net.activations()) out.push_back(static_cast<std::uint8_t>(a));
  for (const auto& w : net.weights())
    for (double v : w.span()) put_f64(out, v);
  for (std::size_t l = 1; l <= net.depth(); ++l)
    for (double v : net.precision(l).span()) put_f64(out, v);
  return out;
}

Network deserialize_network(const std::vector<std::uint8_t>& bytes) {
  Reader in(bytes);
  in.need(4);
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw Error("deserialize_network: bad magic");
  for (int i = 0; i < 4; ++i) in.u8();
  const std::uint32_t count = in.u32();
  if (count < 2) throw Error("deserialize_network: fewer than 2 layers");
  std::vector<std::size_t> widths(count);
  for (auto& w : widths) {
    w = in.u32();
    if (w == 0) throw Error("deserialize_network: zero layer width");
  }
  std::vector<ActivationKind> acts;
  in.u8();  // input layer code, unused
  for (std::uint32_t l = 1; l < count; ++l) {
    const std::uint8_t code = in.u8();
    if (code > static_cast<std::uint8_t>(ActivationKind::ReLU)) {
      throw Error("deserialize_network: unknown activation code " + std::to_string(code));
    }
    acts.push_back(static_cast<ActivationKind>(code));
  }
  std::vector<Matrix> weights;
  for (std::uint32_t l = 1; l < count; ++l) weights.push_back(read_matrix(in, widths[l], widths[l - 1]));
  Network net(std::move(weights), std::move(acts));
  for (std::uint32_t l = 1; l < count; ++l) {
    Matrix p = read_matrix(in, widths[l], widths[l]);
    if (!(p == Matrix::identity(widths[l]))) net.set_precision(l, std::move(p));
  }
  if (!in.done()) throw Error("deserialize_network: trailing bytes");
  return net;
}

void save_network(const Network& net, const std::filesystem::path& path) {
  const auto bytes = serialize_network(net);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("save_network: cannot open " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("save_network: write failed for " + path.string());
}

Network load_network(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("load_network: cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_network(bytes);
}

}  // namespace pcn
