#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pcn/linalg.hpp"

namespace pcn {

struct Dataset {
  std::vector<Vector> inputs;
  std::vector<Vector> targets;
  std::string name;

  std::size_t size() const { return inputs.size(); }
  std::size_t input_dim() const { return inputs.empty() ? 0 : inputs.front().size(); }
  std::size_t target_dim() const { return targets.empty() ? 0 : targets.front().size(); }

  // Equal counts and uniform lengths.
  void validate() const;
  // Samples [begin, begin + count).
  Dataset slice(std::size_t begin, std::size_t count) const;
};

class DataFormatError : public Error {
 public:
  using Error::Error;
};

// inputs ~ N(1, 1), targets ~ N(-1, 1), elementwise, from one seeded stream.
Dataset synthetic_gaussian(std::size_t n, std::size_t in_dim, std::size_t out_dim, std::uint64_t seed);

inline constexpr std::uint32_t kIdxImageMagic = 2051;  // 00 00 08 03
inline constexpr std::uint32_t kIdxLabelMagic = 2049;  // 00 00 08 01

struct IdxImages {
  std::uint32_t count = 0, rows = 0, cols = 0;
  std::vector<std::uint8_t> pixels;
};

IdxImages parse_idx_images(const std::vector<std::uint8_t>& bytes, std::optional<std::size_t> limit = {});
std::vector<std::uint8_t> parse_idx_labels(const std::vector<std::uint8_t>& bytes,
                                           std::optional<std::size_t> limit = {});

// Pixels scaled to [0, 1] by /255; labels one-hot over 10 classes.
Dataset load_mnist_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                       std::optional<std::size_t> limit = {});

// One row per sample: x_0..x_{n-1}, then t_0..t_{m-1}.
void write_dataset_csv(const Dataset& data, std::ostream& out);

// Index of the largest entry (first on ties).
std::size_t argmax(const Vector& v);

}  // namespace pcn
