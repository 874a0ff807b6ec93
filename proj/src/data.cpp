#include "pcn/data.hpp"

#include <fstream>
#include <iterator>
#include <ostream>
#include <random>

#include "pcn/csv.hpp"

namespace pcn {

void Dataset::validate() const {
  if (inputs.size() != targets.size()) throw Error("Dataset: input/target count mismatch");
  for (const auto& x : inputs)
    if (x.size() != input_dim()) throw ShapeError("Dataset: ragged inputs");
  for (const auto& t : targets)
    if (t.size() != target_dim()) throw ShapeError("Dataset: ragged targets");
}

Dataset Dataset::slice(std::size_t begin, std::size_t count) const {
  if (begin + count > size()) throw Error("Dataset::slice: out of range");
  Dataset out;
  out.name = name;
  const auto b = static_cast<std::ptrdiff_t>(begin);
  const auto e = static_cast<std::ptrdiff_t>(begin + count);
  out.inputs.assign(inputs.begin() + b, inputs.begin() + e);
  out.targets.assign(targets.begin() + b, targets.begin() + e);
  return out;
}

Dataset synthetic_gaussian(std::size_t n, std::size_t in_dim, std::size_t out_dim, std::uint64_t seed) {
  if (n < 1) throw Error("synthetic_gaussian: n must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> in_dist(1.0, 1.0);
  std::normal_distribution<double> out_dist(-1.0, 1.0);
  Dataset d;
  d.name = "synthetic";
  for (std::size_t s = 0; s < n; ++s) {
    Vector x(in_dim), t(out_dim);
    for (double& v : x) v = in_dist(rng);
    for (double& v : t) v = out_dist(rng);
    d.inputs.push_back(std::move(x));
    d.targets.push_back(std::move(t));
  }
  return d;
}

namespace {

std::uint32_t read_be32(const std::vector<std::uint8_t>& b, std::size_t off) {
  if (off + 4 > b.size()) throw DataFormatError("IDX: truncated header");
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) |
         (std::uint32_t{b[off + 2]} << 8) | std::uint32_t{b[off + 3]};
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

IdxImages parse_idx_images(const std::vector<std::uint8_t>& bytes, std::optional<std::size_t> limit) {
  const std::uint32_t magic = read_be32(bytes, 0);
  if (magic != kIdxImageMagic) {
    throw DataFormatError("IDX images: bad magic " + std::to_string(magic));
  }
  IdxImages img;
  img.count = read_be32(bytes, 4);
  img.rows = read_be32(bytes, 8);
  img.cols = read_be32(bytes, 12);
  const std::size_t pixels = std::size_t{img.rows} * img.cols;
  if (bytes.size() < 16 + std::size_t{img.count} * pixels) {
    throw DataFormatError("IDX images: truncated file");
  }
  if (limit && *limit < img.count) img.count = static_cast<std::uint32_t>(*limit);
  const auto begin = bytes.begin() + 16;
  img.pixels.assign(begin, begin + static_cast<std::ptrdiff_t>(std::size_t{img.count} * pixels));
  return img;
}

std::vector<std::uint8_t> parse_idx_labels(const std::vector<std::uint8_t>& bytes,
                                           std::optional<std::size_t> limit) {
  const std::uint32_t magic = read_be32(bytes, 0);
  if (magic != kIdxLabelMagic) {
    throw DataFormatError("IDX labels: bad magic " + std::to_string(magic));
  }
  std::size_t count = read_be32(bytes, 4);
  if (bytes.size() < 8 + count) throw DataFormatError("IDX labels: truncated file");
  if (limit && *limit < count) count = *limit;
  return {bytes.begin() + 8, bytes.begin() + 8 + static_cast<std::ptrdiff_t>(count)};
}

Dataset load_mnist_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                       std::optional<std::size_t> limit) {
  const auto img = parse_idx_images(read_file(images));
  const auto lab = parse_idx_labels(read_file(labels));
  if (img.count != lab.size()) {
    throw DataFormatError("MNIST: " + std::to_string(img.count) + " images but " +
                          std::to_string(lab.size()) + " labels");
  }
  std::size_t n = img.count;
  if (limit && *limit < n) n = *limit;
  const std::size_t dim = std::size_t{img.rows} * img.cols;
  Dataset d;
  d.name = "mnist";
  d.inputs.reserve(n);
  d.targets.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    Vector x(dim);
    for (std::size_t p = 0; p < dim; ++p) x[p] = img.pixels[s * dim + p] / 255.0;
    if (lab[s] > 9) throw DataFormatError("MNIST: label " + std::to_string(lab[s]) + " out of range");
    Vector t(10);
    t[lab[s]] = 1.0;
    d.inputs.push_back(std::move(x));
    d.targets.push_back(std::move(t));
  }
  return d;
}

void write_dataset_csv(const Dataset& data, std::ostream& out) {
  CsvWriter csv(out);
  std::vector<std::string> header;
  for (std::size_t i = 0; i < data.input_dim(); ++i) header.push_back("x" + std::to_string(i));
  for (std::size_t i = 0; i < data.target_dim(); ++i) header.push_back("t" + std::to_string(i));
  csv.header(header);
  for (std::size_t s = 0; s < data.size(); ++s) {
    for (double v : data.inputs[s]) csv.field(v);
    for (double v : data.targets[s]) csv.field(v);
    csv.end_row();
  }
}

std::size_t argmax(const Vector& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

}  // namespace pcn
