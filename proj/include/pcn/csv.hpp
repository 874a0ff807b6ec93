#pragma once

#include <cstddef>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace pcn {

// Minimal CSV emitter. Doubles are written with 17 significant digits so
// files round-trip exactly and identical runs give identical bytes.
class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& out) : out_(out) {}

  void header(const std::vector<std::string>& names);
  CsvWriter& field(double v);
  CsvWriter& field(std::size_t v);
  CsvWriter& field(int v);
  CsvWriter& field(std::string_view v);
  void end_row();

 private:
  void sep();
  std::ostream& out_;
  bool first_ = true;
};

std::string format_double(double v);

}  // namespace pcn
