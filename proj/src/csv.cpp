#include "pcn/csv.hpp"

#include <cmath>
#include <cstdio>

namespace pcn {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void CsvWriter::header(const std::vector<std::string>& names) {
  for (const auto& n : names) field(std::string_view(n));
  end_row();
}

void CsvWriter::sep() {
  if (!first_) out_ << ',';
  first_ = false;
}

CsvWriter& CsvWriter::field(double v) {
  sep();
  out_ << format_double(v);
  return *this;
}

CsvWriter& CsvWriter::field(std::size_t v) {
  sep();
  out_ << v;
  return *this;
}

CsvWriter& CsvWriter::field(int v) {
  sep();
  out_ << v;
  return *this;
}

CsvWriter& CsvWriter::field(std::string_view v) {
  sep();
  if (v.find_first_of(",\"\n") == std::string_view::npos) {
    out_ << v;
  } else {
    out_ << '"';
    for (char c : v) {
      if (c == '"') out_ << '"';
      out_ << c;
    }
    out_ << '"';
  }
  return *this;
}

void CsvWriter::end_row() {
  out_ << '\n';
  first_ = true;
}

}  // namespace pcn
