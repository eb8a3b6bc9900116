#pragma once

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>

namespace impact {

// Minimal CSV emitter with reproducible number formatting.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::string& header)
      : out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot open output file: " + path);
    if (!header.empty()) out_ << header << "\n";
  }

  // Raw line (e.g. a "# comment" prologue written before the header).
  static std::string format(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
  }

  void raw(const std::string& line) { out_ << line << "\n"; }

  template <typename... Ts>
  void row(const Ts&... fields) {
    bool first = true;
    ((out_ << (first ? "" : ","), first = false, put(fields)), ...);
    out_ << "\n";
  }

 private:
  void put(double v) { out_ << format(v); }
  void put(float v) { out_ << format(static_cast<double>(v)); }
  void put(int v) { out_ << v; }
  void put(long v) { out_ << v; }
  void put(unsigned long v) { out_ << v; }
  void put(unsigned long long v) { out_ << v; }
  void put(const std::string& v) { out_ << v; }
  void put(const char* v) { out_ << v; }

  std::ofstream out_;
};

}  // namespace impact
