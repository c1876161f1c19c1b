#pragma once

#include <cstdint>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

namespace pik {

inline const char* kToolVersion = "pik 0.1.0";

/// FNV-1a hash of the canonical config string, recorded in CSV comments so
/// runs can be matched to their exact configuration.
inline std::uint64_t config_hash(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

/// Minimal CSV emitter: one '#' comment row (tool version, seed, config
/// hash), one header row, then data rows.  Byte-stable for fixed inputs.
class CsvWriter {
 public:
  CsvWriter(std::ostream& out, const std::vector<std::string>& columns,
            std::uint64_t seed, const std::string& config)
      : out_(out) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%016llx",
                  (unsigned long long)config_hash(config));
    out_ << "# " << kToolVersion << " seed=" << seed << " config=" << buf
         << "\n";
    for (std::size_t i = 0; i < columns.size(); ++i)
      out_ << (i ? "," : "") << columns[i];
    out_ << "\n";
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i)
      out_ << (i ? "," : "") << cells[i];
    out_ << "\n";
  }

 private:
  std::ostream& out_;
};

}  // namespace pik
