#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <system_error>
#include <variant>
#include <vector>

#include <json.hpp>

#include "bvdual/error.hpp"

namespace bvdual {

inline constexpr std::string_view kVersion = "0.1.0";

/// Locale-independent decimal formatting with `precision` significant digits.
/// precision == 0 selects the shortest representation that round-trips.
inline std::string format_number(double v, int precision = 6) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::to_chars_result r = precision == 0
                               ? std::to_chars(buf, buf + sizeof buf, v)
                               : std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, precision);
  return std::string(buf, r.ptr);
}

/// Fixed-point formatting with `decimals` digits after the point.
inline std::string format_fixed(double v, int decimals) {
  if (!std::isfinite(v)) return format_number(v);
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, decimals);
  return std::string(buf, r.ptr);
}

using Cell = std::variant<double, std::int64_t, std::string>;

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  /// Tab-separated header plus rows.
  std::string to_tsv(int precision = 6) const {
    std::string out;
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (i) out += '\t';
      out += columns[i];
    }
    out += '\n';
    for (const auto& row : rows) {
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out += '\t';
        if (const double* d = std::get_if<double>(&row[i])) {
          out += format_number(*d, precision);
        } else if (const auto* n = std::get_if<std::int64_t>(&row[i])) {
          out += std::to_string(*n);
        } else {
          out += std::get<std::string>(row[i]);
        }
      }
      out += '\n';
    }
    return out;
  }
};

/// Output of every command: the replay line, the resolved configuration, one
/// or more result tables and provenance (seed, version, input digests). The
/// rendering contains nothing that varies between runs.
struct Report {
  std::string command;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  nlohmann::ordered_json provenance = nlohmann::ordered_json::object();
  std::vector<std::string> notes;
  std::vector<Table> tables;

  std::string render(int precision = 6) const {
    std::string out = "# bvdual report\n";
    out += "# replay: " + command + "\n";
    out += "# config: " + config.dump() + "\n";
    out += "# provenance: " + provenance.dump() + "\n";
    for (const auto& n : notes) out += "# note: " + n + "\n";
    for (const auto& t : tables) {
      out += "## table: " + t.name + "\n";
      out += t.to_tsv(precision);
    }
    return out;
  }
};

/// 64-bit FNV-1a over a byte string, as 16 hex digits.
inline std::string fnv1a64_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  static constexpr char kHex[] = "0123456789abcdef";
  for (int i = 15; i >= 0; --i) {
    buf[i] = kHex[h & 0xF];
    h >>= 4;
  }
  buf[16] = '\0';
  return buf;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open '" + path + "'");
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write '" + path + "'");
  out << contents;
  if (!out) throw UsageError("write to '" + path + "' failed");
}

}  // namespace bvdual
