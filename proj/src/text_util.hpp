#pragma once

#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "ntlab/errors.hpp"

namespace ntlab::text {

// Comma-separated fields; the tables written here never quote.
inline std::vector<std::string> split_csv(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::string shortest(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline double to_double(const std::string& s, const std::string& what) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw ConfigError(what + ": not a number '" + s + "'");
  return v;
}

inline std::uint64_t to_u64(const std::string& s, const std::string& what) {
  std::uint64_t v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw ConfigError(what + ": not a non-negative integer '" + s + "'");
  }
  return v;
}

inline bool to_flag(const std::string& s, const std::string& what) {
  if (s == "0") return false;
  if (s == "1") return true;
  throw ConfigError(what + ": expected 0 or 1, got '" + s + "'");
}

}  // namespace ntlab::text
