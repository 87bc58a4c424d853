#pragma once

#include <charconv>
#include <cmath>
#include <optional>
#include <string>
#include <system_error>

namespace netgate {

// Shortest decimal string that parses back to the same double. Locale-free.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "NA";
  if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) return "NA";
  return std::string(buf, ptr);
}

inline std::string format_optional(const std::optional<double>& v) { return v ? format_double(*v) : "NA"; }

}  // namespace netgate
