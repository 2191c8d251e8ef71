#pragma once

#include <charconv>
#include <cmath>
#include <string>

namespace tamatch {

// Shortest decimal string that round-trips the exact double. Locale-free,
// '.' decimal point; used for every numeric CSV cell so outputs are
// byte-stable across runs.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace tamatch
