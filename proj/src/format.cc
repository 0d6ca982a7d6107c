#include "fncode/format.h"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "fncode/error.h"

namespace fncode {

std::string FormatDouble(double v) {
  if (v == 0.0) return "0";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string EncodePgm(int rows, int cols, std::span<const double> values) {
  if (values.empty()) return EncodePgm(rows, cols, values, 0.0, 0.0);
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  return EncodePgm(rows, cols, values, *lo, *hi);
}

std::string EncodePgm(int rows, int cols, std::span<const double> values,
                      double lo, double hi) {
  if (rows < 1 || cols < 1 ||
      values.size() != static_cast<size_t>(rows) * cols) {
    throw InvalidArgument("EncodePgm: value count does not match rows*cols");
  }
  std::string out = "P5\n" + std::to_string(cols) + " " +
                    std::to_string(rows) + "\n255\n";
  const double span = hi - lo;
  for (double v : values) {
    double t = span > 0.0 ? (v - lo) / span : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    out.push_back(static_cast<char>(static_cast<unsigned char>(
        std::lround(t * 255.0))));
  }
  return out;
}

}  // namespace fncode
