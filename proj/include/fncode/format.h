#ifndef FNCODE_FORMAT_H_
#define FNCODE_FORMAT_H_

#include <span>
#include <string>

namespace fncode {

// Shortest decimal text that round-trips to the same double. Locale
// independent, so CSV output is byte-stable.
std::string FormatDouble(double v);

// Binary 8-bit PGM (P5). Values are min-max scaled to 0..255 unless
// [lo, hi] is given; a constant image maps to 0.
std::string EncodePgm(int rows, int cols, std::span<const double> values);
std::string EncodePgm(int rows, int cols, std::span<const double> values,
                      double lo, double hi);

}  // namespace fncode

#endif  // FNCODE_FORMAT_H_
