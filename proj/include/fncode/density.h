#ifndef FNCODE_DENSITY_H_
#define FNCODE_DENSITY_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fncode/som.h"

namespace fncode {

// Per-cell Gaussian KDE of BMU locations. values are row-major and sum to 1
// (unit cell area).
struct DensityMap {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;
  double bandwidth_row = 0.0;
  double bandwidth_col = 0.0;

  double at(int r, int c) const {
    return values[static_cast<size_t>(r) * cols + c];
  }
};

struct KdeOptions {
  // Per-axis kernel standard deviation in grid units. When unset, Scott's
  // rule n^(-1/6) * sample std is used on each axis.
  std::optional<double> bandwidth;
  // Measure kernel offsets with wrap-around instead of as flat coordinates.
  bool periodic = false;
};

// Gaussian KDE over BMU (row, col) coordinates as 2-D points, evaluated at
// every cell center. Throws NumericError when an axis has zero spread and no
// fixed bandwidth is given.
DensityMap KdeDensity(std::span<const BmuAssignment> assignments, int rows,
                      int cols, const KdeOptions& options = {});

// KDE restricted to samples whose label equals class_id.
DensityMap ClassDensity(std::span<const BmuAssignment> assignments,
                        std::span<const uint32_t> labels, uint32_t class_id,
                        int rows, int cols, const KdeOptions& options = {});

struct Attractor {
  int row = 0;
  int col = 0;
  double density = 0.0;
  int rank = 0;
};

// Cells whose density is >= all 8 toroidal neighbours and >= the
// min_percentile-th percentile of all values, sorted by density (ties by
// row-major index) and truncated to top_k.
std::vector<Attractor> FindAttractors(const DensityMap& map, int top_k,
                                      double min_percentile = 0.0);

// Fraction of grid cells never chosen as a BMU.
double DeadUnitFraction(std::span<const BmuAssignment> assignments, int rows,
                        int cols);

// Headerless CSV, one grid row per line.
std::string DensityCsv(const DensityMap& map);
// Binary 8-bit PGM (P5) with values min-max scaled to 0..255.
std::string DensityPgm(const DensityMap& map);

}  // namespace fncode

#endif  // FNCODE_DENSITY_H_
