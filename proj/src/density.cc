#include "fncode/density.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "fncode/error.h"
#include "fncode/format.h"

namespace fncode {

namespace {

double SampleStd(std::span<const double> xs) {
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

// exp(-0.5 (d / h)^2) for offsets d = 0..extent-1.
std::vector<double> KernelProfile(int extent, double h, bool periodic) {
  std::vector<double> k(extent);
  for (int d = 0; d < extent; ++d) {
    const double z = (periodic ? std::min(d, extent - d) : d) / h;
    k[d] = std::exp(-0.5 * z * z);
  }
  return k;
}

}  // namespace

DensityMap KdeDensity(std::span<const BmuAssignment> assignments, int rows,
                      int cols, const KdeOptions& options) {
  if (rows < 1 || cols < 1) throw InvalidArgument("KdeDensity: empty grid");
  if (assignments.size() < 2) {
    throw InvalidArgument("KdeDensity: need at least 2 assignments, got " +
                          std::to_string(assignments.size()));
  }
  std::vector<double> counts(static_cast<size_t>(rows) * cols, 0.0);
  std::vector<double> rs, cs;
  rs.reserve(assignments.size());
  cs.reserve(assignments.size());
  for (const BmuAssignment& a : assignments) {
    if (a.row < 0 || a.row >= rows || a.col < 0 || a.col >= cols) {
      throw InvalidArgument("KdeDensity: assignment outside the grid");
    }
    counts[static_cast<size_t>(a.row) * cols + a.col] += 1.0;
    rs.push_back(a.row);
    cs.push_back(a.col);
  }

  DensityMap map;
  map.rows = rows;
  map.cols = cols;
  if (options.bandwidth) {
    if (!(*options.bandwidth > 0.0)) {
      throw InvalidArgument("KdeDensity: fixed bandwidth must be > 0");
    }
    map.bandwidth_row = map.bandwidth_col = *options.bandwidth;
  } else {
    const double factor =
        std::pow(static_cast<double>(assignments.size()), -1.0 / 6.0);
    const double sr = SampleStd(rs), sc = SampleStd(cs);
    if (sr == 0.0 || sc == 0.0) {
      throw NumericError(
          "KdeDensity: degenerate covariance (BMUs have zero spread along " +
          std::string(sr == 0.0 ? "rows" : "cols") +
          "); pass a fixed bandwidth instead");
    }
    map.bandwidth_row = factor * sr;
    map.bandwidth_col = factor * sc;
  }

  // The Gaussian product kernel is separable: convolve columns, then rows.
  const std::vector<double> kr = KernelProfile(rows, map.bandwidth_row, options.periodic);
  const std::vector<double> kc = KernelProfile(cols, map.bandwidth_col, options.periodic);
  std::vector<double> tmp(counts.size(), 0.0);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      double s = 0.0;
      for (int c2 = 0; c2 < cols; ++c2) {
        s += counts[static_cast<size_t>(r) * cols + c2] * kc[std::abs(c - c2)];
      }
      tmp[static_cast<size_t>(r) * cols + c] = s;
    }
  }
  map.values.assign(counts.size(), 0.0);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      double s = 0.0;
      for (int r2 = 0; r2 < rows; ++r2) {
        s += tmp[static_cast<size_t>(r2) * cols + c] * kr[std::abs(r - r2)];
      }
      map.values[static_cast<size_t>(r) * cols + c] = s;
    }
  }
  double total = 0.0;
  for (double v : map.values) total += v;
  for (double& v : map.values) v /= total;
  return map;
}

DensityMap ClassDensity(std::span<const BmuAssignment> assignments,
                        std::span<const uint32_t> labels, uint32_t class_id,
                        int rows, int cols, const KdeOptions& options) {
  if (labels.size() != assignments.size()) {
    throw InvalidArgument("ClassDensity: " + std::to_string(labels.size()) +
                          " labels for " + std::to_string(assignments.size()) +
                          " assignments");
  }
  std::vector<BmuAssignment> subset;
  std::set<uint32_t> available;
  for (size_t i = 0; i < assignments.size(); ++i) {
    available.insert(labels[i]);
    if (labels[i] == class_id) subset.push_back(assignments[i]);
  }
  if (subset.size() < 2) {
    std::string list;
    for (uint32_t c : available) {
      if (!list.empty()) list += ", ";
      list += std::to_string(c);
    }
    throw InvalidArgument("ClassDensity: class " + std::to_string(class_id) +
                          " has " + std::to_string(subset.size()) +
                          " samples (need >= 2); available classes: [" + list +
                          "]");
  }
  return KdeDensity(subset, rows, cols, options);
}

std::vector<Attractor> FindAttractors(const DensityMap& map, int top_k,
                                      double min_percentile) {
  if (top_k < 1) throw InvalidArgument("FindAttractors: top_k must be >= 1");
  if (min_percentile < 0.0 || min_percentile > 100.0) {
    throw InvalidArgument("FindAttractors: min_percentile must be in [0, 100]");
  }
  if (map.values.empty()) return {};
  std::vector<double> sorted = map.values;
  std::sort(sorted.begin(), sorted.end());
  const double pos = min_percentile / 100.0 * (sorted.size() - 1);
  const size_t lo = static_cast<size_t>(std::floor(pos));
  const size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double threshold = sorted[lo] + (pos - lo) * (sorted[hi] - sorted[lo]);

  std::vector<Attractor> found;
  for (int r = 0; r < map.rows; ++r) {
    for (int c = 0; c < map.cols; ++c) {
      const double v = map.at(r, c);
      if (v < threshold) continue;
      bool is_max = true;
      for (int dr = -1; dr <= 1 && is_max; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          if (dr == 0 && dc == 0) continue;
          const int nr = (r + dr + map.rows) % map.rows;
          const int nc = (c + dc + map.cols) % map.cols;
          if (map.at(nr, nc) > v) {
            is_max = false;
            break;
          }
        }
      }
      if (is_max) found.push_back({r, c, v, 0});
    }
  }
  std::stable_sort(found.begin(), found.end(),
                   [](const Attractor& a, const Attractor& b) {
                     return a.density > b.density;
                   });
  if (found.size() > static_cast<size_t>(top_k)) found.resize(top_k);
  for (size_t i = 0; i < found.size(); ++i) found[i].rank = static_cast<int>(i);
  return found;
}

double DeadUnitFraction(std::span<const BmuAssignment> assignments, int rows,
                        int cols) {
  if (rows < 1 || cols < 1) throw InvalidArgument("DeadUnitFraction: empty grid");
  std::vector<bool> hit(static_cast<size_t>(rows) * cols, false);
  size_t live = 0;
  for (const BmuAssignment& a : assignments) {
    if (a.row < 0 || a.row >= rows || a.col < 0 || a.col >= cols) {
      throw InvalidArgument("DeadUnitFraction: assignment outside the grid");
    }
    const size_t idx = static_cast<size_t>(a.row) * cols + a.col;
    if (!hit[idx]) {
      hit[idx] = true;
      ++live;
    }
  }
  return 1.0 - static_cast<double>(live) / hit.size();
}

std::string DensityCsv(const DensityMap& map) {
  std::string out;
  for (int r = 0; r < map.rows; ++r) {
    for (int c = 0; c < map.cols; ++c) {
      if (c > 0) out += ',';
      out += FormatDouble(map.at(r, c));
    }
    out += '\n';
  }
  return out;
}

std::string DensityPgm(const DensityMap& map) {
  return EncodePgm(map.rows, map.cols, map.values);
}

}  // namespace fncode
