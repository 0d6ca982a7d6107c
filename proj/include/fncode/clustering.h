#ifndef FNCODE_CLUSTERING_H_
#define FNCODE_CLUSTERING_H_

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fncode/som.h"

namespace fncode {

using Point2 = std::array<double, 2>;

struct KMeansOptions {
  int k = 8;
  uint64_t seed = 0;
  int max_iter = 300;
  double tol = 1e-6;
};

struct ClusterResult {
  int k = 0;
  std::vector<int> assignments;
  std::vector<Point2> centroids;
  double inertia = 0.0;
  uint64_t seed = 0;
  int iterations = 0;
  // Inertia after each assignment step; non-increasing.
  std::vector<double> inertia_history;
};

// Lloyd's algorithm with k-means++ seeding. Empty clusters are re-seeded to
// the point farthest from its centroid. Duplicate points are kept.
ClusterResult KMeans(std::span<const Point2> points, const KMeansOptions& options);

// Harmonic mean of homogeneity and completeness (natural-log entropies).
double VMeasure(std::span<const int64_t> truth, std::span<const int64_t> predicted);

struct VScoreReport {
  std::vector<uint64_t> seeds;
  std::vector<double> scores;
  double mean = 0.0;
  // Population standard deviation of the scores.
  double std = 0.0;
};

// Runs k-means on BMU (row, col) coordinates with n_seeds consecutive seeds
// starting at base_seed, scoring each clustering against labels.
VScoreReport ClusteringScoreExperiment(std::span<const BmuAssignment> assignments,
                                       std::span<const uint32_t> labels, int k,
                                       int n_seeds, int grid_rows, int grid_cols,
                                       uint64_t base_seed = 0);

// "layer_tag,seed,score" rows followed by a "layer_tag,mean,<mean>,std,<std>"
// summary row.
std::string VScoreCsv(const VScoreReport& report, const std::string& layer_tag);

}  // namespace fncode

#endif  // FNCODE_CLUSTERING_H_
