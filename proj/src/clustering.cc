#include "fncode/clustering.h"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "fncode/error.h"
#include "fncode/format.h"
#include "fncode/random.h"

namespace fncode {

namespace {

double Sq(const Point2& a, const Point2& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1];
  return dx * dx + dy * dy;
}

size_t CountDistinct(std::span<const Point2> points) {
  std::vector<Point2> sorted(points.begin(), points.end());
  std::sort(sorted.begin(), sorted.end());
  return static_cast<size_t>(
      std::unique(sorted.begin(), sorted.end()) - sorted.begin());
}

std::vector<Point2> PlusPlusSeeds(std::span<const Point2> points, int k,
                                  Rng& rng) {
  std::vector<Point2> centers;
  centers.reserve(k);
  centers.push_back(points[rng.UniformIndex(points.size())]);
  std::vector<double> d2(points.size());
  for (size_t i = 0; i < points.size(); ++i) d2[i] = Sq(points[i], centers[0]);
  while (static_cast<int>(centers.size()) < k) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    const double target = rng.Uniform() * total;
    // Falls back to the last candidate when rounding leaves acc <= target.
    size_t pick = points.size();
    double acc = 0.0;
    for (size_t i = 0; i < points.size(); ++i) {
      if (d2[i] == 0.0) continue;
      pick = i;
      acc += d2[i];
      if (acc > target) break;
    }
    centers.push_back(points[pick]);
    for (size_t i = 0; i < points.size(); ++i) {
      d2[i] = std::min(d2[i], Sq(points[i], centers.back()));
    }
  }
  return centers;
}

// Assigns each point to its nearest center (ties to the lower index) and
// returns the inertia.
double Assign(std::span<const Point2> points, const std::vector<Point2>& centers,
              std::vector<int>& labels, std::vector<double>& dist) {
  double inertia = 0.0;
  for (size_t i = 0; i < points.size(); ++i) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (size_t c = 0; c < centers.size(); ++c) {
      const double d = Sq(points[i], centers[c]);
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(c);
      }
    }
    labels[i] = best;
    dist[i] = best_d;
    inertia += best_d;
  }
  return inertia;
}

double Entropy(const std::map<int64_t, double>& counts, double n) {
  double h = 0.0;
  for (const auto& [label, count] : counts) {
    const double p = count / n;
    h -= p * std::log(p);
  }
  return h;
}

}  // namespace

ClusterResult KMeans(std::span<const Point2> points,
                     const KMeansOptions& options) {
  if (options.k < 1) throw InvalidArgument("KMeans: k must be >= 1");
  if (options.max_iter < 1) throw InvalidArgument("KMeans: max_iter must be >= 1");
  if (points.empty()) throw InvalidArgument("KMeans: no points");
  const size_t distinct = CountDistinct(points);
  if (static_cast<size_t>(options.k) > distinct) {
    throw InvalidArgument("KMeans: k=" + std::to_string(options.k) +
                          " exceeds the " + std::to_string(distinct) +
                          " distinct points");
  }
  Rng rng(options.seed);
  ClusterResult result;
  result.k = options.k;
  result.seed = options.seed;
  result.centroids = PlusPlusSeeds(points, options.k, rng);
  result.assignments.assign(points.size(), 0);
  std::vector<double> dist(points.size());

  for (int iter = 0; iter < options.max_iter; ++iter) {
    const double inertia =
        Assign(points, result.centroids, result.assignments, dist);
    assert(result.inertia_history.empty() ||
           inertia <= result.inertia_history.back() * (1.0 + 1e-12) + 1e-12);
    result.inertia_history.push_back(inertia);
    result.iterations = iter + 1;

    std::vector<Point2> next(options.k, Point2{0.0, 0.0});
    std::vector<size_t> sizes(options.k, 0);
    for (size_t i = 0; i < points.size(); ++i) {
      const int c = result.assignments[i];
      next[c][0] += points[i][0];
      next[c][1] += points[i][1];
      ++sizes[c];
    }
    // Points ordered by decreasing distance to their centroid, used to
    // re-seed empty clusters.
    std::vector<size_t> far;
    for (int c = 0; c < options.k; ++c) {
      if (sizes[c] > 0) {
        next[c][0] /= static_cast<double>(sizes[c]);
        next[c][1] /= static_cast<double>(sizes[c]);
        continue;
      }
      if (far.empty()) {
        far.resize(points.size());
        std::iota(far.begin(), far.end(), size_t{0});
        std::stable_sort(far.begin(), far.end(), [&dist](size_t a, size_t b) {
          return dist[a] > dist[b];
        });
      }
      size_t pick = far.front();
      for (size_t idx : far) {
        const bool taken = std::any_of(
            next.begin(), next.begin() + c,
            [&](const Point2& p) { return p == points[idx]; });
        if (!taken) {
          pick = idx;
          break;
        }
      }
      next[c] = points[pick];
    }
    double shift = 0.0;
    for (int c = 0; c < options.k; ++c) {
      shift = std::max(shift, std::sqrt(Sq(next[c], result.centroids[c])));
    }
    result.centroids = std::move(next);
    if (shift < options.tol) break;
  }
  result.inertia = Assign(points, result.centroids, result.assignments, dist);
  result.inertia_history.push_back(result.inertia);
  return result;
}

double VMeasure(std::span<const int64_t> truth,
                std::span<const int64_t> predicted) {
  if (truth.size() != predicted.size()) {
    throw InvalidArgument("VMeasure: label lengths differ (" +
                          std::to_string(truth.size()) + " vs " +
                          std::to_string(predicted.size()) + ")");
  }
  if (truth.empty()) throw InvalidArgument("VMeasure: empty labelings");
  const double n = static_cast<double>(truth.size());
  std::map<int64_t, double> tc, pc;
  std::map<std::pair<int64_t, int64_t>, double> joint;
  for (size_t i = 0; i < truth.size(); ++i) {
    tc[truth[i]] += 1.0;
    pc[predicted[i]] += 1.0;
    joint[{truth[i], predicted[i]}] += 1.0;
  }
  const double h_truth = Entropy(tc, n);
  const double h_pred = Entropy(pc, n);
  double h_truth_given_pred = 0.0, h_pred_given_truth = 0.0;
  for (const auto& [key, count] : joint) {
    h_truth_given_pred -= count / n * std::log(count / pc[key.second]);
    h_pred_given_truth -= count / n * std::log(count / tc[key.first]);
  }
  const double homogeneity =
      h_truth == 0.0 ? 1.0 : 1.0 - h_truth_given_pred / h_truth;
  const double completeness =
      h_pred == 0.0 ? 1.0 : 1.0 - h_pred_given_truth / h_pred;
  if (homogeneity + completeness == 0.0) return 0.0;
  return 2.0 * homogeneity * completeness / (homogeneity + completeness);
}

VScoreReport ClusteringScoreExperiment(std::span<const BmuAssignment> assignments,
                                       std::span<const uint32_t> labels, int k,
                                       int n_seeds, int grid_rows, int grid_cols,
                                       uint64_t base_seed) {
  if (n_seeds < 1) throw InvalidArgument("ClusteringScore: n_seeds must be >= 1");
  if (k > grid_rows * grid_cols) {
    throw InvalidArgument("ClusteringScore: k=" + std::to_string(k) +
                          " exceeds the " + std::to_string(grid_rows * grid_cols) +
                          " grid cells");
  }
  if (labels.size() != assignments.size()) {
    throw InvalidArgument("ClusteringScore: label count does not match "
                          "assignment count");
  }
  std::vector<Point2> points;
  points.reserve(assignments.size());
  for (const BmuAssignment& a : assignments) {
    points.push_back({static_cast<double>(a.row), static_cast<double>(a.col)});
  }
  const std::vector<int64_t> truth(labels.begin(), labels.end());
  VScoreReport report;
  for (int s = 0; s < n_seeds; ++s) {
    KMeansOptions opts;
    opts.k = k;
    opts.seed = base_seed + static_cast<uint64_t>(s);
    const ClusterResult cr = KMeans(points, opts);
    const std::vector<int64_t> pred(cr.assignments.begin(), cr.assignments.end());
    report.seeds.push_back(opts.seed);
    report.scores.push_back(VMeasure(truth, pred));
  }
  const double n = static_cast<double>(report.scores.size());
  report.mean = std::accumulate(report.scores.begin(), report.scores.end(), 0.0) / n;
  double ss = 0.0;
  for (double s : report.scores) ss += (s - report.mean) * (s - report.mean);
  report.std = std::sqrt(ss / n);
  return report;
}

std::string VScoreCsv(const VScoreReport& report, const std::string& layer_tag) {
  std::string out = "layer_tag,seed,score,std\n";
  for (size_t i = 0; i < report.scores.size(); ++i) {
    out += layer_tag + "," + std::to_string(report.seeds[i]) + "," +
           FormatDouble(report.scores[i]) + ",\n";
  }
  out += layer_tag + ",mean," + FormatDouble(report.mean) + "," +
         FormatDouble(report.std) + "\n";
  return out;
}

}  // namespace fncode
