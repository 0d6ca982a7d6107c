#include "fncode/som.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fncode/binary_io.h"
#include "fncode/error.h"
#include "fncode/random.h"

namespace fncode {

SomGrid::SomGrid(int rows, int cols, int dim, Topology topology)
    : rows_(rows), cols_(cols), dim_(dim), topology_(topology) {
  if (rows < 1 || cols < 1 || dim < 1) {
    throw InvalidArgument("SomGrid: rows, cols and dim must be >= 1 (got " +
                          std::to_string(rows) + "x" + std::to_string(cols) +
                          "x" + std::to_string(dim) + ")");
  }
  weights_.assign(static_cast<size_t>(rows) * cols * dim, 0.0f);
}

SomGrid SomGrid::Random(int rows, int cols, int dim, uint64_t seed,
                        Topology topology) {
  SomGrid grid(rows, cols, dim, topology);
  Rng rng(seed);
  std::vector<double> w(dim);
  for (int u = 0; u < grid.num_units(); ++u) {
    double sq = 0.0;
    do {
      sq = 0.0;
      for (double& x : w) {
        x = rng.Uniform();
        sq += x * x;
      }
    } while (sq == 0.0);
    const double norm = std::sqrt(sq);
    std::span<float> dst = grid.mutable_weights(u);
    for (int k = 0; k < dim; ++k) dst[k] = static_cast<float>(w[k] / norm);
  }
  return grid;
}

int SomGrid::UnitIndex(GridCoord c) const {
  if (c.row < 0 || c.row >= rows_ || c.col < 0 || c.col >= cols_) {
    throw InvalidArgument("grid coordinate (" + std::to_string(c.row) + "," +
                          std::to_string(c.col) + ") outside " +
                          std::to_string(rows_) + "x" + std::to_string(cols_));
  }
  return c.row * cols_ + c.col;
}

double SomGrid::GridDistance(GridCoord a, GridCoord b) const {
  UnitIndex(a);
  UnitIndex(b);
  int dr = std::abs(a.row - b.row);
  int dc = std::abs(a.col - b.col);
  if (topology_ == Topology::kToroidal) {
    dr = std::min(dr, rows_ - dr);
    dc = std::min(dc, cols_ - dc);
  }
  return std::sqrt(static_cast<double>(dr * dr + dc * dc));
}

double SomGrid::MaxGridDistance() const {
  const int dr = topology_ == Topology::kToroidal ? rows_ / 2 : rows_ - 1;
  const int dc = topology_ == Topology::kToroidal ? cols_ / 2 : cols_ - 1;
  return std::sqrt(static_cast<double>(dr * dr + dc * dc));
}

void TrainConfig::Validate() const {
  if (!(sigma0 > 0.0)) throw InvalidArgument("TrainConfig: sigma0 must be > 0");
  if (!(alpha0 > 0.0)) throw InvalidArgument("TrainConfig: alpha0 must be > 0");
  if (!(epsilon_stab > 0.0)) {
    throw InvalidArgument("TrainConfig: epsilon_stab must be > 0");
  }
  if (epochs < 1) throw InvalidArgument("TrainConfig: epochs must be >= 1");
  if (tau != 0.0 && !(tau >= 1.0)) {
    throw InvalidArgument("TrainConfig: tau must be >= 1 (or 0 for auto)");
  }
  if (!(sigma_tau_scale > 0.0)) {
    throw InvalidArgument("TrainConfig: sigma_tau_scale must be > 0");
  }
  if (max_updates < 0) {
    throw InvalidArgument("TrainConfig: max_updates must be >= 0");
  }
}

double LearningRate(int64_t step, double tau, const TrainConfig& cfg) {
  return cfg.alpha0 * std::exp(-static_cast<double>(step) / tau);
}

double NeighborhoodRadius(int64_t step, double tau, const TrainConfig& cfg) {
  return cfg.sigma0 * std::exp(-static_cast<double>(step) / (tau * cfg.sigma_tau_scale));
}

double Neighborhood(double grid_distance, double sigma, double epsilon_stab) {
  return std::exp(-(grid_distance * grid_distance) /
                  (2.0 * sigma * sigma + epsilon_stab));
}

namespace {

double SquaredDistance(std::span<const float> a, std::span<const float> b) {
  double sum = 0.0;
  for (size_t k = 0; k < a.size(); ++k) {
    const double d = static_cast<double>(a[k]) - b[k];
    sum += d * d;
  }
  return sum;
}

}  // namespace

BmuAssignment FindBmu(const SomGrid& grid, std::span<const float> x,
                      uint32_t sample_index) {
  if (x.size() != static_cast<size_t>(grid.dim())) {
    throw InvalidArgument("FindBmu: input length " + std::to_string(x.size()) +
                          " != grid dim " + std::to_string(grid.dim()));
  }
  int best = 0;
  double best_sq = std::numeric_limits<double>::infinity();
  for (int u = 0; u < grid.num_units(); ++u) {
    const double sq = SquaredDistance(x, grid.weights(u));
    if (sq < best_sq) {
      best_sq = sq;
      best = u;
    }
  }
  const GridCoord c = grid.CoordOf(best);
  return {sample_index, c.row, c.col, std::sqrt(best_sq)};
}

std::vector<BmuAssignment> FindBmus(const SomGrid& grid,
                                    const HlrDataset& data) {
  if (data.dim != static_cast<uint32_t>(grid.dim())) {
    throw InvalidArgument("FindBmus: dataset dim " + std::to_string(data.dim) +
                          " != grid dim " + std::to_string(grid.dim()));
  }
  std::vector<BmuAssignment> out;
  out.reserve(data.n_samples);
  for (uint32_t i = 0; i < data.n_samples; ++i) {
    out.push_back(FindBmu(grid, data.row(i), i));
  }
  return out;
}

BmuAssignment UpdateStep(SomGrid& grid, std::span<const float> x, int64_t step,
                         double tau, const TrainConfig& cfg) {
  if (step < 0) throw InvalidArgument("UpdateStep: step must be >= 0");
  const BmuAssignment bmu = FindBmu(grid, x);
  const double alpha = LearningRate(step, tau, cfg);
  const double sigma = NeighborhoodRadius(step, tau, cfg);
  for (int u = 0; u < grid.num_units(); ++u) {
    const double d = grid.GridDistance(grid.CoordOf(u), bmu.coord());
    const double rate = Neighborhood(d, sigma, cfg.epsilon_stab) * alpha;
    std::span<float> w = grid.mutable_weights(u);
    for (size_t k = 0; k < w.size(); ++k) {
      const double wk = w[k];
      w[k] = static_cast<float>(wk + rate * (static_cast<double>(x[k]) - wk));
    }
  }
  return bmu;
}

LossTrace Train(SomGrid& grid, const HlrDataset& data, const TrainConfig& cfg) {
  cfg.Validate();
  if (data.n_samples == 0) throw InvalidArgument("Train: empty dataset");
  if (data.dim != static_cast<uint32_t>(grid.dim())) {
    throw InvalidArgument("Train: dataset dim " + std::to_string(data.dim) +
                          " != grid dim " + std::to_string(grid.dim()));
  }
  const int64_t planned = static_cast<int64_t>(cfg.epochs) * data.n_samples;
  const int64_t total =
      cfg.max_updates > 0 ? std::min(planned, cfg.max_updates) : planned;
  const double tau = cfg.tau > 0.0 ? cfg.tau : static_cast<double>(planned);

  LossTrace trace;
  trace.errors.reserve(static_cast<size_t>(total));
  std::vector<uint32_t> order(data.n_samples);
  std::iota(order.begin(), order.end(), 0u);
  Rng rng(cfg.seed);
  int64_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs && step < total; ++epoch) {
    rng.Shuffle(std::span<uint32_t>(order));
    for (uint32_t idx : order) {
      if (step >= total) break;
      const BmuAssignment bmu = UpdateStep(grid, data.row(idx), step, tau, cfg);
      trace.errors.push_back(bmu.quantization_error);
      ++step;
    }
  }
  return trace;
}

std::vector<double> MovingAverage(std::span<const double> errors, int window) {
  if (window < 1) throw InvalidArgument("MovingAverage: window must be >= 1");
  const size_t w = static_cast<size_t>(window);
  if (w > errors.size()) return {};
  std::vector<double> out;
  out.reserve(errors.size() - w + 1);
  // Recompute each window sum from scratch; a running sum drifts over long
  // traces and breaks exact results on constant inputs.
  for (size_t i = 0; i + w <= errors.size(); ++i) {
    double sum = 0.0;
    for (size_t j = i; j < i + w; ++j) sum += errors[j];
    out.push_back(sum / static_cast<double>(w));
  }
  const double first = out.front();
  if (first == 0.0) return out;
  for (double& v : out) v /= first;
  return out;
}

std::string EncodeSom(const SomGrid& grid) {
  ByteWriter w;
  w.Bytes("SOM1");
  w.U32(kSomVersion);
  w.U32(static_cast<uint32_t>(grid.rows()));
  w.U32(static_cast<uint32_t>(grid.cols()));
  w.U32(static_cast<uint32_t>(grid.dim()));
  w.U8(static_cast<uint8_t>(grid.topology()));
  w.F32Array(grid.data());
  return w.buffer();
}

SomGrid DecodeSom(std::string_view bytes) {
  ByteReader r(bytes);
  if (r.Bytes(4, "magic") != "SOM1") {
    throw FormatError(FormatErrorKind::kBadMagic, "magic", "expected 'SOM1'");
  }
  const uint32_t version = r.U32("version");
  if (version != kSomVersion) {
    throw FormatError(FormatErrorKind::kBadVersion, "version",
                      "unsupported version " + std::to_string(version));
  }
  const uint32_t m = r.U32("m");
  const uint32_t n = r.U32("n");
  const uint32_t dim = r.U32("dim");
  const auto check_extent = [](uint32_t v, const char* field) {
    if (v < 1 || v > static_cast<uint32_t>(std::numeric_limits<int>::max())) {
      throw FormatError(FormatErrorKind::kBadValue, field,
                        "value " + std::to_string(v) + " out of range");
    }
  };
  check_extent(m, "m");
  check_extent(n, "n");
  check_extent(dim, "dim");
  const uint8_t topology = r.U8("topology");
  if (topology > 1) {
    throw FormatError(FormatErrorKind::kBadValue, "topology",
                      "unknown topology " + std::to_string(topology));
  }
  const uint64_t count = static_cast<uint64_t>(m) * n * dim;
  if (count > r.remaining() / sizeof(float)) {
    throw FormatError(FormatErrorKind::kTruncated, "weights",
                      "declared " + std::to_string(count) + " weights, only " +
                          std::to_string(r.remaining()) + " bytes remain");
  }
  std::vector<float> weights = r.F32Array(static_cast<size_t>(count), "weights");
  r.ExpectEnd("end");
  SomGrid grid(static_cast<int>(m), static_cast<int>(n), static_cast<int>(dim),
               static_cast<Topology>(topology));
  grid.mutable_data() = std::move(weights);
  return grid;
}

void SaveSom(const SomGrid& grid, const std::string& path) {
  WriteFileBytes(path, EncodeSom(grid));
}

SomGrid LoadSom(const std::string& path) {
  return DecodeSom(ReadFileBytes(path));
}

}  // namespace fncode
