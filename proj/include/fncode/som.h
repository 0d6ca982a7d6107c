#ifndef FNCODE_SOM_H_
#define FNCODE_SOM_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fncode/hlr.h"

namespace fncode {

enum class Topology : uint8_t { kToroidal = 0, kPlanar = 1 };

struct GridCoord {
  int row = 0;
  int col = 0;
  bool operator==(const GridCoord&) const = default;
};

// An m x n lattice of weight vectors (the code book), stored row-major by
// unit with each unit's dim weights contiguous.
class SomGrid {
 public:
  SomGrid(int rows, int cols, int dim, Topology topology);

  // Weights drawn uniform on [0,1) and scaled to unit Euclidean norm.
  static SomGrid Random(int rows, int cols, int dim, uint64_t seed,
                        Topology topology = Topology::kToroidal);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int dim() const { return dim_; }
  int num_units() const { return rows_ * cols_; }
  Topology topology() const { return topology_; }

  std::span<const float> weights(int unit) const {
    return {weights_.data() + static_cast<size_t>(unit) * dim_,
            static_cast<size_t>(dim_)};
  }
  std::span<float> mutable_weights(int unit) {
    return {weights_.data() + static_cast<size_t>(unit) * dim_,
            static_cast<size_t>(dim_)};
  }
  std::span<const float> weights(GridCoord c) const {
    return weights(UnitIndex(c));
  }
  const std::vector<float>& data() const { return weights_; }
  std::vector<float>& mutable_data() { return weights_; }

  int UnitIndex(GridCoord c) const;
  GridCoord CoordOf(int unit) const { return {unit / cols_, unit % cols_}; }

  // Lattice distance between two units; wraps around both axes on a torus.
  double GridDistance(GridCoord a, GridCoord b) const;
  // Largest possible GridDistance on this grid.
  double MaxGridDistance() const;

  bool operator==(const SomGrid& other) const = default;

 private:
  int rows_;
  int cols_;
  int dim_;
  Topology topology_;
  std::vector<float> weights_;
};

struct BmuAssignment {
  uint32_t sample_index = 0;
  int row = 0;
  int col = 0;
  double quantization_error = 0.0;

  GridCoord coord() const { return {row, col}; }
};

enum class Decay { kExp };

struct TrainConfig {
  double sigma0 = 5.0;
  double alpha0 = 0.01;
  Decay decay = Decay::kExp;
  int epochs = 5;
  double epsilon_stab = 1e-8;
  uint64_t seed = 0;
  // Decay time constant in updates; 0 means epochs * n_samples.
  double tau = 0.0;
  // Sigma decays with time constant tau * sigma_tau_scale; 1 shares tau.
  double sigma_tau_scale = 1.0;
  // Upper bound on total updates; 0 means no cap.
  int64_t max_updates = 0;

  void Validate() const;
};

double LearningRate(int64_t step, double tau, const TrainConfig& cfg);
double NeighborhoodRadius(int64_t step, double tau, const TrainConfig& cfg);
// theta = exp(-D^2 / (2 sigma^2 + eps)).
double Neighborhood(double grid_distance, double sigma, double epsilon_stab);

// Best-matching unit by Euclidean distance; ties go to the smallest
// row-major index.
BmuAssignment FindBmu(const SomGrid& grid, std::span<const float> x,
                      uint32_t sample_index = 0);
std::vector<BmuAssignment> FindBmus(const SomGrid& grid,
                                    const HlrDataset& data);

// Applies one competitive-learning update for input x at global update
// index `step` and returns the BMU found before the update. `tau` is the
// resolved decay constant.
BmuAssignment UpdateStep(SomGrid& grid, std::span<const float> x, int64_t step,
                         double tau, const TrainConfig& cfg);

struct LossTrace {
  std::vector<double> errors;
  int window = 1000;
};

// Presents samples one at a time, reshuffled every epoch, and records each
// sample's quantization error before its update.
LossTrace Train(SomGrid& grid, const HlrDataset& data, const TrainConfig& cfg);

// Sliding-window mean divided by its first value. Empty when the window is
// longer than the trace.
std::vector<double> MovingAverage(std::span<const double> errors, int window);
inline std::vector<double> MovingAverage(const LossTrace& trace) {
  return MovingAverage(trace.errors, trace.window);
}

inline constexpr uint32_t kSomVersion = 1;

// "SOM1" | u32 version | u32 m | u32 n | u32 dim | u8 topology |
// f32 weights (row-major units).
std::string EncodeSom(const SomGrid& grid);
SomGrid DecodeSom(std::string_view bytes);
void SaveSom(const SomGrid& grid, const std::string& path);
SomGrid LoadSom(const std::string& path);

}  // namespace fncode

#endif  // FNCODE_SOM_H_
