#ifndef FNCODE_INVERSION_H_
#define FNCODE_INVERSION_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fncode/density.h"
#include "fncode/refnet.h"
#include "fncode/som.h"

namespace fncode {

// 1 - a.b / (|a| |b|). Throws InvalidArgument for zero-norm inputs.
double CosineDistance(std::span<const double> a, std::span<const double> b);

enum class InversionInit { kRandomUniform, kGray };

struct InversionConfig {
  // Target code; length must equal the probe's pooled dimension.
  std::vector<double> target;
  double lr = 0.05;
  int n_iter = 512;
  uint64_t seed = 0;
  // Weight of the squared-difference smoothness penalty between adjacent
  // pixels.
  double smoothness_lambda = 0.0;
  InversionInit init = InversionInit::kRandomUniform;
  // Explicit starting image; overrides `init` when set.
  std::optional<Image> init_image;

  void Validate() const;
};

struct InversionResult {
  Image image;
  // Cosine distance of the returned image.
  double final_loss = 0.0;
  // Cosine distance of every iterate, starting with the initial image.
  std::vector<double> loss_trace;
};

// Adam on the pixels minimizing
//   CosineDistance(pool(probe(x)), target) + smoothness_lambda * S(x),
// clipping pixels to [0, 1] after each step. Returns the iterate with the
// lowest cosine distance.
InversionResult InvertCode(const RefNet& net, Probe probe,
                           const InversionConfig& cfg);

// Finds density attractors and inverts the SOM weight vector of each, in
// attractor rank order. Iteration k uses seed cfg.seed + k.
std::vector<InversionResult> InvertAttractors(const RefNet& net,
                                              const SomGrid& som, Probe probe,
                                              const DensityMap& density,
                                              int top_k,
                                              const InversionConfig& cfg,
                                              double min_percentile = 0.0);

// "iteration,cosine_distance" rows.
std::string LossTraceCsv(const InversionResult& result);

}  // namespace fncode

#endif  // FNCODE_INVERSION_H_
