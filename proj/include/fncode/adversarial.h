#ifndef FNCODE_ADVERSARIAL_H_
#define FNCODE_ADVERSARIAL_H_

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fncode/refnet.h"
#include "fncode/som.h"
#include "fncode/stats.h"

namespace fncode {

struct PgdConfig {
  double eps = 0.03;
  int n_iter = 40;
  double step = 0.002;
  bool rand_init = true;
  bool targeted = true;
  // Target class for targeted attacks; defaults to (label + 1) mod n_classes.
  std::optional<uint32_t> target_class;
  double clip_min = 0.0;
  double clip_max = 1.0;
  uint64_t seed = 0;

  void Validate() const;
};

// L-infinity projected gradient descent on the cross-entropy loss. Targeted
// attacks descend the loss of the target class; untargeted attacks ascend the
// loss of `label`. The result satisfies |x_adv - x|_inf <= eps and
// clip_min <= x_adv <= clip_max.
Image PgdAttack(const RefNet& net, const Image& x, uint32_t label,
                const PgdConfig& cfg);

struct DisplacementCurve {
  std::string layer_tag;
  std::vector<double> eps;
  // distances[e][i]: grid distance between the BMUs of image i and its
  // adversarial counterpart at eps[e].
  std::vector<std::vector<double>> distances;
  std::vector<double> mean;
  std::vector<double> stderr_;
};

struct SomProbe {
  Probe probe;
  const SomGrid* som;
};

// For every eps and image: craft the adversarial image, map both images'
// HLRs through each probe's SOM and record the BMU grid distance. Attack
// seeds are derived from cfg.seed, the eps index and the image index.
// Distances use each SOM's own topology unless planar is forced.
std::vector<DisplacementCurve> DisplacementExperiment(
    const RefNet& net, std::span<const SomProbe> probes,
    std::span<const Image> images, std::span<const uint32_t> labels,
    std::span<const double> eps_values, const PgdConfig& cfg,
    bool force_planar = false);

// "layer_tag,eps,mean,stderr,n" rows.
std::string DisplacementCsv(std::span<const DisplacementCurve> curves);
// "layer_tag,eps,pair,distance" rows.
std::string DisplacementRawCsv(std::span<const DisplacementCurve> curves);

struct TTestRow {
  std::string layer_tag;
  double eps_a = 0.0;
  double eps_b = 0.0;
  TTestResult result;
};

// Welch t-test between the distance samples at eps_a and eps_b for every
// curve. When both samples are constant the test is undefined and the
// samples are compared exactly instead: equal constants give t = 0, p = 1,
// different constants give t = +-inf, p = 0.
std::vector<TTestRow> CompareEps(std::span<const DisplacementCurve> curves,
                                 double eps_a, double eps_b);
// "layer_tag,eps_a,eps_b,t,p" rows.
std::string TTestCsv(std::span<const TTestRow> rows);

}  // namespace fncode

#endif  // FNCODE_ADVERSARIAL_H_
