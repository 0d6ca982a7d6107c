#include "fncode/inversion.h"

#include <algorithm>
#include <cmath>

#include "fncode/error.h"
#include "fncode/format.h"
#include "fncode/random.h"

namespace fncode {

double CosineDistance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw InvalidArgument("CosineDistance: length mismatch (" +
                          std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()) + ")");
  }
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) {
    throw InvalidArgument("CosineDistance: zero-norm input");
  }
  const double cos = std::clamp(ab / (std::sqrt(aa) * std::sqrt(bb)), -1.0, 1.0);
  return 1.0 - cos;
}

void InversionConfig::Validate() const {
  if (!(lr > 0.0)) throw InvalidArgument("InversionConfig: lr must be > 0");
  if (n_iter < 1) throw InvalidArgument("InversionConfig: n_iter must be >= 1");
  if (!(smoothness_lambda >= 0.0)) {
    throw InvalidArgument("InversionConfig: smoothness_lambda must be >= 0");
  }
}

namespace {

// Sum of squared differences between horizontally and vertically adjacent
// pixels; adds lambda * gradient into grad.
double Smoothness(const Image& x, double lambda, std::vector<double>& grad) {
  double s = 0.0;
  for (int y = 0; y < x.height; ++y) {
    for (int c = 0; c < x.width; ++c) {
      const size_t i = static_cast<size_t>(y) * x.width + c;
      if (c + 1 < x.width) {
        const double d = x.pixels[i + 1] - x.pixels[i];
        s += d * d;
        grad[i + 1] += lambda * 2.0 * d;
        grad[i] -= lambda * 2.0 * d;
      }
      if (y + 1 < x.height) {
        const size_t j = i + x.width;
        const double d = x.pixels[j] - x.pixels[i];
        s += d * d;
        grad[j] += lambda * 2.0 * d;
        grad[i] -= lambda * 2.0 * d;
      }
    }
  }
  return s;
}

}  // namespace

InversionResult InvertCode(const RefNet& net, Probe probe,
                           const InversionConfig& cfg) {
  cfg.Validate();
  const RefNetConfig& nc = net.config();
  const int dim = probe == Probe::kL1 ? nc.conv1 : nc.conv2;
  if (cfg.target.size() != static_cast<size_t>(dim)) {
    throw InvalidArgument("InvertCode: target length " +
                          std::to_string(cfg.target.size()) + " != " +
                          ProbeTag(probe) + " dim " + std::to_string(dim));
  }
  const LossSpec loss = CosineLoss{probe, cfg.target};

  Image x{nc.height, nc.width,
          std::vector<double>(static_cast<size_t>(nc.height) * nc.width, 0.5)};
  if (cfg.init_image) {
    if (cfg.init_image->height != nc.height || cfg.init_image->width != nc.width) {
      throw InvalidArgument("InvertCode: init image shape mismatch");
    }
    x = *cfg.init_image;
    for (double& v : x.pixels) v = std::clamp(v, 0.0, 1.0);
  } else if (cfg.init == InversionInit::kRandomUniform) {
    Rng rng(cfg.seed);
    for (double& v : x.pixels) v = rng.Uniform();
  }

  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kAdamEps = 1e-8;
  std::vector<double> m(x.pixels.size(), 0.0), v(x.pixels.size(), 0.0);
  InversionResult result;
  result.loss_trace.reserve(cfg.n_iter + 1);
  double best = 0.0;
  for (int it = 0; it <= cfg.n_iter; ++it) {
    double value = 0.0;
    Image g = InputGradient(net, x, loss, &value);
    result.loss_trace.push_back(value);
    if (it == 0 || value < best) {
      best = value;
      result.image = x;
    }
    if (it == cfg.n_iter) break;
    if (cfg.smoothness_lambda > 0.0) Smoothness(x, cfg.smoothness_lambda, g.pixels);
    const double bc1 = 1.0 - std::pow(kBeta1, it + 1);
    const double bc2 = 1.0 - std::pow(kBeta2, it + 1);
    for (size_t i = 0; i < x.pixels.size(); ++i) {
      m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g.pixels[i];
      v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g.pixels[i] * g.pixels[i];
      const double step = cfg.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + kAdamEps);
      x.pixels[i] = std::clamp(x.pixels[i] - step, 0.0, 1.0);
    }
  }
  result.final_loss = best;
  return result;
}

std::vector<InversionResult> InvertAttractors(const RefNet& net,
                                              const SomGrid& som, Probe probe,
                                              const DensityMap& density,
                                              int top_k,
                                              const InversionConfig& cfg,
                                              double min_percentile) {
  if (density.rows != som.rows() || density.cols != som.cols()) {
    throw InvalidArgument("InvertAttractors: density map shape does not match SOM");
  }
  const std::vector<Attractor> attractors =
      FindAttractors(density, top_k, min_percentile);
  if (attractors.empty()) {
    Warn("InvertAttractors: no attractors above the percentile threshold");
    return {};
  }
  std::vector<InversionResult> results;
  for (const Attractor& a : attractors) {
    InversionConfig c = cfg;
    const std::span<const float> w = som.weights(GridCoord{a.row, a.col});
    c.target.assign(w.begin(), w.end());
    c.seed = cfg.seed + static_cast<uint64_t>(a.rank);
    results.push_back(InvertCode(net, probe, c));
  }
  return results;
}

std::string LossTraceCsv(const InversionResult& result) {
  std::string out = "iteration,cosine_distance\n";
  for (size_t i = 0; i < result.loss_trace.size(); ++i) {
    out += std::to_string(i) + "," + FormatDouble(result.loss_trace[i]) + "\n";
  }
  return out;
}

}  // namespace fncode
