#include "fncode/adversarial.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fncode/error.h"
#include "fncode/format.h"
#include "fncode/random.h"

namespace fncode {

void PgdConfig::Validate() const {
  if (!(eps >= 0.0)) throw InvalidArgument("PgdConfig: eps must be >= 0");
  if (!(step > 0.0)) throw InvalidArgument("PgdConfig: step must be > 0");
  if (n_iter < 0) throw InvalidArgument("PgdConfig: n_iter must be >= 0");
  if (!(clip_min < clip_max)) {
    throw InvalidArgument("PgdConfig: clip_min must be < clip_max");
  }
}

Image PgdAttack(const RefNet& net, const Image& x, uint32_t label,
                const PgdConfig& cfg) {
  cfg.Validate();
  const RefNetConfig& nc = net.config();
  if (label >= static_cast<uint32_t>(nc.n_classes)) {
    throw InvalidArgument("PgdAttack: label " + std::to_string(label) +
                          " outside [0, " + std::to_string(nc.n_classes) + ")");
  }
  for (double v : x.pixels) {
    if (!(v >= cfg.clip_min && v <= cfg.clip_max)) {
      throw InvalidArgument("PgdAttack: input pixel outside clip bounds");
    }
  }
  const uint32_t loss_class =
      cfg.targeted ? cfg.target_class.value_or((label + 1) % nc.n_classes)
                   : label;
  const LossSpec loss = CrossEntropyLoss{loss_class};
  const double direction = cfg.targeted ? -1.0 : 1.0;

  const auto project = [&](double v, double origin) {
    v = std::clamp(v, origin - cfg.eps, origin + cfg.eps);
    return std::clamp(v, cfg.clip_min, cfg.clip_max);
  };

  Image adv = x;
  if (cfg.rand_init) {
    Rng rng(cfg.seed);
    for (size_t i = 0; i < adv.pixels.size(); ++i) {
      adv.pixels[i] = project(x.pixels[i] + rng.Uniform(-cfg.eps, cfg.eps),
                              x.pixels[i]);
    }
  }
  for (int it = 0; it < cfg.n_iter; ++it) {
    const Image g = InputGradient(net, adv, loss);
    for (size_t i = 0; i < adv.pixels.size(); ++i) {
      const double s = g.pixels[i] > 0.0 ? 1.0 : (g.pixels[i] < 0.0 ? -1.0 : 0.0);
      adv.pixels[i] =
          project(adv.pixels[i] + direction * cfg.step * s, x.pixels[i]);
    }
  }
  return adv;
}

namespace {

GridCoord BmuOf(const RefNet& net, const Image& img, const SomProbe& probe) {
  const ForwardResult r = Forward(net, img);
  const std::vector<double> hlr = Normalize(AveragePool(r.probe(probe.probe)));
  std::vector<float> v(hlr.begin(), hlr.end());
  return FindBmu(*probe.som, v).coord();
}

}  // namespace

std::vector<DisplacementCurve> DisplacementExperiment(
    const RefNet& net, std::span<const SomProbe> probes,
    std::span<const Image> images, std::span<const uint32_t> labels,
    std::span<const double> eps_values, const PgdConfig& cfg,
    bool force_planar) {
  if (images.size() != labels.size()) {
    throw InvalidArgument("DisplacementExperiment: image and label counts differ");
  }
  const RefNetConfig& nc = net.config();
  std::vector<DisplacementCurve> curves;
  std::vector<SomGrid> metric_grids;
  for (const SomProbe& p : probes) {
    if (p.som == nullptr) throw InvalidArgument("DisplacementExperiment: null SOM");
    const int dim = p.probe == Probe::kL1 ? nc.conv1 : nc.conv2;
    if (p.som->dim() != dim) {
      throw InvalidArgument(std::string("DisplacementExperiment: SOM dim ") +
                            std::to_string(p.som->dim()) + " != " +
                            ProbeTag(p.probe) + " dim " + std::to_string(dim));
    }
    DisplacementCurve c;
    c.layer_tag = ProbeTag(p.probe);
    c.eps.assign(eps_values.begin(), eps_values.end());
    c.distances.assign(eps_values.size(), {});
    curves.push_back(std::move(c));
    // Metric-only copy with a single weight so distances can be computed
    // with the requested topology.
    metric_grids.emplace_back(p.som->rows(), p.som->cols(), 1,
                              force_planar ? Topology::kPlanar
                                           : p.som->topology());
  }

  std::vector<std::vector<GridCoord>> clean(probes.size());
  for (size_t p = 0; p < probes.size(); ++p) {
    for (const Image& img : images) clean[p].push_back(BmuOf(net, img, probes[p]));
  }

  for (size_t e = 0; e < eps_values.size(); ++e) {
    PgdConfig c = cfg;
    c.eps = eps_values[e];
    for (size_t i = 0; i < images.size(); ++i) {
      c.seed = DeriveSeed(cfg.seed, i);
      const Image adv = PgdAttack(net, images[i], labels[i], c);
      for (size_t p = 0; p < probes.size(); ++p) {
        const GridCoord b = BmuOf(net, adv, probes[p]);
        curves[p].distances[e].push_back(
            metric_grids[p].GridDistance(clean[p][i], b));
      }
    }
  }

  for (DisplacementCurve& c : curves) {
    for (const std::vector<double>& d : c.distances) {
      const double n = static_cast<double>(d.size());
      double mean = 0.0;
      for (double v : d) mean += v;
      mean = d.empty() ? 0.0 : mean / n;
      double ss = 0.0;
      for (double v : d) ss += (v - mean) * (v - mean);
      c.mean.push_back(mean);
      c.stderr_.push_back(d.size() > 1 ? std::sqrt(ss / (n - 1.0)) / std::sqrt(n)
                                       : 0.0);
    }
  }
  return curves;
}

std::string DisplacementCsv(std::span<const DisplacementCurve> curves) {
  std::string out = "layer_tag,eps,mean,stderr,n\n";
  for (const DisplacementCurve& c : curves) {
    for (size_t e = 0; e < c.eps.size(); ++e) {
      out += c.layer_tag + "," + FormatDouble(c.eps[e]) + "," +
             FormatDouble(c.mean[e]) + "," + FormatDouble(c.stderr_[e]) + "," +
             std::to_string(c.distances[e].size()) + "\n";
    }
  }
  return out;
}

std::string DisplacementRawCsv(std::span<const DisplacementCurve> curves) {
  std::string out = "layer_tag,eps,pair,distance\n";
  for (const DisplacementCurve& c : curves) {
    for (size_t e = 0; e < c.eps.size(); ++e) {
      for (size_t i = 0; i < c.distances[e].size(); ++i) {
        out += c.layer_tag + "," + FormatDouble(c.eps[e]) + "," +
               std::to_string(i) + "," + FormatDouble(c.distances[e][i]) + "\n";
      }
    }
  }
  return out;
}

std::vector<TTestRow> CompareEps(std::span<const DisplacementCurve> curves,
                                 double eps_a, double eps_b) {
  std::vector<TTestRow> rows;
  for (const DisplacementCurve& c : curves) {
    const auto find = [&c](double eps) {
      const auto it = std::find(c.eps.begin(), c.eps.end(), eps);
      if (it == c.eps.end()) {
        throw InvalidArgument("CompareEps: eps " + FormatDouble(eps) +
                              " not in the sweep");
      }
      return static_cast<size_t>(it - c.eps.begin());
    };
    const std::vector<double>& a = c.distances[find(eps_a)];
    const std::vector<double>& b = c.distances[find(eps_b)];
    TTestRow row{c.layer_tag, eps_a, eps_b, {}};
    const bool a_const = std::all_of(a.begin(), a.end(),
                                     [&a](double v) { return v == a.front(); });
    const bool b_const = std::all_of(b.begin(), b.end(),
                                     [&b](double v) { return v == b.front(); });
    if (a.size() >= 2 && b.size() >= 2 && a_const && b_const) {
      const double diff = a.front() - b.front();
      row.result.df = static_cast<double>(a.size() + b.size() - 2);
      if (diff == 0.0) {
        row.result.t = 0.0;
        row.result.p = 1.0;
      } else {
        row.result.t = diff > 0 ? std::numeric_limits<double>::infinity()
                                : -std::numeric_limits<double>::infinity();
        row.result.p = 0.0;
      }
    } else {
      row.result = WelchTTest(a, b);
    }
    rows.push_back(row);
  }
  return rows;
}

std::string TTestCsv(std::span<const TTestRow> rows) {
  std::string out = "layer_tag,eps_a,eps_b,t,p\n";
  for (const TTestRow& r : rows) {
    out += r.layer_tag + "," + FormatDouble(r.eps_a) + "," +
           FormatDouble(r.eps_b) + "," + FormatDouble(r.result.t) + "," +
           FormatDouble(r.result.p) + "\n";
  }
  return out;
}

}  // namespace fncode
