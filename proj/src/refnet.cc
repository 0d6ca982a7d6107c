#include "fncode/refnet.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fncode/binary_io.h"
#include "fncode/error.h"
#include "fncode/random.h"

namespace fncode {

void RefNetConfig::Validate() const {
  if (height < 4 || width < 4 || height % 4 != 0 || width % 4 != 0) {
    throw InvalidArgument("RefNetConfig: height and width must be positive "
                          "multiples of 4");
  }
  if (kernel < 1 || kernel % 2 == 0) {
    throw InvalidArgument("RefNetConfig: kernel must be odd and >= 1");
  }
  if (conv1 < 1 || conv2 < 1) {
    throw InvalidArgument("RefNetConfig: channel counts must be >= 1");
  }
  if (n_classes < 2) throw InvalidArgument("RefNetConfig: n_classes must be >= 2");
}

const char* ProbeTag(Probe probe) { return probe == Probe::kL1 ? "L1" : "L2"; }

Probe ParseProbe(const std::string& tag) {
  if (tag == "L1") return Probe::kL1;
  if (tag == "L2") return Probe::kL2;
  throw InvalidArgument("unknown layer tag '" + tag + "' (valid: L1, L2)");
}

RefNet::RefNet(const RefNetConfig& config) : config_(config) {
  config_.Validate();
  const size_t kk = static_cast<size_t>(config.kernel) * config.kernel;
  params_.conv1_w.assign(config.conv1 * kk, 0.0f);
  params_.conv1_b.assign(config.conv1, 0.0f);
  params_.conv2_w.assign(static_cast<size_t>(config.conv2) * config.conv1 * kk,
                         0.0f);
  params_.conv2_b.assign(config.conv2, 0.0f);
  params_.dense_w.assign(
      static_cast<size_t>(config.n_classes) * config.dense_inputs(), 0.0f);
  params_.dense_b.assign(config.n_classes, 0.0f);
}

RefNet RefNet::Initialize(const RefNetConfig& config, uint64_t seed) {
  RefNet net(config);
  Rng rng(seed);
  const double kk = static_cast<double>(config.kernel) * config.kernel;
  const auto fill = [&rng](std::vector<float>& w, double stddev) {
    for (float& v : w) v = static_cast<float>(rng.Normal() * stddev);
  };
  fill(net.params_.conv1_w, std::sqrt(2.0 / kk));
  fill(net.params_.conv2_w, std::sqrt(2.0 / (kk * config.conv1)));
  fill(net.params_.dense_w, std::sqrt(1.0 / config.dense_inputs()));
  return net;
}

namespace {

// Zero-padded "same" convolution. in: [cin][h][w], out: [cout][h][w].
void Conv(const double* in, int cin, int h, int w, const float* weight,
          const float* bias, int cout, int k, double* out) {
  const int pad = k / 2;
  for (int o = 0; o < cout; ++o) {
    double* dst = out + static_cast<size_t>(o) * h * w;
    std::fill(dst, dst + h * w, static_cast<double>(bias[o]));
    for (int i = 0; i < cin; ++i) {
      const double* src = in + static_cast<size_t>(i) * h * w;
      const float* kern = weight + (static_cast<size_t>(o) * cin + i) * k * k;
      for (int dy = 0; dy < k; ++dy) {
        for (int dx = 0; dx < k; ++dx) {
          const double wv = kern[dy * k + dx];
          const int oy = dy - pad;
          const int ox = dx - pad;
          const int y0 = std::max(0, -oy), y1 = std::min(h, h - oy);
          const int x0 = std::max(0, -ox), x1 = std::min(w, w - ox);
          for (int y = y0; y < y1; ++y) {
            const double* srow = src + (y + oy) * w + ox;
            double* drow = dst + y * w;
            for (int x = x0; x < x1; ++x) drow[x] += wv * srow[x];
          }
        }
      }
    }
  }
}

// Backward of Conv. din (nullable) and dweight/dbias (nullable) are
// accumulated.
void ConvBackward(const double* in, int cin, int h, int w, const float* weight,
                  int cout, int k, const double* dout, double* din,
                  float* dweight, float* dbias) {
  const int pad = k / 2;
  for (int o = 0; o < cout; ++o) {
    const double* g = dout + static_cast<size_t>(o) * h * w;
    if (dbias) {
      double s = 0.0;
      for (int p = 0; p < h * w; ++p) s += g[p];
      dbias[o] += static_cast<float>(s);
    }
    for (int i = 0; i < cin; ++i) {
      const double* src = in + static_cast<size_t>(i) * h * w;
      double* dsrc = din ? din + static_cast<size_t>(i) * h * w : nullptr;
      const size_t kbase = (static_cast<size_t>(o) * cin + i) * k * k;
      for (int dy = 0; dy < k; ++dy) {
        for (int dx = 0; dx < k; ++dx) {
          const double wv = weight[kbase + dy * k + dx];
          const int oy = dy - pad;
          const int ox = dx - pad;
          const int y0 = std::max(0, -oy), y1 = std::min(h, h - oy);
          const int x0 = std::max(0, -ox), x1 = std::min(w, w - ox);
          double dw = 0.0;
          for (int y = y0; y < y1; ++y) {
            const double* grow = g + y * w;
            const double* srow = src + (y + oy) * w + ox;
            for (int x = x0; x < x1; ++x) dw += grow[x] * srow[x];
            if (dsrc) {
              double* drow = dsrc + (y + oy) * w + ox;
              for (int x = x0; x < x1; ++x) drow[x] += wv * grow[x];
            }
          }
          if (dweight) dweight[kbase + dy * k + dx] += static_cast<float>(dw);
        }
      }
    }
  }
}

void Relu(std::vector<double>& v) {
  for (double& x : v) x = x > 0.0 ? x : 0.0;
}

// 2x2 average pool. in: [c][h][w] -> out: [c][h/2][w/2].
std::vector<double> Pool2(const std::vector<double>& in, int c, int h, int w) {
  const int oh = h / 2, ow = w / 2;
  std::vector<double> out(static_cast<size_t>(c) * oh * ow);
  for (int ch = 0; ch < c; ++ch) {
    const double* src = in.data() + static_cast<size_t>(ch) * h * w;
    double* dst = out.data() + static_cast<size_t>(ch) * oh * ow;
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        const double* p = src + 2 * y * w + 2 * x;
        dst[y * ow + x] = 0.25 * (p[0] + p[1] + p[w] + p[w + 1]);
      }
    }
  }
  return out;
}

std::vector<double> Pool2Backward(const std::vector<double>& dout, int c, int h,
                                  int w) {
  const int oh = h / 2, ow = w / 2;
  std::vector<double> din(static_cast<size_t>(c) * h * w, 0.0);
  for (int ch = 0; ch < c; ++ch) {
    const double* g = dout.data() + static_cast<size_t>(ch) * oh * ow;
    double* dst = din.data() + static_cast<size_t>(ch) * h * w;
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        const double v = 0.25 * g[y * ow + x];
        double* p = dst + 2 * y * w + 2 * x;
        p[0] += v;
        p[1] += v;
        p[w] += v;
        p[w + 1] += v;
      }
    }
  }
  return din;
}

struct Activations {
  std::vector<double> z1, p1, z2, p2, logits;
};

void CheckImage(const RefNetConfig& cfg, const Image& x) {
  if (x.height != cfg.height || x.width != cfg.width ||
      x.pixels.size() != static_cast<size_t>(cfg.height) * cfg.width) {
    throw InvalidArgument("image shape " + std::to_string(x.height) + "x" +
                          std::to_string(x.width) + " does not match net input " +
                          std::to_string(cfg.height) + "x" +
                          std::to_string(cfg.width));
  }
}

Activations RunForward(const RefNet& net, const Image& x) {
  const RefNetConfig& c = net.config();
  const RefNetParams& p = net.params();
  CheckImage(c, x);
  Activations a;
  const int h1 = c.height, w1 = c.width;
  a.z1.resize(static_cast<size_t>(c.conv1) * h1 * w1);
  Conv(x.pixels.data(), 1, h1, w1, p.conv1_w.data(), p.conv1_b.data(), c.conv1,
       c.kernel, a.z1.data());
  std::vector<double> r1 = a.z1;
  Relu(r1);
  a.p1 = Pool2(r1, c.conv1, h1, w1);

  const int h2 = c.pooled1_h(), w2 = c.pooled1_w();
  a.z2.resize(static_cast<size_t>(c.conv2) * h2 * w2);
  Conv(a.p1.data(), c.conv1, h2, w2, p.conv2_w.data(), p.conv2_b.data(),
       c.conv2, c.kernel, a.z2.data());
  std::vector<double> r2 = a.z2;
  Relu(r2);
  a.p2 = Pool2(r2, c.conv2, h2, w2);

  const int n_in = c.dense_inputs();
  a.logits.resize(c.n_classes);
  for (int k = 0; k < c.n_classes; ++k) {
    const float* row = p.dense_w.data() + static_cast<size_t>(k) * n_in;
    double s = p.dense_b[k];
    for (int j = 0; j < n_in; ++j) s += row[j] * a.p2[j];
    a.logits[k] = s;
  }
  return a;
}

// Upstream gradients entering the backward pass; empty vectors mean zero.
struct Upstream {
  std::vector<double> dlogits;
  std::vector<double> dp1;
  std::vector<double> dp2;
};

// Backpropagates to the input (if dinput) and parameters (if grads).
void RunBackward(const RefNet& net, const Image& x, const Activations& a,
                 const Upstream& up, std::vector<double>* dinput,
                 RefNetParams* grads) {
  const RefNetConfig& c = net.config();
  const RefNetParams& p = net.params();
  const int n_in = c.dense_inputs();

  std::vector<double> dp2(a.p2.size(), 0.0);
  if (!up.dp2.empty()) dp2 = up.dp2;
  if (!up.dlogits.empty()) {
    for (int k = 0; k < c.n_classes; ++k) {
      const double g = up.dlogits[k];
      if (g == 0.0) continue;
      const float* row = p.dense_w.data() + static_cast<size_t>(k) * n_in;
      for (int j = 0; j < n_in; ++j) dp2[j] += g * row[j];
      if (grads) {
        float* grow = grads->dense_w.data() + static_cast<size_t>(k) * n_in;
        for (int j = 0; j < n_in; ++j) {
          grow[j] += static_cast<float>(g * a.p2[j]);
        }
        grads->dense_b[k] += static_cast<float>(g);
      }
    }
  }

  const int h2 = c.pooled1_h(), w2 = c.pooled1_w();
  std::vector<double> dz2 = Pool2Backward(dp2, c.conv2, h2, w2);
  for (size_t i = 0; i < dz2.size(); ++i) {
    if (!(a.z2[i] > 0.0)) dz2[i] = 0.0;
  }
  std::vector<double> dp1(a.p1.size(), 0.0);
  ConvBackward(a.p1.data(), c.conv1, h2, w2, p.conv2_w.data(), c.conv2,
               c.kernel, dz2.data(), dp1.data(),
               grads ? grads->conv2_w.data() : nullptr,
               grads ? grads->conv2_b.data() : nullptr);
  if (!up.dp1.empty()) {
    for (size_t i = 0; i < dp1.size(); ++i) dp1[i] += up.dp1[i];
  }

  const int h1 = c.height, w1 = c.width;
  std::vector<double> dz1 = Pool2Backward(dp1, c.conv1, h1, w1);
  for (size_t i = 0; i < dz1.size(); ++i) {
    if (!(a.z1[i] > 0.0)) dz1[i] = 0.0;
  }
  if (dinput) dinput->assign(static_cast<size_t>(h1) * w1, 0.0);
  ConvBackward(x.pixels.data(), 1, h1, w1, p.conv1_w.data(), c.conv1, c.kernel,
               dz1.data(), dinput ? dinput->data() : nullptr,
               grads ? grads->conv1_w.data() : nullptr,
               grads ? grads->conv1_b.data() : nullptr);
}

ActivationTensor MakeTensor(const std::vector<double>& values, int channels,
                            int h, int w) {
  ActivationTensor t;
  t.channels = channels;
  t.height = h;
  t.width = w;
  t.values = values;
  return t;
}

// Softmax cross-entropy; writes p - onehot into dlogits when non-null.
double CrossEntropy(const std::vector<double>& logits, uint32_t target,
                    std::vector<double>* dlogits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double l : logits) sum += std::exp(l - mx);
  const double lse = mx + std::log(sum);
  if (dlogits) {
    dlogits->resize(logits.size());
    for (size_t k = 0; k < logits.size(); ++k) {
      (*dlogits)[k] = std::exp(logits[k] - lse) - (k == target ? 1.0 : 0.0);
    }
  }
  return lse - logits[target];
}

// Cosine loss on the pooled probe. Writes dL/d(probe tensor) when non-null.
double CosineProbeLoss(const std::vector<double>& probe, int channels,
                       int plane, const std::vector<double>& target,
                       std::vector<double>* dprobe) {
  std::vector<double> q(channels, 0.0);
  for (int ch = 0; ch < channels; ++ch) {
    const double* src = probe.data() + static_cast<size_t>(ch) * plane;
    double s = 0.0;
    for (int i = 0; i < plane; ++i) s += src[i];
    q[ch] = s / plane;
  }
  double qq = 0.0, tt = 0.0, qt = 0.0;
  for (int ch = 0; ch < channels; ++ch) {
    qq += q[ch] * q[ch];
    tt += target[ch] * target[ch];
    qt += q[ch] * target[ch];
  }
  if (dprobe) dprobe->assign(probe.size(), 0.0);
  if (qq == 0.0) return 1.0;
  const double qn = std::sqrt(qq), tn = std::sqrt(tt);
  const double cos = std::clamp(qt / (qn * tn), -1.0, 1.0);
  if (dprobe) {
    for (int ch = 0; ch < channels; ++ch) {
      const double dq = -(target[ch] / (qn * tn) - cos * q[ch] / qq);
      double* dst = dprobe->data() + static_cast<size_t>(ch) * plane;
      for (int i = 0; i < plane; ++i) dst[i] = dq / plane;
    }
  }
  return 1.0 - cos;
}

void CheckTargetClass(const RefNetConfig& c, uint32_t target) {
  if (target >= static_cast<uint32_t>(c.n_classes)) {
    throw InvalidArgument("target class " + std::to_string(target) +
                          " outside [0, " + std::to_string(c.n_classes) + ")");
  }
}

void CheckCosineTarget(const RefNetConfig& c, const CosineLoss& loss) {
  const int dim = loss.probe == Probe::kL1 ? c.conv1 : c.conv2;
  if (loss.target.size() != static_cast<size_t>(dim)) {
    throw InvalidArgument("cosine target length " +
                          std::to_string(loss.target.size()) + " != " +
                          ProbeTag(loss.probe) + " dim " + std::to_string(dim));
  }
  double tt = 0.0;
  for (double v : loss.target) tt += v * v;
  if (tt == 0.0) throw InvalidArgument("cosine target must be nonzero");
}

// Evaluates the loss and, if dinput is non-null, its input gradient.
double LossAndGradient(const RefNet& net, const Image& x, const LossSpec& loss,
                       std::vector<double>* dinput) {
  const RefNetConfig& c = net.config();
  const Activations a = RunForward(net, x);
  Upstream up;
  double value = 0.0;
  if (const auto* ce = std::get_if<CrossEntropyLoss>(&loss)) {
    CheckTargetClass(c, ce->target);
    value = CrossEntropy(a.logits, ce->target, dinput ? &up.dlogits : nullptr);
  } else {
    const auto& cl = std::get<CosineLoss>(loss);
    CheckCosineTarget(c, cl);
    if (cl.probe == Probe::kL1) {
      value = CosineProbeLoss(a.p1, c.conv1, c.pooled1_h() * c.pooled1_w(),
                              cl.target, dinput ? &up.dp1 : nullptr);
    } else {
      value = CosineProbeLoss(a.p2, c.conv2, c.pooled2_h() * c.pooled2_w(),
                              cl.target, dinput ? &up.dp2 : nullptr);
    }
  }
  if (dinput) RunBackward(net, x, a, up, dinput, nullptr);
  return value;
}

}  // namespace

ForwardResult Forward(const RefNet& net, const Image& x) {
  const RefNetConfig& c = net.config();
  Activations a = RunForward(net, x);
  ForwardResult r;
  r.logits = std::move(a.logits);
  r.l1 = MakeTensor(a.p1, c.conv1, c.pooled1_h(), c.pooled1_w());
  r.l2 = MakeTensor(a.p2, c.conv2, c.pooled2_h(), c.pooled2_w());
  return r;
}

uint32_t Predict(const RefNet& net, const Image& x) {
  const Activations a = RunForward(net, x);
  return static_cast<uint32_t>(
      std::max_element(a.logits.begin(), a.logits.end()) - a.logits.begin());
}

double EvaluateLoss(const RefNet& net, const Image& x, const LossSpec& loss) {
  return LossAndGradient(net, x, loss, nullptr);
}

Image InputGradient(const RefNet& net, const Image& x, const LossSpec& loss,
                    double* loss_value) {
  Image g{x.height, x.width, {}};
  const double v = LossAndGradient(net, x, loss, &g.pixels);
  if (loss_value) *loss_value = v;
  return g;
}

double AccumulateParamGradient(const RefNet& net, const Image& x,
                               uint32_t label, RefNetParams* grads) {
  CheckTargetClass(net.config(), label);
  const Activations a = RunForward(net, x);
  Upstream up;
  const double loss = CrossEntropy(a.logits, label, &up.dlogits);
  RunBackward(net, x, a, up, nullptr, grads);
  return loss;
}

std::vector<bool> ReluMask(const RefNet& net, const Image& x) {
  const Activations a = RunForward(net, x);
  std::vector<bool> mask;
  mask.reserve(a.z1.size() + a.z2.size());
  for (double z : a.z1) mask.push_back(z > 0.0);
  for (double z : a.z2) mask.push_back(z > 0.0);
  return mask;
}

namespace {

void DrawShape(int cls, int s, double amp, Rng& rng, Image& img) {
  const auto put = [&](int y, int x) {
    if (y >= 0 && y < s && x >= 0 && x < s) img.at(y, x) = amp;
  };
  const auto rand_int = [&rng](int lo, int hi) {  // inclusive
    return lo + static_cast<int>(rng.UniformIndex(hi - lo + 1));
  };
  switch (cls) {
    case 0: {  // horizontal bar
      const int r = rand_int(2, s - 4);
      const int c0 = rand_int(0, 3), c1 = s - 1 - rand_int(0, 3);
      for (int x = c0; x <= c1; ++x) {
        put(r, x);
        put(r + 1, x);
      }
      break;
    }
    case 1: {  // vertical bar
      const int c = rand_int(2, s - 4);
      const int r0 = rand_int(0, 3), r1 = s - 1 - rand_int(0, 3);
      for (int y = r0; y <= r1; ++y) {
        put(y, c);
        put(y, c + 1);
      }
      break;
    }
    case 2: {  // diagonal
      const int off = rand_int(-s / 4, s / 4);
      for (int y = 0; y < s; ++y) {
        put(y, y + off);
        put(y, y + off + 1);
      }
      break;
    }
    case 3: {  // anti-diagonal
      const int off = rand_int(-s / 4, s / 4);
      for (int y = 0; y < s; ++y) {
        put(y, s - 1 - y + off);
        put(y, s - 2 - y + off);
      }
      break;
    }
    case 4: {  // plus-shaped cross
      const int cy = rand_int(s / 4, s - 1 - s / 4);
      const int cx = rand_int(s / 4, s - 1 - s / 4);
      const int arm = rand_int(3, std::max(3, s / 3));
      for (int d = -arm; d <= arm; ++d) {
        put(cy + d, cx);
        put(cy, cx + d);
      }
      break;
    }
    case 5: {  // filled disk
      const double cy = rand_int(s / 4, s - 1 - s / 4);
      const double cx = rand_int(s / 4, s - 1 - s / 4);
      const double r = rng.Uniform(2.0, s / 4.0);
      for (int y = 0; y < s; ++y) {
        for (int x = 0; x < s; ++x) {
          if ((y - cy) * (y - cy) + (x - cx) * (x - cx) <= r * r) put(y, x);
        }
      }
      break;
    }
    case 6: {  // checkerboard
      const int cell = rand_int(2, 3);
      const int py = rand_int(0, cell - 1), px = rand_int(0, cell - 1);
      for (int y = 0; y < s; ++y) {
        for (int x = 0; x < s; ++x) {
          if ((((y + py) / cell) + ((x + px) / cell)) % 2 == 0) put(y, x);
        }
      }
      break;
    }
    default: {  // ring
      const double cy = rand_int(s / 2 - 2, s / 2 + 1);
      const double cx = rand_int(s / 2 - 2, s / 2 + 1);
      const double r = rng.Uniform(s / 4.0, s / 3.0);
      for (int y = 0; y < s; ++y) {
        for (int x = 0; x < s; ++x) {
          const double d = std::sqrt((y - cy) * (y - cy) + (x - cx) * (x - cx));
          if (std::abs(d - r) < 0.75) put(y, x);
        }
      }
      break;
    }
  }
}

}  // namespace

ShapeDataset GenerateShapes(const ShapeDatasetConfig& config) {
  if (config.n_classes < 2 || config.n_classes > 8) {
    throw InvalidArgument("ShapeDataset: n_classes must be in [2, 8]");
  }
  if (config.size < 8) throw InvalidArgument("ShapeDataset: size must be >= 8");
  if (config.per_class < 0) {
    throw InvalidArgument("ShapeDataset: per_class must be >= 0");
  }
  if (config.noise < 0.0) throw InvalidArgument("ShapeDataset: noise must be >= 0");
  ShapeDataset ds;
  ds.n_classes = config.n_classes;
  Rng rng(config.seed);
  const int s = config.size;
  for (int i = 0; i < config.per_class; ++i) {
    for (int cls = 0; cls < config.n_classes; ++cls) {
      Image img{s, s, std::vector<double>(static_cast<size_t>(s) * s, 0.0)};
      DrawShape(cls, s, rng.Uniform(0.6, 1.0), rng, img);
      for (double& v : img.pixels) {
        v = std::clamp(v + config.noise * rng.Normal(), 0.0, 1.0);
      }
      ds.images.push_back(std::move(img));
      ds.labels.push_back(static_cast<uint32_t>(cls));
    }
  }
  return ds;
}

double Accuracy(const RefNet& net, const ShapeDataset& data) {
  if (data.images.empty()) return 0.0;
  size_t correct = 0;
  for (size_t i = 0; i < data.images.size(); ++i) {
    if (Predict(net, data.images[i]) == data.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / data.images.size();
}

RefNetTrainReport TrainRefNet(RefNet& net, const ShapeDataset& data,
                              const RefNetTrainOptions& options) {
  if (data.images.empty()) throw InvalidArgument("TrainRefNet: empty dataset");
  if (options.steps < 1) throw InvalidArgument("TrainRefNet: steps must be >= 1");
  if (!(options.lr > 0.0)) throw InvalidArgument("TrainRefNet: lr must be > 0");
  if (options.batch < 1) throw InvalidArgument("TrainRefNet: batch must be >= 1");
  if (options.momentum < 0.0 || options.momentum >= 1.0) {
    throw InvalidArgument("TrainRefNet: momentum must be in [0, 1)");
  }
  RefNetTrainReport report;
  report.initial_accuracy = Accuracy(net, data);

  RefNetParams& params = net.mutable_params();
  RefNetParams zero = params;
  for (std::vector<float>* t : zero.tensors()) {
    std::fill(t->begin(), t->end(), 0.0f);
  }
  std::array<std::vector<double>, 6> velocity;
  for (size_t t = 0; t < velocity.size(); ++t) {
    velocity[t].assign(params.tensors()[t]->size(), 0.0);
  }

  Rng rng(options.seed);
  std::vector<uint32_t> order(data.images.size());
  std::iota(order.begin(), order.end(), 0u);
  rng.Shuffle(std::span<uint32_t>(order));
  size_t cursor = 0;
  double running_loss = 0.0;
  for (int step = 0; step < options.steps; ++step) {
    RefNetParams grads = zero;
    double batch_loss = 0.0;
    for (int b = 0; b < options.batch; ++b) {
      if (cursor == order.size()) {
        rng.Shuffle(std::span<uint32_t>(order));
        cursor = 0;
      }
      const uint32_t idx = order[cursor++];
      batch_loss +=
          AccumulateParamGradient(net, data.images[idx], data.labels[idx], &grads);
    }
    const double scale = 1.0 / options.batch;
    for (size_t t = 0; t < velocity.size(); ++t) {
      std::vector<float>& p = *params.tensors()[t];
      const std::vector<float>& g = *grads.tensors()[t];
      for (size_t i = 0; i < p.size(); ++i) {
        velocity[t][i] = options.momentum * velocity[t][i] + g[i] * scale;
        p[i] = static_cast<float>(p[i] - options.lr * velocity[t][i]);
      }
    }
    running_loss = batch_loss * scale;
  }
  report.final_loss = running_loss;
  report.final_accuracy = Accuracy(net, data);
  return report;
}

HlrDataset ExtractHlr(const RefNet& net, const ShapeDataset& data, Probe probe) {
  std::vector<ActivationTensor> tensors;
  tensors.reserve(data.images.size());
  for (size_t i = 0; i < data.images.size(); ++i) {
    ForwardResult r = Forward(net, data.images[i]);
    ActivationTensor t = probe == Probe::kL1 ? std::move(r.l1) : std::move(r.l2);
    t.label = data.labels[i];
    tensors.push_back(std::move(t));
  }
  HlrDataset ds = BuildHlrDataset(tensors, ProbeTag(probe));
  if (data.images.empty()) {
    const RefNetConfig& c = net.config();
    ds.dim = static_cast<uint32_t>(probe == Probe::kL1 ? c.conv1 : c.conv2);
    ds.labels = std::vector<uint32_t>{};
  }
  return ds;
}

std::string EncodeRefNet(const RefNet& net) {
  const RefNetConfig& c = net.config();
  ByteWriter w;
  w.Bytes("RNET");
  w.U32(kRefNetVersion);
  for (int v : {c.height, c.width, c.kernel, c.conv1, c.conv2, c.n_classes}) {
    w.U32(static_cast<uint32_t>(v));
  }
  for (const std::vector<float>* t : net.params().tensors()) w.F32Array(*t);
  return w.buffer();
}

RefNet DecodeRefNet(std::string_view bytes) {
  ByteReader r(bytes);
  if (r.Bytes(4, "magic") != "RNET") {
    throw FormatError(FormatErrorKind::kBadMagic, "magic", "expected 'RNET'");
  }
  const uint32_t version = r.U32("version");
  if (version != kRefNetVersion) {
    throw FormatError(FormatErrorKind::kBadVersion, "version",
                      "unsupported version " + std::to_string(version));
  }
  RefNetConfig c;
  const char* names[] = {"height", "width", "kernel", "conv1", "conv2",
                         "n_classes"};
  int* fields[] = {&c.height, &c.width,  &c.kernel,
                   &c.conv1,  &c.conv2, &c.n_classes};
  for (int i = 0; i < 6; ++i) {
    const uint32_t v = r.U32(names[i]);
    if (v > 4096) {
      throw FormatError(FormatErrorKind::kBadValue, names[i],
                        "value " + std::to_string(v) + " out of range");
    }
    *fields[i] = static_cast<int>(v);
  }
  try {
    c.Validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(FormatErrorKind::kBadValue, "layer dims", e.what());
  }
  RefNet net(c);
  const char* tensor_names[] = {"conv1_w", "conv1_b", "conv2_w",
                                "conv2_b", "dense_w", "dense_b"};
  auto tensors = net.mutable_params().tensors();
  for (size_t i = 0; i < tensors.size(); ++i) {
    *tensors[i] = r.F32Array(tensors[i]->size(), tensor_names[i]);
  }
  r.ExpectEnd("end");
  return net;
}

void SaveRefNet(const RefNet& net, const std::string& path) {
  WriteFileBytes(path, EncodeRefNet(net));
}

RefNet LoadRefNet(const std::string& path) {
  return DecodeRefNet(ReadFileBytes(path));
}

}  // namespace fncode
