#ifndef FNCODE_REFNET_H_
#define FNCODE_REFNET_H_

#include <array>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "fncode/hlr.h"

namespace fncode {

// Single-channel image, row-major, pixels nominally in [0, 1].
struct Image {
  int height = 0;
  int width = 0;
  std::vector<double> pixels;

  double& at(int y, int x) { return pixels[static_cast<size_t>(y) * width + x]; }
  double at(int y, int x) const {
    return pixels[static_cast<size_t>(y) * width + x];
  }
  bool operator==(const Image&) const = default;
};

struct RefNetConfig {
  int height = 16;
  int width = 16;
  int kernel = 3;
  int conv1 = 8;
  int conv2 = 16;
  int n_classes = 8;

  void Validate() const;
  int pooled1_h() const { return height / 2; }
  int pooled1_w() const { return width / 2; }
  int pooled2_h() const { return height / 4; }
  int pooled2_w() const { return width / 4; }
  int dense_inputs() const { return conv2 * pooled2_h() * pooled2_w(); }
  bool operator==(const RefNetConfig&) const = default;
};

// Probe points: post-pool activations of conv1 and conv2.
enum class Probe { kL1, kL2 };

const char* ProbeTag(Probe probe);
// Parses "L1"/"L2"; throws InvalidArgument listing the valid tags.
Probe ParseProbe(const std::string& tag);

struct RefNetParams {
  std::vector<float> conv1_w;  // [conv1][kernel][kernel]
  std::vector<float> conv1_b;  // [conv1]
  std::vector<float> conv2_w;  // [conv2][conv1][kernel][kernel]
  std::vector<float> conv2_b;  // [conv2]
  std::vector<float> dense_w;  // [n_classes][dense_inputs]
  std::vector<float> dense_b;  // [n_classes]

  std::array<std::vector<float>*, 6> tensors() {
    return {&conv1_w, &conv1_b, &conv2_w, &conv2_b, &dense_w, &dense_b};
  }
  std::array<const std::vector<float>*, 6> tensors() const {
    return {&conv1_w, &conv1_b, &conv2_w, &conv2_b, &dense_w, &dense_b};
  }
  bool operator==(const RefNetParams&) const = default;
};

// conv(k x k, same padding) -> ReLU -> 2x2 average pool, twice, then a dense
// layer to n_classes logits.
class RefNet {
 public:
  // Zero-initialized parameters.
  explicit RefNet(const RefNetConfig& config);
  // He-normal weights, zero biases.
  static RefNet Initialize(const RefNetConfig& config, uint64_t seed);

  const RefNetConfig& config() const { return config_; }
  const RefNetParams& params() const { return params_; }
  RefNetParams& mutable_params() { return params_; }

  bool operator==(const RefNet&) const = default;

 private:
  RefNetConfig config_;
  RefNetParams params_;
};

struct ForwardResult {
  std::vector<double> logits;
  ActivationTensor l1;
  ActivationTensor l2;

  const ActivationTensor& probe(Probe p) const {
    return p == Probe::kL1 ? l1 : l2;
  }
};

ForwardResult Forward(const RefNet& net, const Image& x);
uint32_t Predict(const RefNet& net, const Image& x);

// Cross-entropy of the softmax logits against `target`.
struct CrossEntropyLoss {
  uint32_t target = 0;
};

// 1 - cos(AveragePool(probe(x)), target). When the pooled vector is zero the
// loss is defined as 1 with zero gradient.
struct CosineLoss {
  Probe probe = Probe::kL2;
  std::vector<double> target;
};

using LossSpec = std::variant<CrossEntropyLoss, CosineLoss>;

double EvaluateLoss(const RefNet& net, const Image& x, const LossSpec& loss);

// d loss / d x, same shape as x. Writes the loss value to *loss if given.
Image InputGradient(const RefNet& net, const Image& x, const LossSpec& loss,
                    double* loss_value = nullptr);

// Gradient of the cross-entropy loss with respect to all parameters,
// accumulated (added) into *grads, which must match the net's shapes.
// Returns the loss.
double AccumulateParamGradient(const RefNet& net, const Image& x,
                               uint32_t label, RefNetParams* grads);

// Sign pattern of every ReLU pre-activation (true where > 0), conv1 units
// first. Finite-difference checks use it to detect kink crossings.
std::vector<bool> ReluMask(const RefNet& net, const Image& x);

struct ShapeDatasetConfig {
  int n_classes = 8;
  int size = 16;
  int per_class = 300;
  double noise = 0.1;
  uint64_t seed = 0;
};

// Procedural labelled images: bars, diagonals, crosses, blobs, checkers and
// rings with random placement, intensity and additive Gaussian noise.
struct ShapeDataset {
  int n_classes = 0;
  std::vector<Image> images;
  std::vector<uint32_t> labels;
};

ShapeDataset GenerateShapes(const ShapeDatasetConfig& config);

struct RefNetTrainOptions {
  int steps = 600;
  int batch = 32;
  double lr = 0.05;
  double momentum = 0.9;
  uint64_t seed = 0;
};

struct RefNetTrainReport {
  double initial_accuracy = 0.0;
  double final_accuracy = 0.0;
  double final_loss = 0.0;
};

// Minibatch SGD with momentum on the mean cross-entropy.
RefNetTrainReport TrainRefNet(RefNet& net, const ShapeDataset& data,
                              const RefNetTrainOptions& options);

double Accuracy(const RefNet& net, const ShapeDataset& data);

// Runs every image through the net and pools/normalizes the chosen probe.
HlrDataset ExtractHlr(const RefNet& net, const ShapeDataset& data, Probe probe);

inline constexpr uint32_t kRefNetVersion = 1;

// "RNET" | u32 version | u32 height | u32 width | u32 kernel | u32 conv1 |
// u32 conv2 | u32 n_classes | f32 parameters in RefNetParams order.
std::string EncodeRefNet(const RefNet& net);
RefNet DecodeRefNet(std::string_view bytes);
void SaveRefNet(const RefNet& net, const std::string& path);
RefNet LoadRefNet(const std::string& path);

}  // namespace fncode

#endif  // FNCODE_REFNET_H_
