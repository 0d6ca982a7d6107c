#ifndef FNCODE_HLR_H_
#define FNCODE_HLR_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fncode {

// Output of one convolutional probe for one input: `channels` feature maps of
// height x width, stored channel-major.
struct ActivationTensor {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> values;
  std::optional<uint32_t> label;

  double at(int c, int y, int x) const {
    return values[(static_cast<size_t>(c) * height + y) * width + x];
  }
};

// Hidden-layer representations: n_samples pooled, unit-norm vectors of length
// dim, row-major, with optional class labels.
struct HlrDataset {
  uint32_t n_samples = 0;
  uint32_t dim = 0;
  std::vector<float> vectors;
  std::optional<std::vector<uint32_t>> labels;
  std::string layer_tag;
  // Number of all-zero inputs kept as zero vectors by Normalize. Not part of
  // the exchange format.
  uint32_t zero_vectors = 0;

  std::span<const float> row(size_t i) const {
    return {vectors.data() + i * dim, dim};
  }

  bool operator==(const HlrDataset& other) const {
    return n_samples == other.n_samples && dim == other.dim &&
           vectors == other.vectors && labels == other.labels &&
           layer_tag == other.layer_tag;
  }
};

// Replaces each feature map by its mean activation; output length = channels.
std::vector<double> AveragePool(const ActivationTensor& t);

// Euclidean normalization. The zero vector maps to itself; in that case a
// warning is emitted and *was_zero (if given) is set.
std::vector<double> Normalize(std::span<const double> v,
                              bool* was_zero = nullptr);

// Pools and normalizes a batch of probe tensors into a dataset. Labels are
// taken from the tensors when every tensor carries one.
HlrDataset BuildHlrDataset(std::span<const ActivationTensor> tensors,
                           const std::string& layer_tag);

inline constexpr uint32_t kHlrVersion = 1;

// HLR1 exchange format (little-endian):
//   "HLR1" | u32 version | u32 n_samples | u32 dim | u8 has_labels |
//   u8 tag_len | tag bytes | f32 vectors[n*dim] | u32 labels[n] (optional)
std::string EncodeHlr(const HlrDataset& dataset);
HlrDataset DecodeHlr(std::string_view bytes);
void WriteHlr(const HlrDataset& dataset, const std::string& path);
HlrDataset ReadHlr(const std::string& path);

}  // namespace fncode

#endif  // FNCODE_HLR_H_
