#include "fncode/hlr.h"

#include <cmath>
#include <cstdint>
#include <limits>

#include "fncode/binary_io.h"
#include "fncode/error.h"

namespace fncode {

std::vector<double> AveragePool(const ActivationTensor& t) {
  if (t.channels <= 0 || t.height <= 0 || t.width <= 0) {
    throw InvalidArgument("AveragePool: empty activation tensor");
  }
  const size_t plane = static_cast<size_t>(t.height) * t.width;
  if (t.values.size() != plane * t.channels) {
    throw InvalidArgument("AveragePool: value count " +
                          std::to_string(t.values.size()) +
                          " does not match channels*height*width");
  }
  std::vector<double> pooled(t.channels);
  for (int c = 0; c < t.channels; ++c) {
    const double* p = t.values.data() + c * plane;
    double sum = 0.0;
    for (size_t i = 0; i < plane; ++i) sum += p[i];
    pooled[c] = sum / static_cast<double>(plane);
  }
  return pooled;
}

std::vector<double> Normalize(std::span<const double> v, bool* was_zero) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  std::vector<double> out(v.begin(), v.end());
  if (sq == 0.0) {
    Warn("Normalize: zero vector kept as zero");
    if (was_zero) *was_zero = true;
    return out;
  }
  if (was_zero) *was_zero = false;
  const double norm = std::sqrt(sq);
  for (double& x : out) x /= norm;
  return out;
}

HlrDataset BuildHlrDataset(std::span<const ActivationTensor> tensors,
                           const std::string& layer_tag) {
  HlrDataset ds;
  ds.layer_tag = layer_tag;
  ds.n_samples = static_cast<uint32_t>(tensors.size());
  if (tensors.empty()) return ds;
  ds.dim = static_cast<uint32_t>(tensors.front().channels);
  ds.vectors.reserve(static_cast<size_t>(ds.n_samples) * ds.dim);
  bool all_labeled = true;
  for (const ActivationTensor& t : tensors) {
    if (t.channels != static_cast<int>(ds.dim)) {
      throw InvalidArgument("BuildHlrDataset: inconsistent channel counts");
    }
    bool was_zero = false;
    const std::vector<double> hlr = Normalize(AveragePool(t), &was_zero);
    if (was_zero) ++ds.zero_vectors;
    for (double x : hlr) ds.vectors.push_back(static_cast<float>(x));
    all_labeled = all_labeled && t.label.has_value();
  }
  if (all_labeled) {
    std::vector<uint32_t> labels;
    labels.reserve(tensors.size());
    for (const ActivationTensor& t : tensors) labels.push_back(*t.label);
    ds.labels = std::move(labels);
  }
  return ds;
}

std::string EncodeHlr(const HlrDataset& dataset) {
  if (dataset.layer_tag.size() > 255) {
    throw InvalidArgument("EncodeHlr: layer_tag longer than 255 bytes");
  }
  if (dataset.vectors.size() !=
      static_cast<size_t>(dataset.n_samples) * dataset.dim) {
    throw InvalidArgument("EncodeHlr: vector buffer does not match n*dim");
  }
  if (dataset.labels && dataset.labels->size() != dataset.n_samples) {
    throw InvalidArgument("EncodeHlr: label count does not match n_samples");
  }
  ByteWriter w;
  w.Bytes("HLR1");
  w.U32(kHlrVersion);
  w.U32(dataset.n_samples);
  w.U32(dataset.dim);
  w.U8(dataset.labels ? 1 : 0);
  w.U8(static_cast<uint8_t>(dataset.layer_tag.size()));
  w.Bytes(dataset.layer_tag);
  w.F32Array(dataset.vectors);
  if (dataset.labels) {
    for (uint32_t label : *dataset.labels) w.U32(label);
  }
  return w.buffer();
}

HlrDataset DecodeHlr(std::string_view bytes) {
  ByteReader r(bytes);
  if (r.Bytes(4, "magic") != "HLR1") {
    throw FormatError(FormatErrorKind::kBadMagic, "magic",
                      "expected 'HLR1'");
  }
  const uint32_t version = r.U32("version");
  if (version != kHlrVersion) {
    throw FormatError(FormatErrorKind::kBadVersion, "version",
                      "unsupported version " + std::to_string(version));
  }
  HlrDataset ds;
  ds.n_samples = r.U32("n_samples");
  ds.dim = r.U32("dim");
  const uint8_t has_labels = r.U8("has_labels");
  if (has_labels > 1) {
    throw FormatError(FormatErrorKind::kBadValue, "has_labels",
                      "expected 0 or 1, got " + std::to_string(has_labels));
  }
  const uint8_t tag_len = r.U8("tag_len");
  ds.layer_tag = r.Bytes(tag_len, "layer_tag");
  const uint64_t count = static_cast<uint64_t>(ds.n_samples) * ds.dim;
  if (count > std::numeric_limits<size_t>::max() / sizeof(float)) {
    throw FormatError(FormatErrorKind::kOverflow, "vectors",
                      "n_samples*dim overflows the addressable size");
  }
  ds.vectors = r.F32Array(static_cast<size_t>(count), "vectors");
  if (has_labels) {
    if (ds.n_samples > r.remaining() / 4) {
      throw FormatError(FormatErrorKind::kTruncated, "labels",
                        "declared " + std::to_string(ds.n_samples) +
                            " labels, only " + std::to_string(r.remaining()) +
                            " bytes remain");
    }
    std::vector<uint32_t> labels(ds.n_samples);
    for (uint32_t& label : labels) label = r.U32("labels");
    ds.labels = std::move(labels);
  }
  r.ExpectEnd("end");
  return ds;
}

void WriteHlr(const HlrDataset& dataset, const std::string& path) {
  WriteFileBytes(path, EncodeHlr(dataset));
}

HlrDataset ReadHlr(const std::string& path) {
  return DecodeHlr(ReadFileBytes(path));
}

}  // namespace fncode
