#ifndef FNCODE_TESTS_TRAINED_NET_H_
#define FNCODE_TESTS_TRAINED_NET_H_

#include "fncode/refnet.h"

namespace fncode::testing {

// Default RefNet trained once per process on the default shape dataset.
inline const RefNet& TrainedNet() {
  static const RefNet net = [] {
    RefNet n = RefNet::Initialize(RefNetConfig{}, 3);
    ShapeDatasetConfig dc;
    dc.seed = 1;
    RefNetTrainOptions opt;
    opt.seed = 2;
    TrainRefNet(n, GenerateShapes(dc), opt);
    return n;
  }();
  return net;
}

// Held-out images drawn with a seed distinct from the training set.
inline ShapeDataset ProbeShapes(int per_class, uint64_t seed = 1001) {
  ShapeDatasetConfig dc;
  dc.per_class = per_class;
  dc.seed = seed;
  return GenerateShapes(dc);
}

}  // namespace fncode::testing

#endif  // FNCODE_TESTS_TRAINED_NET_H_
