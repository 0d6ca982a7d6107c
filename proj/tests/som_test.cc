#include "fncode/som.h"

#include <gtest/gtest.h>

#include <cmath>

#include "fncode/error.h"
#include "test_util.h"

namespace fncode {
namespace {

using testing::MakeDataset;

double Norm(std::span<const float> w) {
  double s = 0.0;
  for (float v : w) s += static_cast<double>(v) * v;
  return std::sqrt(s);
}

TEST(SomGridTest, RandomGridHasUnitNormWeights) {
  const SomGrid one = SomGrid::Random(1, 1, 3, 5);
  ASSERT_EQ(one.num_units(), 1);
  EXPECT_EQ(one.weights(0).size(), 3u);
  EXPECT_NEAR(Norm(one.weights(0)), 1.0, 1e-6);

  const SomGrid grid = SomGrid::Random(10, 10, 64, 11);
  ASSERT_EQ(grid.num_units(), 100);
  for (int u = 0; u < grid.num_units(); ++u) {
    EXPECT_EQ(grid.weights(u).size(), 64u);
    EXPECT_NEAR(Norm(grid.weights(u)), 1.0, 1e-6);
    for (float v : grid.weights(u)) EXPECT_GE(v, 0.0f);
  }
}

TEST(SomGridTest, SameSeedGivesIdenticalGrid) {
  EXPECT_EQ(SomGrid::Random(6, 7, 9, 42), SomGrid::Random(6, 7, 9, 42));
  EXPECT_NE(SomGrid::Random(6, 7, 9, 42).data(), SomGrid::Random(6, 7, 9, 43).data());
}

TEST(SomGridTest, ZeroExtentsRejected) {
  EXPECT_THROW(SomGrid(0, 3, 2, Topology::kToroidal), InvalidArgument);
  EXPECT_THROW(SomGrid(3, 0, 2, Topology::kToroidal), InvalidArgument);
  EXPECT_THROW(SomGrid::Random(3, 3, 0, 1), InvalidArgument);
}

TEST(GridDistanceTest, ToroidalWrapAround) {
  const SomGrid g(10, 10, 1, Topology::kToroidal);
  EXPECT_DOUBLE_EQ(g.GridDistance({0, 0}, {9, 9}), std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(g.GridDistance({0, 0}, {5, 0}), 5.0);
  EXPECT_DOUBLE_EQ(g.GridDistance({3, 4}, {3, 4}), 0.0);
  EXPECT_DOUBLE_EQ(g.GridDistance({0, 0}, {6, 0}), 4.0);
}

TEST(GridDistanceTest, PlanarIsEuclidean) {
  const SomGrid g(10, 10, 1, Topology::kPlanar);
  EXPECT_DOUBLE_EQ(g.GridDistance({0, 0}, {9, 9}), std::sqrt(162.0));
  EXPECT_DOUBLE_EQ(g.GridDistance({1, 2}, {4, 6}), 5.0);
}

TEST(GridDistanceTest, OutOfRangeCoordinateRejected) {
  const SomGrid g(4, 4, 1, Topology::kToroidal);
  EXPECT_THROW(g.GridDistance({0, 0}, {4, 0}), InvalidArgument);
  EXPECT_THROW(g.GridDistance({-1, 0}, {0, 0}), InvalidArgument);
}

TEST(GridDistanceTest, MaxDistanceMatchesExhaustiveSearch) {
  for (Topology t : {Topology::kToroidal, Topology::kPlanar}) {
    const SomGrid g(5, 7, 1, t);
    double best = 0.0;
    for (int a = 0; a < g.num_units(); ++a) {
      for (int b = 0; b < g.num_units(); ++b) {
        best = std::max(best, g.GridDistance(g.CoordOf(a), g.CoordOf(b)));
      }
    }
    EXPECT_DOUBLE_EQ(g.MaxGridDistance(), best);
  }
}

TEST(FindBmuTest, ExactMatchHasZeroError) {
  SomGrid g = SomGrid::Random(3, 3, 4, 1);
  const std::vector<float> x(g.weights(5).begin(), g.weights(5).end());
  const BmuAssignment b = FindBmu(g, x);
  EXPECT_EQ(g.UnitIndex(b.coord()), 5);
  EXPECT_EQ(b.quantization_error, 0.0);
}

TEST(FindBmuTest, StandardBasisPicksThirdUnit) {
  SomGrid g(2, 2, 4, Topology::kToroidal);
  for (int u = 0; u < 4; ++u) g.mutable_weights(u)[u] = 1.0f;
  const std::vector<float> e3 = {0, 0, 1, 0};
  // Distances: sqrt(2) to every unit but unit 2, which is at distance 0.
  const BmuAssignment b = FindBmu(g, e3);
  EXPECT_EQ(g.UnitIndex(b.coord()), 2);
  EXPECT_EQ(b.row, 1);
  EXPECT_EQ(b.col, 0);
}

TEST(FindBmuTest, TiesGoToSmallestIndex) {
  SomGrid g(2, 2, 2, Topology::kToroidal);
  g.mutable_weights(1)[0] = 1.0f;
  g.mutable_weights(3)[0] = 1.0f;
  g.mutable_weights(0)[1] = 5.0f;
  g.mutable_weights(2)[1] = 5.0f;
  const std::vector<float> x = {1, 0};
  EXPECT_EQ(g.UnitIndex(FindBmu(g, x).coord()), 1);
}

TEST(FindBmuTest, DimensionMismatchRejected) {
  const SomGrid g = SomGrid::Random(2, 2, 3, 1);
  const std::vector<float> x = {1, 0};
  EXPECT_THROW(FindBmu(g, x), InvalidArgument);
}

TEST(UpdateStepTest, BmuMovesByLearningRate) {
  SomGrid g(1, 1, 2, Topology::kToroidal);
  TrainConfig cfg;
  cfg.alpha0 = 0.5;
  cfg.sigma0 = 1.0;
  const std::vector<float> x = {1, 0};
  UpdateStep(g, x, 0, 100.0, cfg);
  EXPECT_FLOAT_EQ(g.weights(0)[0], 0.5f);
  EXPECT_FLOAT_EQ(g.weights(0)[1], 0.0f);
}

TEST(UpdateStepTest, NeighborAtDistanceOneOnTwoByTwoTorus) {
  SomGrid g(2, 2, 2, Topology::kToroidal);
  TrainConfig cfg;
  cfg.alpha0 = 0.5;
  cfg.sigma0 = 1.0;
  cfg.epsilon_stab = 1e-8;
  const std::vector<float> x = {1, 0};
  const BmuAssignment bmu = UpdateStep(g, x, 0, 1000.0, cfg);
  EXPECT_EQ(g.UnitIndex(bmu.coord()), 0);
  const double expected = 0.5 * std::exp(-1.0 / (2.0 + 1e-8));
  EXPECT_NEAR(g.weights(GridCoord{0, 1})[0], expected, 1e-6);
  EXPECT_NEAR(g.weights(GridCoord{0, 1})[0], 0.30327, 1e-5);
  EXPECT_NEAR(g.weights(GridCoord{1, 0})[0], expected, 1e-6);
  EXPECT_NEAR(g.weights(GridCoord{1, 1})[0], 0.5 * std::exp(-2.0 / (2.0 + 1e-8)), 1e-6);
  EXPECT_EQ(g.weights(GridCoord{0, 1})[1], 0.0f);
}

TEST(UpdateStepTest, NeighborhoodIsOneAtZeroDistance) {
  EXPECT_EQ(Neighborhood(0.0, 1.0, 1e-8), 1.0);
  EXPECT_EQ(Neighborhood(0.0, 1e-6, 1e-8), 1.0);
}

TEST(UpdateStepTest, InputEqualToEveryWeightLeavesGridUnchanged) {
  SomGrid g(3, 3, 2, Topology::kToroidal);
  for (int u = 0; u < 9; ++u) {
    g.mutable_weights(u)[0] = 0.6f;
    g.mutable_weights(u)[1] = 0.8f;
  }
  const SomGrid before = g;
  const std::vector<float> x = {0.6f, 0.8f};
  UpdateStep(g, x, 3, 10.0, TrainConfig{});
  EXPECT_EQ(g, before);
}

TEST(UpdateStepTest, SchedulesDecayExponentially) {
  TrainConfig cfg;
  cfg.alpha0 = 0.2;
  cfg.sigma0 = 4.0;
  EXPECT_DOUBLE_EQ(LearningRate(0, 50.0, cfg), 0.2);
  EXPECT_NEAR(LearningRate(50, 50.0, cfg), 0.2 * std::exp(-1.0), 1e-15);
  EXPECT_NEAR(NeighborhoodRadius(100, 50.0, cfg), 4.0 * std::exp(-2.0), 1e-15);
}

TEST(UpdateStepTest, SigmaTimeConstantIsSeparatelyScalable) {
  TrainConfig cfg;
  cfg.sigma0 = 4.0;
  cfg.sigma_tau_scale = 2.0;
  EXPECT_NEAR(NeighborhoodRadius(100, 50.0, cfg), 4.0 * std::exp(-1.0), 1e-15);
  EXPECT_NEAR(LearningRate(100, 50.0, cfg), 0.01 * std::exp(-2.0), 1e-15);
  cfg.sigma_tau_scale = 0.0;
  EXPECT_THROW(cfg.Validate(), InvalidArgument);
}

TEST(TrainTest, SingleSampleOneEpochRecordsOneError) {
  SomGrid g = SomGrid::Random(3, 3, 2, 1);
  TrainConfig cfg;
  cfg.epochs = 1;
  const LossTrace trace = Train(g, MakeDataset({{0.6f, 0.8f}}), cfg);
  EXPECT_EQ(trace.errors.size(), 1u);
}

TEST(TrainTest, RepeatedSampleAttractsBmu) {
  SomGrid g = SomGrid::Random(4, 4, 3, 2);
  const std::vector<float> x = {0.0f, 0.6f, 0.8f};
  const double initial = FindBmu(g, x).quantization_error;
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.alpha0 = 0.1;
  Train(g, MakeDataset({x}), cfg);
  EXPECT_LT(FindBmu(g, x).quantization_error, initial);
  EXPECT_LT(FindBmu(g, x).quantization_error, 0.05);
}

TEST(TrainTest, OrthogonalClustersGetDistinctBmus) {
  Rng rng(3);
  std::vector<std::vector<float>> rows;
  for (int i = 0; i < 200; ++i) {
    const float a = 1.0f, b = static_cast<float>(0.05 * rng.Normal());
    const float n = std::sqrt(a * a + b * b);
    if (i % 2 == 0) {
      rows.push_back({a / n, b / n, 0, 0});
    } else {
      rows.push_back({0, 0, a / n, b / n});
    }
  }
  SomGrid g = SomGrid::Random(6, 6, 4, 4);
  TrainConfig cfg;
  cfg.sigma0 = 2.0;
  cfg.alpha0 = 0.1;
  cfg.epochs = 10;
  Train(g, MakeDataset(rows), cfg);
  const std::vector<float> c1 = {1, 0, 0, 0}, c2 = {0, 0, 1, 0};
  EXPECT_NE(g.UnitIndex(FindBmu(g, c1).coord()), g.UnitIndex(FindBmu(g, c2).coord()));
}

TEST(TrainTest, DeterministicForFixedSeed) {
  std::vector<std::vector<float>> rows;
  Rng rng(9);
  for (int i = 0; i < 50; ++i) {
    rows.push_back({static_cast<float>(rng.Uniform()), static_cast<float>(rng.Uniform())});
  }
  TrainConfig cfg;
  cfg.seed = 17;
  SomGrid a = SomGrid::Random(5, 5, 2, 1), b = SomGrid::Random(5, 5, 2, 1);
  const LossTrace ta = Train(a, MakeDataset(rows), cfg);
  const LossTrace tb = Train(b, MakeDataset(rows), cfg);
  EXPECT_EQ(a, b);
  EXPECT_EQ(ta.errors, tb.errors);
}

TEST(TrainTest, MaxUpdatesCapsTrace) {
  SomGrid g = SomGrid::Random(3, 3, 2, 1);
  TrainConfig cfg;
  cfg.epochs = 10;
  cfg.max_updates = 7;
  const LossTrace t = Train(g, MakeDataset({{1, 0}, {0, 1}}), cfg);
  EXPECT_EQ(t.errors.size(), 7u);
}

TEST(TrainTest, EmptyDatasetAndBadConfigRejected) {
  SomGrid g = SomGrid::Random(3, 3, 2, 1);
  HlrDataset empty;
  empty.dim = 2;
  EXPECT_THROW(Train(g, empty, TrainConfig{}), InvalidArgument);
  TrainConfig bad;
  bad.sigma0 = 0.0;
  EXPECT_THROW(Train(g, MakeDataset({{1, 0}}), bad), InvalidArgument);
  EXPECT_THROW(Train(g, MakeDataset({{1, 0, 0}}), TrainConfig{}), InvalidArgument);
}

TEST(MovingAverageTest, Examples) {
  EXPECT_EQ(MovingAverage(std::vector<double>{2, 2, 2, 2}, 2),
            (std::vector<double>{1, 1, 1}));
  EXPECT_EQ(MovingAverage(std::vector<double>{4, 2}, 1),
            (std::vector<double>{1, 0.5}));
  const std::vector<double> r = MovingAverage(std::vector<double>{1, 2, 3, 4}, 2);
  ASSERT_EQ(r.size(), 3u);
  EXPECT_NEAR(r[0], 1.0, 1e-15);
  EXPECT_NEAR(r[1], 2.5 / 1.5, 1e-15);
  EXPECT_NEAR(r[2], 3.5 / 1.5, 1e-15);
  EXPECT_TRUE(MovingAverage(std::vector<double>{1, 2}, 3).empty());
}

TEST(SomFormatTest, RoundTripIsBitwise) {
  for (Topology t : {Topology::kToroidal, Topology::kPlanar}) {
    const SomGrid g = SomGrid::Random(4, 5, 7, 8, t);
    const std::string bytes = EncodeSom(g);
    EXPECT_EQ(DecodeSom(bytes), g);
    EXPECT_EQ(EncodeSom(DecodeSom(bytes)), bytes);
  }
}

TEST(SomFormatTest, FileRoundTrip) {
  testing::TempDir dir("som_file");
  const SomGrid g = SomGrid::Random(3, 3, 2, 8);
  SaveSom(g, dir.file("g.som"));
  EXPECT_EQ(LoadSom(dir.file("g.som")), g);
  EXPECT_THROW(LoadSom(dir.file("missing.som")), IoError);
}

TEST(SomFormatTest, CorruptInputsGiveFormatErrors) {
  const std::string bytes = EncodeSom(SomGrid::Random(3, 3, 2, 8));
  try {
    DecodeSom(bytes.substr(0, bytes.size() - 3));
    FAIL() << "truncated grid decoded";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.kind(), FormatErrorKind::kTruncated);
  }
  std::string bad = bytes;
  bad[0] = 'X';
  try {
    DecodeSom(bad);
    FAIL() << "bad magic decoded";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.kind(), FormatErrorKind::kBadMagic);
    EXPECT_EQ(e.field(), "magic");
  }
  try {
    DecodeSom(bytes + "x");
    FAIL() << "trailing bytes accepted";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.kind(), FormatErrorKind::kTrailingBytes);
  }
  std::string bad_topo = bytes;
  bad_topo[20] = 7;
  EXPECT_THROW(DecodeSom(bad_topo), FormatError);
}

}  // namespace
}  // namespace fncode
