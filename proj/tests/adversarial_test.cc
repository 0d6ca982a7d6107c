#include "fncode/adversarial.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "fncode/error.h"
#include "fncode/random.h"
#include "trained_net.h"

namespace fncode {
namespace {

using testing::ProbeShapes;
using testing::TrainedNet;

double LinfDistance(const Image& a, const Image& b) {
  double m = 0;
  for (size_t i = 0; i < a.pixels.size(); ++i) m = std::max(m, std::abs(a.pixels[i] - b.pixels[i]));
  return m;
}

SomGrid TrainedSom(Probe probe) {
  const HlrDataset hlr = ExtractHlr(TrainedNet(), ProbeShapes(100, 77), probe);
  SomGrid grid = SomGrid::Random(20, 20, static_cast<int>(hlr.dim), 5);
  TrainConfig cfg;
  cfg.seed = 6;
  Train(grid, hlr, cfg);
  return grid;
}

TEST(PgdAttackTest, ZeroBudgetIsIdentity) {
  const ShapeDataset d = ProbeShapes(1);
  for (bool rand_init : {false, true}) {
    PgdConfig cfg;
    cfg.eps = 0.0;
    cfg.rand_init = rand_init;
    for (size_t i = 0; i < d.images.size(); ++i) {
      EXPECT_EQ(PgdAttack(TrainedNet(), d.images[i], d.labels[i], cfg), d.images[i]);
    }
  }
}

TEST(PgdAttackTest, StaysInBallAndBounds) {
  RefNetConfig small;
  small.height = small.width = 8;
  small.conv1 = 3;
  small.conv2 = 4;
  small.n_classes = 4;
  const RefNet net = RefNet::Initialize(small, 8);
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    Image x{8, 8, std::vector<double>(64)};
    for (double& p : x.pixels) p = rng.UniformIndex(3) == 0 ? std::round(rng.Uniform()) : rng.Uniform();
    PgdConfig cfg;
    cfg.eps = rng.Uniform(0.0, 0.2);
    cfg.step = rng.Uniform(0.001, 0.05);
    cfg.n_iter = static_cast<int>(rng.UniformIndex(15));
    cfg.rand_init = rng.UniformIndex(2) == 0;
    cfg.targeted = rng.UniformIndex(2) == 0;
    cfg.seed = trial;
    const Image adv = PgdAttack(net, x, static_cast<uint32_t>(rng.UniformIndex(4)), cfg);
    EXPECT_LE(LinfDistance(adv, x), cfg.eps + 1e-7);
    for (double p : adv.pixels) {
      EXPECT_GE(p, cfg.clip_min);
      EXPECT_LE(p, cfg.clip_max);
    }
  }
}

TEST(PgdAttackTest, LargerBudgetFoolsMoreOften) {
  const ShapeDataset d = ProbeShapes(13);
  auto fooled = [&](double eps) {
    PgdConfig cfg;
    cfg.eps = eps;
    cfg.targeted = false;
    cfg.seed = 5;
    int wrong = 0;
    for (int i = 0; i < 100; ++i) {
      const Image adv = PgdAttack(TrainedNet(), d.images[i], d.labels[i], cfg);
      wrong += Predict(TrainedNet(), adv) != d.labels[i];
    }
    return wrong / 100.0;
  };
  EXPECT_GT(fooled(0.08), fooled(0.01));
}

TEST(PgdAttackTest, TargetedAttackMovesTowardTarget) {
  const ShapeDataset d = ProbeShapes(2);
  PgdConfig cfg;
  cfg.eps = 0.08;
  cfg.target_class = 3;
  double before = 0, after = 0;
  for (size_t i = 0; i < d.images.size(); ++i) {
    if (d.labels[i] == 3) continue;
    const Image adv = PgdAttack(TrainedNet(), d.images[i], d.labels[i], cfg);
    before += EvaluateLoss(TrainedNet(), d.images[i], CrossEntropyLoss{3});
    after += EvaluateLoss(TrainedNet(), adv, CrossEntropyLoss{3});
  }
  EXPECT_LT(after, before);
}

TEST(PgdAttackTest, Deterministic) {
  const ShapeDataset d = ProbeShapes(1);
  PgdConfig cfg;
  cfg.seed = 44;
  EXPECT_EQ(PgdAttack(TrainedNet(), d.images[0], d.labels[0], cfg),
            PgdAttack(TrainedNet(), d.images[0], d.labels[0], cfg));
}

TEST(PgdAttackTest, InvalidInputs) {
  const ShapeDataset d = ProbeShapes(1);
  PgdConfig cfg;
  EXPECT_THROW(PgdAttack(TrainedNet(), d.images[0], 8, cfg), InvalidArgument);
  Image bright = d.images[0];
  bright.pixels[0] = 1.5;
  EXPECT_THROW(PgdAttack(TrainedNet(), bright, 0, cfg), InvalidArgument);
  PgdConfig bad = cfg;
  bad.eps = -0.1;
  EXPECT_THROW(PgdAttack(TrainedNet(), d.images[0], 0, bad), InvalidArgument);
  bad = cfg;
  bad.step = 0;
  EXPECT_THROW(PgdAttack(TrainedNet(), d.images[0], 0, bad), InvalidArgument);
  bad = cfg;
  bad.clip_min = 1.0;
  EXPECT_THROW(PgdAttack(TrainedNet(), d.images[0], 0, bad), InvalidArgument);
}

TEST(DisplacementTest, ZeroBudgetGivesZeroDistances) {
  const SomGrid som = TrainedSom(Probe::kL1);
  const ShapeDataset d = ProbeShapes(2);
  const std::vector<SomProbe> probes = {{Probe::kL1, &som}};
  const std::vector<double> eps = {0.0};
  const auto curves = DisplacementExperiment(TrainedNet(), probes, d.images, d.labels, eps, PgdConfig{});
  ASSERT_EQ(curves.size(), 1u);
  EXPECT_EQ(curves[0].layer_tag, "L1");
  for (double v : curves[0].distances[0]) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(curves[0].mean[0], 0.0);
}

TEST(DisplacementTest, DistanceGrowsWithBudget) {
  const SomGrid som = TrainedSom(Probe::kL1);
  const ShapeDataset d = ProbeShapes(13, 555);
  const std::vector<Image> images(d.images.begin(), d.images.begin() + 100);
  const std::vector<uint32_t> labels(d.labels.begin(), d.labels.begin() + 100);
  const std::vector<SomProbe> probes = {{Probe::kL1, &som}};
  const std::vector<double> eps = {0.01, 0.08};
  PgdConfig cfg;
  cfg.seed = 12;
  const auto curves = DisplacementExperiment(TrainedNet(), probes, images, labels, eps, cfg);
  ASSERT_EQ(curves[0].distances[0].size(), 100u);
  EXPECT_GE(curves[0].mean[1], curves[0].mean[0]);
  for (const auto& row : curves[0].distances) {
    for (double v : row) EXPECT_LE(v, som.MaxGridDistance());
  }
}

TEST(DisplacementTest, PlanarOverrideNeverShortensDistances) {
  const SomGrid som = TrainedSom(Probe::kL1);
  const ShapeDataset d = ProbeShapes(3);
  const std::vector<SomProbe> probes = {{Probe::kL1, &som}};
  const std::vector<double> eps = {0.08};
  const auto torus = DisplacementExperiment(TrainedNet(), probes, d.images, d.labels, eps, PgdConfig{});
  const auto flat = DisplacementExperiment(TrainedNet(), probes, d.images, d.labels, eps, PgdConfig{}, true);
  for (size_t i = 0; i < d.images.size(); ++i) {
    EXPECT_GE(flat[0].distances[0][i], torus[0].distances[0][i]);
  }
}

TEST(DisplacementTest, SomDimMismatchRejected) {
  const SomGrid wrong = SomGrid::Random(5, 5, 16, 1);
  const ShapeDataset d = ProbeShapes(1);
  const std::vector<SomProbe> probes = {{Probe::kL1, &wrong}};
  const std::vector<double> eps = {0.01};
  EXPECT_THROW(DisplacementExperiment(TrainedNet(), probes, d.images, d.labels, eps, PgdConfig{}),
               InvalidArgument);
}

DisplacementCurve Curve(std::vector<double> a, std::vector<double> b) {
  DisplacementCurve c;
  c.layer_tag = "L1";
  c.eps = {0.01, 0.04};
  c.distances = {std::move(a), std::move(b)};
  c.mean = {0, 0};
  c.stderr_ = {0, 0};
  return c;
}

TEST(CompareEpsTest, WelchAndConstantSamples) {
  const std::vector<DisplacementCurve> curves = {
      Curve({0, 0, 0, 0, 1}, {10, 10, 10, 10, 11}),
      Curve({1, 1, 1}, {1, 1, 1}),
      Curve({1, 1, 1}, {2, 2, 2}),
  };
  const std::vector<TTestRow> rows = CompareEps(curves, 0.01, 0.04);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_NEAR(rows[0].result.t, -35.35533905932737, 1e-9);
  EXPECT_EQ(rows[1].result.t, 0.0);
  EXPECT_EQ(rows[1].result.p, 1.0);
  EXPECT_EQ(rows[2].result.p, 0.0);
  EXPECT_TRUE(std::isinf(rows[2].result.t));
  EXPECT_THROW(CompareEps(curves, 0.01, 0.02), InvalidArgument);
  EXPECT_EQ(TTestCsv(rows).substr(0, 26), "layer_tag,eps_a,eps_b,t,p\n");
}

}  // namespace
}  // namespace fncode
