#include "fncode/stats.h"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "fncode/error.h"

namespace fncode {
namespace {

struct WelchCase {
  std::vector<double> a;
  std::vector<double> b;
  double t;
  double p;
};

// Frozen from scipy.stats.ttest_ind(a, b, equal_var=False).
const std::vector<WelchCase>& WelchOracle() {
  static const std::vector<WelchCase> cases = {
      {{0.0, 0.0, 0.0, 0.0, 1.0}, {10.0, 10.0, 10.0, 10.0, 11.0}, -35.35533905932737, 4.483355520161371e-10},
      {{1.0, 2.0, 3.0, 4.0, 5.0}, {2.0, 4.0, 6.0, 8.0, 10.0, 12.0}, -2.3763541031440183, 0.04928433820673049},
      {{0.5, 0.5, 1.5}, {0.25, 3.0, 2.75, 1.0}, -1.2260120676657762, 0.28336637748542054},
      {{1.037, 0.003, -1.915, -1.216, -0.116, -0.809, -1.071, -0.863, -1.315}, {-0.503, -1.352, -2.25, -3.157, -5.421, -1.272}, 2.091198185176708, 0.07687250908276289},
      {{2.19, 0.033, -0.981, -0.871, 1.924}, {-0.026, 1.036, -0.018, 1.351, -1.005, 1.584}, -0.035421848527613944, 0.9727718028592525},
      {{0.202, -1.312, -0.473, -0.284, -1.19}, {0.283, 2.173, -1.585, 2.69, 1.287, -1.638}, -1.4185634469061912, 0.2031822753834115},
      {{-1.404, 0.048, 2.056, 1.154, 0.331, 1.558}, {-1.067, -0.82, -0.922}, 3.0425552736708354, 0.027284563981037208},
      {{0.496, 0.923, 2.109}, {-0.118, 0.137, -0.099, -2.362, -1.095, -0.138, -2.706, -0.407, 0.679}, 3.006383460313411, 0.031000417727267502},
      {{-1.224, 2.009, 0.662, -0.005, -0.436, 1.064, 0.643, 0.253, -0.662}, {1.212, -2.786, 1.263}, 0.260601583582928, 0.8164301824702945},
      {{-0.68, -0.301, 0.041}, {0.971, 1.245, -0.573, 0.625, -0.034}, -1.9363745794391676, 0.10153514679079664},
  };
  return cases;
}

TEST(WelchTTestTest, MatchesOracle) {
  for (const WelchCase& c : WelchOracle()) {
    const TTestResult r = WelchTTest(c.a, c.b);
    EXPECT_NEAR(r.t, c.t, 1e-6);
    EXPECT_NEAR(r.p, c.p, 1e-6);
  }
}

TEST(WelchTTestTest, SeparatedSamplesHaveSmallP) {
  const std::vector<double> a = {0, 0, 0, 0, 1}, b = {10, 10, 10, 10, 11};
  EXPECT_LT(WelchTTest(a, b).p, 0.002);
}

TEST(WelchTTestTest, IdenticalSamples) {
  const std::vector<double> a = {1.5, 2.0, 0.25, 3.0};
  const TTestResult r = WelchTTest(a, a);
  EXPECT_EQ(r.t, 0.0);
  EXPECT_EQ(r.p, 1.0);
}

TEST(WelchTTestTest, DegenerateInputs) {
  const std::vector<double> c = {2, 2, 2}, d = {3, 3};
  try {
    WelchTTest(c, d);
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("exact"), std::string::npos);
  }
  EXPECT_THROW(WelchTTest(std::vector<double>{1}, d), InvalidArgument);
}

TEST(IncompleteBetaTest, KnownValues) {
  EXPECT_NEAR(RegularizedIncompleteBeta(1, 1, 0.3), 0.3, 1e-14);
  EXPECT_NEAR(RegularizedIncompleteBeta(2, 3, 0.4), 0.5248, 1e-12);
  EXPECT_EQ(RegularizedIncompleteBeta(2, 3, 0.0), 0.0);
  EXPECT_EQ(RegularizedIncompleteBeta(2, 3, 1.0), 1.0);
  // Student t with 1 dof is Cauchy.
  EXPECT_NEAR(StudentTCdf(1.0, 1.0), 0.75, 1e-12);
  EXPECT_NEAR(StudentTCdf(0.0, 7.0), 0.5, 1e-15);
}

}  // namespace
}  // namespace fncode
