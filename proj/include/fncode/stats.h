#ifndef FNCODE_STATS_H_
#define FNCODE_STATS_H_

#include <span>

namespace fncode {

// Regularized incomplete beta I_x(a, b) via Lentz's continued fraction.
double RegularizedIncompleteBeta(double a, double b, double x);

// Student-t cumulative distribution with df degrees of freedom (df > 0).
double StudentTCdf(double t, double df);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  double df = 0.0;
};

// Two-sided Welch (unequal variance) t-test with Welch-Satterthwaite degrees
// of freedom. t > 0 when mean(a) > mean(b). Throws NumericError when both
// samples have zero variance.
TTestResult WelchTTest(std::span<const double> a, std::span<const double> b);

}  // namespace fncode

#endif  // FNCODE_STATS_H_
