#include "fncode/stats.h"

#include <cmath>
#include <limits>

#include "fncode/error.h"

namespace fncode {

namespace {

// Continued fraction for I_x(a, b), valid for x < (a + 1) / (a + b + 2).
double BetaContinuedFraction(double a, double b, double x) {
  constexpr int kMaxIter = 1000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw NumericError("incomplete beta continued fraction did not converge");
}

double SampleMean(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double SampleVariance(std::span<const double> xs, double mean) {
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(xs.size() - 1);
}

}  // namespace

double RegularizedIncompleteBeta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) {
    throw InvalidArgument("RegularizedIncompleteBeta: a and b must be > 0");
  }
  if (!(x >= 0.0 && x <= 1.0)) {
    throw InvalidArgument("RegularizedIncompleteBeta: x must be in [0, 1]");
  }
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * BetaContinuedFraction(a, b, x) / a;
  }
  return 1.0 - front * BetaContinuedFraction(b, a, 1.0 - x) / b;
}

double StudentTCdf(double t, double df) {
  if (!(df > 0.0)) throw InvalidArgument("StudentTCdf: df must be > 0");
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double x = df / (df + t * t);
  const double tail = 0.5 * RegularizedIncompleteBeta(0.5 * df, 0.5, x);
  return t > 0.0 ? 1.0 - tail : tail;
}

TTestResult WelchTTest(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) {
    throw InvalidArgument("WelchTTest: each sample needs at least 2 values");
  }
  const double ma = SampleMean(a), mb = SampleMean(b);
  const double se_a = SampleVariance(a, ma) / static_cast<double>(a.size());
  const double se_b = SampleVariance(b, mb) / static_cast<double>(b.size());
  const double se2 = se_a + se_b;
  if (se2 == 0.0) {
    throw NumericError(
        "WelchTTest: both samples have zero variance; compare them for exact "
        "equality instead");
  }
  TTestResult r;
  r.t = (ma - mb) / std::sqrt(se2);
  r.df = se2 * se2 / (se_a * se_a / static_cast<double>(a.size() - 1) +
                      se_b * se_b / static_cast<double>(b.size() - 1));
  r.p = RegularizedIncompleteBeta(0.5 * r.df, 0.5, r.df / (r.df + r.t * r.t));
  return r;
}

}  // namespace fncode
