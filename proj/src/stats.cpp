#include "sensel/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "sensel/error.hpp"

namespace sensel {

namespace {

// Tail of Stirling's series: lgamma(z) - [(z - 1/2) ln z - z + ln(2 pi)/2], for z >= 10.
double stirling_tail(double z) {
  const double z2 = z * z;
  return (1.0 / 12.0 - (1.0 / 360.0 - (1.0 / 1260.0 - (1.0 / 1680.0 - 1.0 / (1188.0 * z2)) / z2) / z2) / z2) / z;
}

// ln Gamma(a + b) - ln Gamma(a) - ln Gamma(b), i.e. -ln B(a, b), without the large
// cancellation lgamma suffers when one argument is big.
double neg_log_beta(double a, double b) {
  const double big = std::max(a, b);
  const double small = std::min(a, b);
  if (big < 10.0) return std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b);
  // ln G(big + small) - ln G(big) via Stirling, rearranged around log1p.
  const double diff = (big - 0.5) * std::log1p(small / big) + small * std::log(big + small) - small +
                      stirling_tail(big + small) - stirling_tail(big);
  return diff - std::lgamma(small);
}

// Continued fraction for I_x(a, b) (modified Lentz).
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIterations = 200000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIterations; ++m) {
    const double m2 = 2.0 * m;
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
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) { return incomplete_beta(a, b, x, 1.0 - x); }

double incomplete_beta(double a, double b, double x, double one_minus_x) {
  if (!(a > 0.0) || !(b > 0.0)) throw ValidationError("incomplete beta: a and b must be positive");
  if (!(x >= 0.0 && x <= 1.0)) throw ValidationError("incomplete beta: x must lie in [0, 1]");
  if (x == 0.0) return 0.0;
  if (one_minus_x == 0.0) return 1.0;

  const double log_front = a * std::log(x) + b * std::log(one_minus_x) + neg_log_beta(a, b);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return std::exp(log_front) * beta_continued_fraction(a, b, x) / a;
  }
  return 1.0 - std::exp(log_front) * beta_continued_fraction(b, a, one_minus_x) / b;
}

double student_t_two_sided_p(double t, double dof) {
  if (!(dof > 0.0)) throw ValidationError("t distribution: degrees of freedom must be positive");
  if (std::isinf(t)) return 0.0;
  const double t2 = t * t;
  const double denom = dof + t2;
  return incomplete_beta(dof / 2.0, 0.5, dof / denom, t2 / denom);
}

double correlation_p_value(double r, std::size_t n) {
  if (n < 3) throw ValidationError("correlation p-value needs at least 3 pairs");
  const double r2 = r * r;
  if (r2 >= 1.0) return 0.0;
  // t^2 = dof r^2 / (1 - r^2)  =>  dof / (dof + t^2) = 1 - r^2.
  const double dof = static_cast<double>(n - 2);
  return incomplete_beta(dof / 2.0, 0.5, (1.0 - r) * (1.0 + r), r2);
}

PearsonResult pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ValidationError("pearson: inputs differ in length");
  if (x.size() < 3) throw ValidationError("pearson: at least 3 pairs required");
  const auto constant = [](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [&](double e) { return e == v.front(); });
  };
  PearsonResult out;
  if (constant(x) || constant(y)) return out;

  const double n = static_cast<double>(x.size());
  double mean_x = 0.0, mean_y = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mean_x += x[i];
    mean_y += y[i];
  }
  mean_x /= n;
  mean_y /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mean_x;
    const double dy = y[i] - mean_y;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  out.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  out.p_value = correlation_p_value(out.r, x.size());
  out.defined = true;
  return out;
}

}  // namespace sensel
