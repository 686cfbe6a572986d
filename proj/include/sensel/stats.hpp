#pragma once

#include <cstddef>
#include <span>

namespace sensel {

/// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
/// `one_minus_x` may be passed explicitly to avoid cancellation near x = 1.
double incomplete_beta(double a, double b, double x);
double incomplete_beta(double a, double b, double x, double one_minus_x);

/// P(|T| >= |t|) for Student's t with `dof` degrees of freedom.
double student_t_two_sided_p(double t, double dof);

struct PearsonResult {
  double r = 0.0;
  double p_value = 1.0;
  bool defined = false;  // false when either variable is constant
};

/// Pearson correlation with a two-sided t-test on n - 2 degrees of freedom.
PearsonResult pearson(std::span<const double> x, std::span<const double> y);

/// Two-sided p-value of a sample correlation r over n pairs.
double correlation_p_value(double r, std::size_t n);

}  // namespace sensel
