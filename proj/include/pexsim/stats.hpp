#pragma once

#include <cmath>
#include <numbers>

namespace pexsim {

// Upper tail of the chi-square distribution with one degree of freedom.
// P(X > x) = P(|Z| > sqrt(x)) = erfc(sqrt(x / 2)); std::erfc is accurate to a
// few ulp over the whole range, including the far tail.
inline double chi_square_sf_1df(double x) {
  if (!(x > 0.0)) return 1.0;
  return std::erfc(std::sqrt(0.5 * x));
}

// Two-sided normal p-value for a z (or approximate t) statistic.
inline double normal_two_sided_p(double z) { return std::erfc(std::abs(z) / std::numbers::sqrt2); }

struct WaldResult {
  double stat = 0.0;
  double p = 1.0;
};

// Single-coefficient Wald chi-square test.
inline WaldResult wald_test(double coef, double robust_se) {
  const double z = coef / robust_se;
  const double stat = z * z;
  return {stat, chi_square_sf_1df(stat)};
}

}  // namespace pexsim
