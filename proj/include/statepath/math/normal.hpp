#pragma once

// Scalar normal-distribution kernels used throughout the library. All
// routines are deterministic and depend only on libm, so results are
// reproducible across builds on the same platform.

#include <cmath>
#include <limits>
#include <stdexcept>

namespace statepath::math {

inline constexpr double kSqrt2 = 1.4142135623730950488016887242097;
inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;
inline constexpr double kInvSqrt2Pi = 0.39894228040143267793994605993438;

/// Standard normal density.
inline double norm_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

inline double log_norm_pdf(double x) { return -0.5 * (kLog2Pi + x * x); }

/// Standard normal CDF.
inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

namespace detail {

// log(erfc(y)) for y >= 0, switching to the asymptotic expansion once
// erfc itself would underflow.
inline double log_erfc_pos(double y) {
  if (y < 25.0) return std::log(std::erfc(y));
  const double y2 = y * y;
  // erfc(y) ~ exp(-y^2) / (y sqrt(pi)) * (1 - 1/(2y^2) + 3/(4y^4) - ...)
  const double u = 0.5 / y2;
  const double series = -u * (1.0 - 3.0 * u * (1.0 - (5.0 / 3.0) * u * (3.0 - 7.0 * u)));
  return -y2 - std::log(y) - 0.5723649429247000870717137 /* log(sqrt(pi)) */
         + std::log1p(series);
}

}  // namespace detail

/// log of the standard normal CDF, accurate in both tails.
inline double log_norm_cdf(double x) {
  if (x > 3.0) {
    // log(1 - Q(x)) with Q(x) tiny.
    return std::log1p(-0.5 * std::erfc(x / kSqrt2));
  }
  return std::log(0.5) + detail::log_erfc_pos(-x / kSqrt2);
}

/// Inverse standard normal CDF (Wichura's PPND16). Relative accuracy ~1e-15.
inline double norm_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    throw std::domain_error("norm_quantile: p outside [0,1]");
  }
  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                 6.7265770927008700853e4) *
                    r +
                4.5921953931549871457e4) *
                   r +
               1.3731693765509461125e4) *
                  r +
              1.9715909503065514427e3) *
                 r +
             1.3314166789178437745e2) *
                r +
            3.3871328727963666080e0) /
           (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                 3.9307895800092710610e4) *
                    r +
                2.1213794301586595867e4) *
                   r +
               5.3941960214247511077e3) *
                  r +
              6.8718700749205790830e2) *
                 r +
             4.2313330701600911252e1) *
                r +
            1.0);
  }
  double r = (q < 0.0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                2.41780725177450611770e-1) *
                   r +
               1.27045825245236838258e0) *
                  r +
              3.64784832476320460504e0) *
                 r +
             5.76949722146069140550e0) *
                r +
            4.63033784615654529590e0) *
               r +
           1.42343711074968357734e0) /
          (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                1.51986665636164571966e-2) *
                   r +
               1.48103976427480074590e-1) *
                  r +
              6.89767334985100004550e-1) *
                 r +
             1.67638483018380384940e0) *
                r +
            2.05319162663775882187e0) *
               r +
           1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                1.24266094738807843860e-3) *
                   r +
               2.65321895265761230930e-2) *
                  r +
              2.96560571828504891230e-1) *
                 r +
             1.78482653991729133580e0) *
                r +
            5.46378491116411436990e0) *
               r +
           6.65790464350110377720e0) /
          (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                1.84631831751005468180e-5) *
                   r +
               7.86869131145613259100e-4) *
                  r +
              1.48753612908506148525e-2) *
                 r +
             1.36929880922735805310e-1) *
                r +
            5.99832206555887937690e-1) *
               r +
           1.0);
  }
  return (q < 0.0) ? -val : val;
}

/// Inverse of log_norm_cdf: returns x with log Phi(x) = lp. Handles lp far
/// below log(DBL_MIN), where norm_quantile(exp(lp)) would be unusable.
inline double norm_quantile_from_log(double lp) {
  if (lp >= 0.0) return std::numeric_limits<double>::infinity();
  if (lp > -700.0) {
    const double p = std::exp(lp);
    if (p > 0.0) return norm_quantile(p);
  }
  // Solve log Phi(-x) = lp for x > 0 by Newton, starting from the
  // leading-order inversion of -x^2/2 - log(x sqrt(2 pi)).
  double x = std::sqrt(-2.0 * lp);
  for (int it = 0; it < 50; ++it) {
    const double f = log_norm_cdf(-x) - lp;
    const double dfdx = -std::exp(log_norm_pdf(x) - log_norm_cdf(-x));
    const double step = f / dfdx;
    x -= step;
    if (std::fabs(step) < 1e-14 * (1.0 + std::fabs(x))) break;
  }
  return -x;
}

/// log(Phi(b) - Phi(a)) for a < b, stable when both endpoints sit in a tail.
inline double log_norm_cdf_interval(double a, double b) {
  if (a > b) throw std::invalid_argument("log_norm_cdf_interval: a > b");
  if (a + b > 0.0) return log_norm_cdf_interval(-b, -a);  // reflect into lower tail
  const double la = log_norm_cdf(a), lb = log_norm_cdf(b);
  // lb >= la; result = lb + log(1 - exp(la - lb))
  const double d = la - lb;
  return lb + ((d > -1e-15) ? std::log(-(d)) /* limit a->b */ : std::log1p(-std::exp(d)));
}

}  // namespace statepath::math
