#pragma once

// 1-D quadrature: Gauss-Legendre rules generated at startup, plus an
// adaptive 15-point Gauss-Kronrod integrator in both the plain and the log
// domain. The log-domain variant integrates exp(logf) without ever leaving
// log space, so integrands down at exp(-5000) survive.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

namespace statepath::math {

/// Gauss-Legendre nodes/weights on [-1, 1], found by Newton iteration on
/// the Legendre recurrence (no tables).
struct GaussLegendre {
  std::vector<double> x, w;

  explicit GaussLegendre(int n) : x(n), w(n) {
    const double pi = 3.14159265358979323846264338327950288;
    for (int i = 0; i < (n + 1) / 2; ++i) {
      double xi = std::cos(pi * (i + 0.75) / (n + 0.5));
      double dp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = xi;
        for (int k = 2; k <= n; ++k) {
          const double pk = ((2.0 * k - 1.0) * xi * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = pk;
        }
        dp = n * (xi * p1 - p0) / (xi * xi - 1.0);
        const double step = p1 / dp;
        xi -= step;
        if (std::fabs(step) < 1e-15) break;
      }
      x[i] = -xi;
      x[n - 1 - i] = xi;
      const double wi = 2.0 / ((1.0 - xi * xi) * dp * dp);
      w[i] = wi;
      w[n - 1 - i] = wi;
    }
  }
};

/// Shared fixed-order rule (order picked once per distinct n).
inline const GaussLegendre &gauss_legendre(int n) {
  static const GaussLegendre g8(8), g24(24), g48(48);
  if (n == 8) return g8;
  if (n == 24) return g24;
  if (n == 48) return g48;
  static thread_local GaussLegendre custom(1);
  if (static_cast<int>(custom.x.size()) != n) custom = GaussLegendre(n);
  return custom;
}

namespace detail {

// 15-point Kronrod extension of 7-point Gauss (QUADPACK dqk15 constants).
inline constexpr double kGk15X[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr double kGk15Wk[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr double kGk15Wg[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
  double a, b;
  double integral, error;
};

template <class F>
Segment gk15(const F &f, double a, double b) {
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  double k = 0.0, g = 0.0;
  for (int i = 0; i < 8; ++i) {
    const double dx = h * kGk15X[i];
    const double fv = (i == 7) ? f(c) : f(c - dx) + f(c + dx);
    k += kGk15Wk[i] * fv;
    if (i % 2 == 1) g += kGk15Wg[i / 2] * fv;
  }
  return {a, b, k * h, std::fabs(k - g) * h};
}

struct LogSegment {
  double a, b;
  double log_integral, log_error;
};

template <class F>
LogSegment gk15_log(const F &logf, double a, double b) {
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  double lf[15];
  double m = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < 8; ++i) {
    const double dx = h * kGk15X[i];
    lf[i] = logf(c - dx);
    lf[14 - i] = (i == 7) ? lf[i] : logf(c + dx);
    m = std::max(m, std::max(lf[i], lf[14 - i]));
  }
  if (!(m > -std::numeric_limits<double>::infinity()))
    return {a, b, -std::numeric_limits<double>::infinity(),
            -std::numeric_limits<double>::infinity()};
  double k = 0.0, g = 0.0;
  for (int i = 0; i < 8; ++i) {
    const double fv = (i == 7) ? std::exp(lf[i] - m)
                               : std::exp(lf[i] - m) + std::exp(lf[14 - i] - m);
    k += kGk15Wk[i] * fv;
    if (i % 2 == 1) g += kGk15Wg[i / 2] * fv;
  }
  const double scale = m + std::log(h);
  const double lerr = (k == g) ? -std::numeric_limits<double>::infinity()
                               : scale + std::log(std::fabs(k - g));
  return {a, b, scale + std::log(k), lerr};
}

inline double log_add(double la, double lb) {
  if (la < lb) std::swap(la, lb);
  if (lb == -std::numeric_limits<double>::infinity()) return la;
  return la + std::log1p(std::exp(lb - la));
}

}  // namespace detail

/// Adaptive GK15 on [a, b]. Splits the worst segment until the summed error
/// estimate meets max(abs_tol, rel_tol * |integral|) or the segment budget
/// runs out.
template <class F>
double integrate_adaptive(const F &f, double a, double b, double rel_tol = 1e-10,
                          double abs_tol = 0.0, std::size_t max_segments = 200) {
  std::vector<detail::Segment> segs{detail::gk15(f, a, b)};
  while (segs.size() < max_segments) {
    double total = 0.0, err = 0.0;
    std::size_t worst = 0;
    for (std::size_t i = 0; i < segs.size(); ++i) {
      total += segs[i].integral;
      err += segs[i].error;
      if (segs[i].error > segs[worst].error) worst = i;
    }
    if (err <= std::max(abs_tol, rel_tol * std::fabs(total))) break;
    const detail::Segment s = segs[worst];
    const double mid = 0.5 * (s.a + s.b);
    if (!(mid > s.a && mid < s.b)) break;  // interval at machine resolution
    segs[worst] = detail::gk15(f, s.a, mid);
    segs.push_back(detail::gk15(f, mid, s.b));
  }
  double total = 0.0;
  for (const auto &s : segs) total += s.integral;
  return total;
}

/// Adaptive GK15 for log ∫_a^b exp(logf(x)) dx. The integrand must be
/// given as its log (may be -inf). Returns the log of the integral.
template <class F>
double log_integrate_adaptive(const F &logf, double a, double b, double rel_tol = 1e-10,
                              std::size_t max_segments = 200) {
  const double ninf = -std::numeric_limits<double>::infinity();
  std::vector<detail::LogSegment> segs{detail::gk15_log(logf, a, b)};
  while (segs.size() < max_segments) {
    double ltotal = ninf, lerr = ninf;
    std::size_t worst = 0;
    for (std::size_t i = 0; i < segs.size(); ++i) {
      ltotal = detail::log_add(ltotal, segs[i].log_integral);
      lerr = detail::log_add(lerr, segs[i].log_error);
      if (segs[i].log_error > segs[worst].log_error) worst = i;
    }
    if (ltotal == ninf || lerr <= ltotal + std::log(rel_tol)) break;
    const detail::LogSegment s = segs[worst];
    const double mid = 0.5 * (s.a + s.b);
    if (!(mid > s.a && mid < s.b)) break;
    segs[worst] = detail::gk15_log(logf, s.a, mid);
    segs.push_back(detail::gk15_log(logf, mid, s.b));
  }
  double ltotal = ninf;
  for (const auto &s : segs) ltotal = detail::log_add(ltotal, s.log_integral);
  return ltotal;
}

}  // namespace statepath::math
