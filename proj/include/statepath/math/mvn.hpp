#pragma once

// Multivariate normal orthant probabilities and truncated moments for the
// small dimensions this model produces (one dimension per non-flat period,
// so m <= periods-1). Closed forms for m <= 1, a Drezner-style tetrachoric
// integral for m = 2, a Plackett-identity reduction for m = 3, and a
// sequential-conditioning integral in the log domain as the general /
// extreme-tail fallback. Everything is deterministic.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include "statepath/math/linalg.hpp"
#include "statepath/math/normal.hpp"
#include "statepath/math/quadrature.hpp"

namespace statepath::math {

namespace detail {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Bivariate standard normal density with correlation r.
inline double bvn_pdf(double h, double k, double r) {
  const double omr2 = (1.0 - r) * (1.0 + r);
  const double q = (h * h - 2.0 * r * h * k + k * k) / (2.0 * omr2);
  return std::exp(-q) / (2.0 * 3.14159265358979323846264338327950288 * std::sqrt(omr2));
}

// Tetrachoric series integral: Phi2(h,k,r) = Phi(h)Phi(k) +
// (1/2pi) int_0^{asin r} exp(-(h^2+k^2-2hk sin t)/(2 cos^2 t)) dt.
inline double bvn_cdf_drezner(double h, double k, double r) {
  double base = norm_cdf(h) * norm_cdf(k);
  if (r == 0.0) return base;
  const double upper = std::asin(r);
  const auto &gl = gauss_legendre(24);
  double acc = 0.0;
  for (std::size_t i = 0; i < gl.x.size(); ++i) {
    const double t = 0.5 * upper * (gl.x[i] + 1.0);
    const double st = std::sin(t);
    const double ct2 = std::cos(t) * std::cos(t);
    acc += gl.w[i] * std::exp(-(h * h + k * k - 2.0 * h * k * st) / (2.0 * ct2));
  }
  acc *= 0.5 * upper / (2.0 * 3.14159265358979323846264338327950288);
  return base + acc;
}

double log_mvn_cdf_impl(std::vector<double> b, Mat r, double rel_tol);

// Sequential conditioning on the most restrictive coordinate:
//   Phi_m(b;R) = int_{-inf}^{b_p} phi(x) Phi_{m-1}(b'(x); R') dx,
// computed in the log domain with the substitution x = Phi^{-1}(u Phi(b_p)).
inline double log_mvn_cdf_conditioning(const std::vector<double> &b, const Mat &r,
                                       double rel_tol) {
  const std::size_t m = b.size();
  std::size_t p = 0;
  for (std::size_t i = 1; i < m; ++i)
    if (b[i] < b[p]) p = i;

  // Coordinates perfectly correlated with the pivot reduce to bounds on x.
  double ub = b[p], lb = kNegInf;
  std::vector<std::size_t> keep;
  for (std::size_t j = 0; j < m; ++j) {
    if (j == p) continue;
    const double rho = r(p, j);
    if (1.0 - rho * rho < 1e-14) {
      if (rho > 0.0)
        ub = std::min(ub, b[j] / rho);
      else
        lb = std::max(lb, b[j] / rho);
    } else {
      keep.push_back(j);
    }
  }
  if (!(lb < ub)) return kNegInf;
  const double log_phi_ub = log_norm_cdf(ub);
  if (keep.empty()) {
    return (lb == kNegInf) ? log_phi_ub : log_norm_cdf_interval(lb, ub);
  }

  const std::size_t mk = keep.size();
  std::vector<double> rho_p(mk), sd(mk);
  Mat rc(mk, mk);
  for (std::size_t a = 0; a < mk; ++a) {
    rho_p[a] = r(p, keep[a]);
    sd[a] = std::sqrt(1.0 - rho_p[a] * rho_p[a]);
  }
  for (std::size_t a = 0; a < mk; ++a) {
    rc(a, a) = 1.0;
    for (std::size_t c = a + 1; c < mk; ++c) {
      double v = (r(keep[a], keep[c]) - rho_p[a] * rho_p[c]) / (sd[a] * sd[c]);
      v = std::clamp(v, -1.0, 1.0);
      rc(a, c) = v;
      rc(c, a) = v;
    }
  }

  const auto logf = [&](double u) -> double {
    if (!(u > 0.0)) return kNegInf;
    const double x = norm_quantile_from_log(std::log(u) + log_phi_ub);
    if (x < lb) return kNegInf;
    std::vector<double> bc(mk);
    for (std::size_t a = 0; a < mk; ++a) bc[a] = (b[keep[a]] - rho_p[a] * x) / sd[a];
    return log_mvn_cdf_impl(std::move(bc), rc, rel_tol);
  };
  return log_phi_ub + log_integrate_adaptive(logf, 0.0, 1.0, rel_tol, 256);
}

inline double log_bvn_cdf(double h, double k, double rho, double rel_tol) {
  if (std::isinf(h) || std::isinf(k)) {
    if (h == kNegInf || k == kNegInf) return kNegInf;
    if (std::isinf(h)) return log_norm_cdf(k);
    return log_norm_cdf(h);
  }
  if (rho >= 1.0 - 1e-14) return log_norm_cdf(std::min(h, k));
  if (rho <= -1.0 + 1e-14) {
    // P(Z<=h, -Z<=k) = P(-k <= Z <= h)
    if (h <= -k) return kNegInf;
    return log_norm_cdf_interval(-k, h);
  }
  if (std::fabs(rho) <= 0.925) {
    const double p = bvn_cdf_drezner(h, k, rho);
    const double base = norm_cdf(h) * norm_cdf(k);
    // For rho < 0 the correction cancels against the base; trust the plain
    // value only while the cancellation leaves enough relative headroom.
    const bool cancel_ok = (rho >= 0.0) || (p > 1e-5 * base);
    if (p > 1e-280 && cancel_ok) return std::log(p);
  }
  return log_mvn_cdf_conditioning({h, k}, [&] {
    Mat r(2, 2);
    r(0, 0) = r(1, 1) = 1.0;
    r(0, 1) = r(1, 0) = rho;
    return r;
  }(), rel_tol);
}

// Plackett reduction: interpolate the pivot's two correlations from 0 to
// their targets, keeping the strongest pair fixed. R(t) stays positive
// definite along the path because det R(t) is decreasing in t^2.
inline double tvn_cdf_plackett(double b1, double b2, double b3, double r12, double r13,
                               double r23, double rel_tol) {
  const double base =
      norm_cdf(b1) * std::exp(log_bvn_cdf(b2, b3, r23, rel_tol));
  const auto f = [&](double t) -> double {
    const double q12 = t * r12, q13 = t * r13;
    const double det = 1.0 - q12 * q12 - q13 * q13 - r23 * r23 + 2.0 * q12 * q13 * r23;
    double acc = 0.0;
    if (r12 != 0.0) {
      const double v = 1.0 - q12 * q12;
      const double s2 = std::max(det / v, 0.0);
      const double mu = ((q13 - q12 * r23) * b1 + (r23 - q12 * q13) * b2) / v;
      const double w = (s2 > 0.0) ? (b3 - mu) / std::sqrt(s2) : ((b3 >= mu) ? 40.0 : -40.0);
      acc += r12 * bvn_pdf(b1, b2, q12) * norm_cdf(w);
    }
    if (r13 != 0.0) {
      const double v = 1.0 - q13 * q13;
      const double s2 = std::max(det / v, 0.0);
      const double mu = ((q12 - q13 * r23) * b1 + (r23 - q12 * q13) * b3) / v;
      const double w = (s2 > 0.0) ? (b2 - mu) / std::sqrt(s2) : ((b2 >= mu) ? 40.0 : -40.0);
      acc += r13 * bvn_pdf(b1, b3, q13) * norm_cdf(w);
    }
    return acc;
  };
  const double corr = integrate_adaptive(f, 0.0, 1.0, 1e-12, 1e-18, 200);
  return base + corr;
}

inline double log_tvn_cdf(const std::vector<double> &b, const Mat &r, double rel_tol) {
  for (int i = 0; i < 3; ++i)
    if (b[i] == kNegInf) return kNegInf;
  // Pivot = the coordinate outside the strongest pair.
  int pi = 2, pj = 0, pk = 1;  // pair (0,1), pivot 2
  double best = std::fabs(r(0, 1));
  if (std::fabs(r(0, 2)) > best) {
    best = std::fabs(r(0, 2));
    pi = 1;
    pj = 0;
    pk = 2;
  }
  if (std::fabs(r(1, 2)) > best) {
    pi = 0;
    pj = 1;
    pk = 2;
  }
  const double r12 = r(pi, pj), r13 = r(pi, pk), r23 = r(pj, pk);
  const bool plackett_ok =
      std::fabs(r12) <= 0.99 && std::fabs(r13) <= 0.99 &&
      (1.0 - r12 * r12 - r13 * r13 - r23 * r23 + 2.0 * r12 * r13 * r23) > 1e-10;
  if (plackett_ok && !std::isinf(b[pi]) && !std::isinf(b[pj]) && !std::isinf(b[pk])) {
    const double base_guard =
        norm_cdf(b[pi]) * std::exp(log_bvn_cdf(b[pj], b[pk], r23, rel_tol));
    const double p = tvn_cdf_plackett(b[pi], b[pj], b[pk], r12, r13, r23, rel_tol);
    if (p > 1e-250 && p > 1e-5 * base_guard) return std::log(p);
  }
  return log_mvn_cdf_conditioning(b, r, rel_tol);
}

inline double log_mvn_cdf_impl(std::vector<double> b, Mat r, double rel_tol) {
  // Drop vacuous coordinates; bail out on impossible ones.
  std::vector<std::size_t> act;
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (b[i] == kNegInf) return kNegInf;
    if (b[i] < 38.0) act.push_back(i);  // Phi(38) == 1 in double precision
  }
  if (act.size() != b.size()) {
    std::vector<double> b2(act.size());
    Mat r2(act.size(), act.size());
    for (std::size_t i = 0; i < act.size(); ++i) {
      b2[i] = b[act[i]];
      for (std::size_t j = 0; j < act.size(); ++j) r2(i, j) = r(act[i], act[j]);
    }
    b = std::move(b2);
    r = std::move(r2);
  }
  switch (b.size()) {
    case 0:
      return 0.0;
    case 1:
      return log_norm_cdf(b[0]);
    case 2:
      return log_bvn_cdf(b[0], b[1], r(0, 1), rel_tol);
    case 3:
      return log_tvn_cdf(b, r, rel_tol);
    default:
      return log_mvn_cdf_conditioning(b, r, rel_tol);
  }
}

}  // namespace detail

/// log Phi_m(b; R): log P(Z <= b) for Z ~ N(0, R), R a correlation matrix.
/// Entries of b may be +-inf.
inline double log_mvn_cdf(const std::vector<double> &b, const Mat &r,
                          double rel_tol = 1e-11) {
  if (b.size() != r.rows() || r.rows() != r.cols())
    throw std::invalid_argument("log_mvn_cdf: shape mismatch");
  return detail::log_mvn_cdf_impl(b, r, rel_tol);
}

/// log P(Y_i > 0 for all i), Y ~ N(mu, sigma). Empty mu gives 0 (= log 1).
inline double log_positive_orthant(const Vec &mu, const Mat &sigma,
                                   double rel_tol = 1e-11) {
  const std::size_t m = mu.size();
  if (m == 0) return 0.0;
  std::vector<double> b(m);
  Mat r(m, m);
  std::vector<double> sd(m);
  for (std::size_t i = 0; i < m; ++i) {
    sd[i] = std::sqrt(sigma(i, i));
    if (!(sd[i] > 0.0)) {
      // Degenerate coordinate: deterministic sign.
      if (mu[i] > 0.0) {
        sd[i] = 0.0;
        continue;
      }
      return detail::kNegInf;
    }
  }
  for (std::size_t i = 0; i < m; ++i) {
    b[i] = (sd[i] > 0.0) ? mu[i] / sd[i] : std::numeric_limits<double>::infinity();
    r(i, i) = 1.0;
    for (std::size_t j = i + 1; j < m; ++j) {
      double v = (sd[i] > 0.0 && sd[j] > 0.0) ? sigma(i, j) / (sd[i] * sd[j]) : 0.0;
      v = std::clamp(v, -1.0, 1.0);
      r(i, j) = v;
      r(j, i) = v;
    }
  }
  return detail::log_mvn_cdf_impl(std::move(b), std::move(r), rel_tol);
}

// ---------------------------------------------------------------------------
// Moments of a truncated multivariate normal (lower truncation only).

struct TruncatedMoments {
  double log_alpha = 0.0;  // log P(Y > a)
  Vec mean;                // E[Y | Y > a]
  Mat second;              // E[Y Y^T | Y > a]
  bool approximate = false;
};

namespace detail {

struct TruncWork {
  double log_alpha;
  Vec mean;
  Mat second;
  bool approximate;
};

// Z ~ N(0, S) with covariance S, truncated to Z > a. Moment identities:
//   alpha E[Z_i]      = sum_j S_ij F_j
//   alpha E[Z_i Z_k]  = alpha S_ik + S_ik a_k F_k + sum_{j != k} S_ij G_kj
// with F_j the marginal density at the face z_j = a_j times the conditional
// orthant probability, and G_kj = F_j E[W_k | W > a_-j] for the conditional
// (m-1)-dim normal W; the latter recurses on dimension.
inline TruncWork trunc_moments_cov(const Vec &a, const Mat &s_in, bool need_second,
                                   double rel_tol) {
  const std::size_t m = a.size();
  TruncWork out;
  out.approximate = false;
  if (m == 0) {
    out.log_alpha = 0.0;
    return out;
  }

  Mat s = s_in;
  Vec sd(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (s(i, i) < 1e-14) s(i, i) = 1e-14;  // degenerate coordinate guard
    sd[i] = std::sqrt(s(i, i));
  }

  if (m == 1) {
    const double z = a[0] / sd[0];
    out.log_alpha = log_norm_cdf(-z);
    const double log_hr = log_norm_pdf(z) - out.log_alpha;  // phi(z)/Phi(-z)
    const double hr = std::exp(std::min(log_hr, 700.0));
    out.mean = {sd[0] * hr};
    if (need_second) {
      out.second = Mat(1, 1);
      out.second(0, 0) = s(0, 0) * (1.0 + z * hr);
    }
    return out;
  }

  // alpha.
  {
    std::vector<double> b(m);
    Mat r(m, m);
    for (std::size_t i = 0; i < m; ++i) {
      b[i] = -a[i] / sd[i];
      r(i, i) = 1.0;
      for (std::size_t j = i + 1; j < m; ++j) {
        double v = std::clamp(s(i, j) / (sd[i] * sd[j]), -1.0, 1.0);
        r(i, j) = v;
        r(j, i) = v;
      }
    }
    out.log_alpha = log_mvn_cdf_impl(std::move(b), std::move(r), rel_tol);
  }

  if (out.log_alpha < -600.0) {
    // Vanishing mass: return the corner of the region as a stand-in so
    // downstream mixtures stay finite. Weight there is ~exp(log_alpha).
    out.approximate = true;
    out.mean.resize(m);
    for (std::size_t i = 0; i < m; ++i) out.mean[i] = std::max(a[i], 0.0);
    if (need_second) {
      out.second = Mat(m, m);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t k = 0; k < m; ++k)
          out.second(i, k) = out.mean[i] * out.mean[k] + ((i == k) ? 1e-12 : 0.0);
    }
    return out;
  }

  // Face terms F_j, plus the conditional setups reused by the recursion.
  std::vector<double> log_f(m);
  std::vector<Vec> cond_mean(m), cond_a(m);
  std::vector<Mat> cond_cov(m);
  for (std::size_t j = 0; j < m; ++j) {
    Vec c(m - 1), asub(m - 1);
    Mat cs(m - 1, m - 1);
    std::size_t ii = 0;
    for (std::size_t i = 0; i < m; ++i) {
      if (i == j) continue;
      c[ii] = s(i, j) / s(j, j) * a[j];
      asub[ii] = a[i];
      std::size_t kk = 0;
      for (std::size_t k = 0; k < m; ++k) {
        if (k == j) continue;
        if (kk >= ii) cs(ii, kk) = s(i, k) - s(i, j) * s(j, k) / s(j, j);
        ++kk;
      }
      ++ii;
    }
    for (std::size_t x = 0; x < m - 1; ++x)
      for (std::size_t y = 0; y < x; ++y) cs(x, y) = cs(y, x);

    // log of marginal density of Z_j at a_j.
    const double zj = a[j] / sd[j];
    const double log_dens = log_norm_pdf(zj) - std::log(sd[j]);
    // Conditional orthant P(W > asub), W ~ N(c, cs).
    Vec mu(m - 1);
    for (std::size_t x = 0; x < m - 1; ++x) mu[x] = c[x] - asub[x];
    const double log_cond = log_positive_orthant(mu, cs, rel_tol);
    log_f[j] = log_dens + log_cond;
    cond_mean[j] = std::move(c);
    cond_a[j] = std::move(asub);
    cond_cov[j] = std::move(cs);
  }

  std::vector<double> fr(m);  // F_j / alpha
  for (std::size_t j = 0; j < m; ++j)
    fr[j] = std::exp(std::min(log_f[j] - out.log_alpha, 700.0));

  out.mean.assign(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < m; ++j) acc += s(i, j) * fr[j];
    out.mean[i] = acc;
  }

  if (need_second) {
    // Truncated means of each conditional distribution (recursion).
    std::vector<Vec> cond_tmean(m);
    for (std::size_t j = 0; j < m; ++j) {
      Vec shift(m - 1);
      for (std::size_t x = 0; x < m - 1; ++x) shift[x] = cond_a[j][x] - cond_mean[j][x];
      TruncWork sub = trunc_moments_cov(shift, cond_cov[j], false, rel_tol);
      cond_tmean[j].resize(m - 1);
      for (std::size_t x = 0; x < m - 1; ++x)
        cond_tmean[j][x] = cond_mean[j][x] + sub.mean[x];
      if (sub.approximate) out.approximate = true;
    }
    out.second = Mat(m, m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t k = 0; k < m; ++k) {
        double acc = s(i, k) + s(i, k) * a[k] * fr[k];
        for (std::size_t j = 0; j < m; ++j) {
          if (j == k) continue;
          // index of k within the j-removed subvector
          const std::size_t kk = (k < j) ? k : k - 1;
          acc += s(i, j) * fr[j] * cond_tmean[j][kk];
        }
        out.second(i, k) = acc;
      }
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t k = i + 1; k < m; ++k) {
        const double v = 0.5 * (out.second(i, k) + out.second(k, i));
        out.second(i, k) = v;
        out.second(k, i) = v;
      }
  }
  return out;
}

}  // namespace detail

/// Moments of Y ~ N(mu, sigma) conditioned on Y > 0 (componentwise).
inline TruncatedMoments positive_orthant_moments(const Vec &mu, const Mat &sigma,
                                                 bool need_second = true,
                                                 double rel_tol = 1e-11) {
  const std::size_t m = mu.size();
  TruncatedMoments out;
  if (m == 0) {
    out.log_alpha = 0.0;
    return out;
  }
  Vec a(m);
  for (std::size_t i = 0; i < m; ++i) a[i] = -mu[i];
  detail::TruncWork w = detail::trunc_moments_cov(a, sigma, need_second, rel_tol);
  out.log_alpha = w.log_alpha;
  out.approximate = w.approximate;
  out.mean.resize(m);
  for (std::size_t i = 0; i < m; ++i) out.mean[i] = mu[i] + w.mean[i];
  if (need_second) {
    out.second = Mat(m, m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t k = 0; k < m; ++k)
        out.second(i, k) = mu[i] * mu[k] + mu[i] * w.mean[k] + w.mean[i] * mu[k] +
                           w.second(i, k);
  }
  return out;
}

}  // namespace statepath::math
