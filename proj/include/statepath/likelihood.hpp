#pragma once

// Path-conditional marginal likelihood of a gene's centered sample means.
//
// Centered model: ybar_t = mu1 + sum_{u <= t, u in U} delta_u + e_t for
// t = 2..T, with mu1 ~ N(0, sigma^2/n_1), e_t ~ N(0, sigma^2/n_t), and
// delta_u sign-constrained truncated normals on the path's non-Same periods.
// The first centered mean is identically zero and carries no information.
//
// Writing theta = (mu1, delta_U) with unconstrained Gaussian prior
// N(m0, V0) restricted to the sign orthant, the marginal factors exactly:
//   f(ybar | v) = N(ybar; A m0, S) * P_post / P_prior,
// where S = A V0 A^T + D, P_prior is a product of univariate normal CDFs,
// and P_post is the orthant probability of the Gaussian posterior's delta
// block. Everything gene-independent is precomputed per path.

#include <cmath>
#include <cstdint>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

#include "statepath/dataset.hpp"
#include "statepath/math/linalg.hpp"
#include "statepath/math/mvn.hpp"
#include "statepath/math/normal.hpp"
#include "statepath/math/rng.hpp"
#include "statepath/params.hpp"
#include "statepath/state_path.hpp"

namespace statepath {

struct PathConditionalResult {
  double log_lik = 0.0;
  math::Vec post_mean;  // E[mu~_t | x, v], length T
  math::Vec post_var;   // Var[mu~_t | x, v], length T
};

namespace detail {

struct PathContext {
  std::size_t T = 0, q = 0, m = 0;       // time points, observations, free deltas
  std::vector<std::size_t> delta_period; // period index (0-based) per delta
  std::vector<double> sign;              // +1 Up, -1 Down per delta
  math::Vec a_mu0;                       // A m0, length q
  math::Mat chol_s;                      // Cholesky of S (q x q)
  double log_det_s = 0.0;
  math::Mat v1;                          // posterior covariance (k x k), k = 1+m
  math::Vec c;                           // posterior mean offset, length k
  math::Mat m_gain;                      // posterior mean gain (k x q)
  // Sign-flipped delta block: Y = diag(sign) delta.
  math::Mat flip_cov;                    // k=m x m
  std::vector<double> flip_sd;
  math::Mat flip_corr;
  double log_prior_orthant = 0.0;
  // mu1 regression onto delta (for truncated moments of the free block).
  math::Vec b_reg;                       // length m
  double schur_mu1 = 0.0;
};

inline PathContext make_path_context(const std::vector<std::size_t> &n,
                                     const ObservationParams &obs,
                                     const MeanLevelParams &mean, const StatePath &path) {
  path.validate();
  obs.validate();
  mean.validate();
  const std::size_t T = n.size();
  if (path.time_points() != T)
    throw std::invalid_argument("path_log_likelihood: path length mismatch");
  if (mean.periods() != T - 1)
    throw std::invalid_argument("path_log_likelihood: mean-level period mismatch");

  PathContext ctx;
  ctx.T = T;
  ctx.q = T - 1;
  for (std::size_t t = 2; t <= T; ++t) {
    const State s = path.at_time(t);
    if (s == State::Same) continue;
    ctx.delta_period.push_back(t - 2);
    ctx.sign.push_back(s == State::Up ? 1.0 : -1.0);
  }
  ctx.m = ctx.delta_period.size();
  const std::size_t k = 1 + ctx.m;
  const double sigma2 = obs.sigma2;

  math::Mat a(ctx.q, k);
  math::Vec v0(k), m0(k, 0.0);
  v0[0] = sigma2 / static_cast<double>(n[0]);
  for (std::size_t j = 0; j < ctx.m; ++j) {
    const std::size_t p = ctx.delta_period[j];
    const State dir = ctx.sign[j] > 0 ? State::Up : State::Down;
    m0[1 + j] = mean.eta(p, dir);
    const double tau = mean.tau(p, dir);
    v0[1 + j] = tau * tau;
    ctx.log_prior_orthant += math::log_norm_cdf(ctx.sign[j] * m0[1 + j] / tau);
  }
  for (std::size_t r = 0; r < ctx.q; ++r) {
    a(r, 0) = 1.0;
    for (std::size_t j = 0; j < ctx.m; ++j)
      a(r, 1 + j) = (ctx.delta_period[j] <= r) ? 1.0 : 0.0;
  }

  math::Vec dinv(ctx.q);
  for (std::size_t r = 0; r < ctx.q; ++r) dinv[r] = static_cast<double>(n[r + 1]) / sigma2;

  // S = A V0 A^T + D.
  math::Mat s(ctx.q, ctx.q);
  for (std::size_t r = 0; r < ctx.q; ++r)
    for (std::size_t t = 0; t < ctx.q; ++t) {
      double acc = 0.0;
      for (std::size_t j = 0; j < k; ++j) acc += a(r, j) * v0[j] * a(t, j);
      if (r == t) acc += 1.0 / dinv[r];
      s(r, t) = acc;
    }
  ctx.chol_s = math::cholesky(s);
  ctx.log_det_s = math::log_det_from_cholesky(ctx.chol_s);

  // V1 = (V0^-1 + A^T D^-1 A)^-1; M = V1 A^T D^-1; c = V1 V0^-1 m0.
  math::Mat prec(k, k);
  for (std::size_t i = 0; i < k; ++i) {
    prec(i, i) = 1.0 / v0[i];
    for (std::size_t j = 0; j < k; ++j) {
      double acc = 0.0;
      for (std::size_t r = 0; r < ctx.q; ++r) acc += a(r, i) * dinv[r] * a(r, j);
      prec(i, j) += acc;
    }
  }
  ctx.v1 = math::spd_inverse(prec);
  ctx.m_gain = math::Mat(k, ctx.q);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t r = 0; r < ctx.q; ++r) {
      double acc = 0.0;
      for (std::size_t j = 0; j < k; ++j) acc += ctx.v1(i, j) * a(r, j);
      ctx.m_gain(i, r) = acc * dinv[r];
    }
  ctx.c.assign(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < k; ++j) acc += ctx.v1(i, j) * m0[j] / v0[j];
    ctx.c[i] = acc;
  }
  ctx.a_mu0 = math::matvec(a, m0);

  if (ctx.m > 0) {
    ctx.flip_cov = math::Mat(ctx.m, ctx.m);
    ctx.flip_sd.resize(ctx.m);
    ctx.flip_corr = math::Mat(ctx.m, ctx.m);
    for (std::size_t i = 0; i < ctx.m; ++i)
      for (std::size_t j = 0; j < ctx.m; ++j)
        ctx.flip_cov(i, j) = ctx.sign[i] * ctx.sign[j] * ctx.v1(1 + i, 1 + j);
    for (std::size_t i = 0; i < ctx.m; ++i) ctx.flip_sd[i] = std::sqrt(ctx.flip_cov(i, i));
    for (std::size_t i = 0; i < ctx.m; ++i) {
      ctx.flip_corr(i, i) = 1.0;
      for (std::size_t j = i + 1; j < ctx.m; ++j) {
        double v = ctx.flip_cov(i, j) / (ctx.flip_sd[i] * ctx.flip_sd[j]);
        v = std::min(1.0, std::max(-1.0, v));
        ctx.flip_corr(i, j) = v;
        ctx.flip_corr(j, i) = v;
      }
    }
    // Regression of mu1 on delta within the Gaussian posterior.
    math::Mat vdd(ctx.m, ctx.m);
    for (std::size_t i = 0; i < ctx.m; ++i)
      for (std::size_t j = 0; j < ctx.m; ++j) vdd(i, j) = ctx.v1(1 + i, 1 + j);
    const math::Mat vdd_chol = math::cholesky(vdd);
    math::Vec v0d(ctx.m);
    for (std::size_t j = 0; j < ctx.m; ++j) v0d[j] = ctx.v1(0, 1 + j);
    ctx.b_reg = math::cholesky_solve(vdd_chol, v0d);
    double acc = ctx.v1(0, 0);
    for (std::size_t j = 0; j < ctx.m; ++j) acc -= ctx.b_reg[j] * v0d[j];
    ctx.schur_mu1 = std::max(acc, 0.0);
  }
  return ctx;
}

/// Gaussian part + posterior mean; shared by likelihood and moments.
struct GeneWork {
  double log_norm;    // log N(ybar; A m0, S)
  math::Vec m1;       // posterior mean of theta, length 1+m
};

inline GeneWork gene_work(const PathContext &ctx, const double *ybar) {
  GeneWork w;
  math::Vec r(ctx.q);
  for (std::size_t t = 0; t < ctx.q; ++t) r[t] = ybar[t] - ctx.a_mu0[t];
  const double quad = math::inv_quad_form(ctx.chol_s, r);
  w.log_norm = -0.5 * (static_cast<double>(ctx.q) * math::kLog2Pi + ctx.log_det_s + quad);
  const std::size_t k = 1 + ctx.m;
  w.m1 = ctx.c;
  for (std::size_t i = 0; i < k; ++i) {
    double acc = 0.0;
    for (std::size_t t = 0; t < ctx.q; ++t) acc += ctx.m_gain(i, t) * ybar[t];
    w.m1[i] += acc;
  }
  return w;
}

inline double log_posterior_orthant(const PathContext &ctx, const math::Vec &m1) {
  std::vector<double> b(ctx.m);
  for (std::size_t i = 0; i < ctx.m; ++i)
    b[i] = ctx.sign[i] * m1[1 + i] / ctx.flip_sd[i];
  return math::log_mvn_cdf(b, ctx.flip_corr);
}

inline double path_log_likelihood_ctx(const PathContext &ctx, const double *ybar) {
  const GeneWork w = gene_work(ctx, ybar);
  if (ctx.m == 0) return w.log_norm;
  return w.log_norm + log_posterior_orthant(ctx, w.m1) - ctx.log_prior_orthant;
}

inline PathConditionalResult path_conditional_moments_ctx(const PathContext &ctx,
                                                          const double *ybar) {
  const GeneWork w = gene_work(ctx, ybar);
  PathConditionalResult out;
  out.post_mean.assign(ctx.T, 0.0);
  out.post_var.assign(ctx.T, 0.0);

  double mu1_mean, mu1_var;
  math::Vec d_mean(ctx.m);
  math::Mat d_cov(ctx.m, ctx.m);
  math::Vec mu1_d_cov(ctx.m);

  if (ctx.m == 0) {
    out.log_lik = w.log_norm;
    mu1_mean = w.m1[0];
    mu1_var = ctx.v1(0, 0);
  } else {
    math::Vec flip_mu(ctx.m);
    for (std::size_t i = 0; i < ctx.m; ++i) flip_mu[i] = ctx.sign[i] * w.m1[1 + i];
    const math::TruncatedMoments tm =
        math::positive_orthant_moments(flip_mu, ctx.flip_cov, true);
    out.log_lik = w.log_norm + tm.log_alpha - ctx.log_prior_orthant;
    for (std::size_t i = 0; i < ctx.m; ++i) d_mean[i] = ctx.sign[i] * tm.mean[i];
    for (std::size_t i = 0; i < ctx.m; ++i)
      for (std::size_t j = 0; j < ctx.m; ++j)
        d_cov(i, j) = ctx.sign[i] * ctx.sign[j] * tm.second(i, j) - d_mean[i] * d_mean[j];
    // mu1 | delta is untouched by the truncation; propagate through the
    // Gaussian regression identities.
    mu1_mean = w.m1[0];
    for (std::size_t j = 0; j < ctx.m; ++j)
      mu1_mean += ctx.b_reg[j] * (d_mean[j] - w.m1[1 + j]);
    mu1_var = ctx.schur_mu1;
    for (std::size_t i = 0; i < ctx.m; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < ctx.m; ++j) acc += d_cov(i, j) * ctx.b_reg[j];
      mu1_d_cov[i] = acc;
      mu1_var += ctx.b_reg[i] * acc;
    }
  }

  // Curve: mu~_1 = theta_0; mu~_t = theta_0 + sum of deltas with period < t.
  for (std::size_t t = 0; t < ctx.T; ++t) {
    double mean_acc = mu1_mean;
    double var_acc = mu1_var;
    for (std::size_t i = 0; i < ctx.m; ++i) {
      if (ctx.delta_period[i] + 2 > t + 1) continue;  // delta enters at t_i = p_i + 2
      mean_acc += d_mean[i];
      var_acc += 2.0 * mu1_d_cov[i];
      for (std::size_t j = 0; j < ctx.m; ++j)
        if (ctx.delta_period[j] + 2 <= t + 1) var_acc += d_cov(i, j);
    }
    out.post_mean[t] = mean_acc;
    out.post_var[t] = std::max(var_acc, 0.0);
  }
  return out;
}

}  // namespace detail

/// Precomputed per-path contexts for one (design, params) pair; the
/// per-gene evaluations are read-only and safe to run in parallel.
class PathEngine {
 public:
  PathEngine(const std::vector<std::size_t> &n, const ObservationParams &obs,
             const MeanLevelParams &mean)
      : paths_(enumerate_state_paths(n.size())) {
    contexts_.reserve(paths_.size());
    for (const StatePath &p : paths_.paths)
      contexts_.push_back(detail::make_path_context(n, obs, mean, p));
  }

  PathEngine(const Design &d, const ObservationParams &obs, const MeanLevelParams &mean)
      : PathEngine(d.n, obs, mean) {}

  const PathSet &paths() const { return paths_; }
  std::size_t path_count() const { return contexts_.size(); }

  /// ybar: the gene's T centered means (leading zero included).
  double log_likelihood(const double *centered_means, std::size_t path_index) const {
    return detail::path_log_likelihood_ctx(contexts_[path_index], centered_means + 1);
  }

  PathConditionalResult conditional_moments(const double *centered_means,
                                            std::size_t path_index) const {
    return detail::path_conditional_moments_ctx(contexts_[path_index], centered_means + 1);
  }

 private:
  PathSet paths_;
  std::vector<detail::PathContext> contexts_;
};

/// One-off evaluation (tests, tools). centered_means has length T with
/// centered_means[0] == 0.
inline double path_log_likelihood(const double *centered_means, const StatePath &path,
                                  const ObservationParams &obs, const MeanLevelParams &mean,
                                  const Design &design) {
  const detail::PathContext ctx = detail::make_path_context(design.n, obs, mean, path);
  return detail::path_log_likelihood_ctx(ctx, centered_means + 1);
}

inline PathConditionalResult path_conditional_moments(const double *centered_means,
                                                      const StatePath &path,
                                                      const ObservationParams &obs,
                                                      const MeanLevelParams &mean,
                                                      const Design &design) {
  const detail::PathContext ctx = detail::make_path_context(design.n, obs, mean, path);
  return detail::path_conditional_moments_ctx(ctx, centered_means + 1);
}

/// log density of a between-period difference d = delta + e, where e ~
/// N(0, s2) and delta ~ N(eta, tau^2) truncated to sign*delta > 0. Exact
/// conjugate form; this is the component density used by the mean-level
/// M-step and the pairwise baseline.
inline double log_signed_increment_density(double d, double eta, double tau, double s2,
                                           double sign) {
  const double v = s2 + tau * tau;
  const double log_gauss = -0.5 * (math::kLog2Pi + std::log(v) + (d - eta) * (d - eta) / v);
  const double post_mean = (tau * tau * d + s2 * eta) / v;
  const double post_sd = tau * std::sqrt(s2 / v);
  return log_gauss + math::log_norm_cdf(sign * post_mean / post_sd) -
         math::log_norm_cdf(sign * eta / tau);
}

/// log density of d under the Same state: pure noise.
inline double log_same_increment_density(double d, double s2) {
  return -0.5 * (math::kLog2Pi + std::log(s2) + d * d / s2);
}

struct McEstimate {
  double log_estimate = 0.0;
  double log_std_error = 0.0;  // delta-method SE of the log estimate
};

/// Plain Monte Carlo estimate of the marginal likelihood: draw the latent
/// level and increments from their priors and average the data density.
/// Draw order per sample: mu1, then increments by increasing period.
inline McEstimate mc_oracle_log_likelihood(const double *centered_means,
                                           const StatePath &path,
                                           const ObservationParams &obs,
                                           const MeanLevelParams &mean, const Design &design,
                                           std::size_t n_samples, std::uint64_t seed) {
  if (n_samples < 10000)
    throw std::invalid_argument("mc_oracle_log_likelihood: need n_samples >= 1e4");
  path.validate();
  obs.validate();
  mean.validate();
  const std::size_t T = design.T;
  if (path.time_points() != T)
    throw std::invalid_argument("mc_oracle_log_likelihood: path length mismatch");
  const double *ybar = centered_means + 1;
  const double sigma2 = obs.sigma2;
  const double sd_mu1 = std::sqrt(sigma2 / static_cast<double>(design.n[0]));
  std::vector<double> obs_sd(T - 1);
  for (std::size_t t = 0; t < T - 1; ++t)
    obs_sd[t] = std::sqrt(sigma2 / static_cast<double>(design.n[t + 1]));

  math::Rng rng(seed);
  std::vector<double> logw(n_samples);
  for (std::size_t s = 0; s < n_samples; ++s) {
    double level = rng.normal(0.0, sd_mu1);
    double lw = 0.0;
    for (std::size_t t = 2; t <= T; ++t) {
      const State st = path.at_time(t);
      const std::size_t p = t - 2;
      if (st == State::Up)
        level += rng.truncated_normal_above(0.0, mean.eta(p, State::Up),
                                            mean.tau(p, State::Up));
      else if (st == State::Down)
        level += rng.truncated_normal_below(0.0, mean.eta(p, State::Down),
                                            mean.tau(p, State::Down));
      const double z = (ybar[p] - level) / obs_sd[p];
      lw += math::log_norm_pdf(z) - std::log(obs_sd[p]);
    }
    logw[s] = lw;
  }
  double mx = logw[0];
  for (double v : logw) mx = std::max(mx, v);
  double s1 = 0.0, s2 = 0.0;
  for (double v : logw) {
    const double e = std::exp(v - mx);
    s1 += e;
    s2 += e * e;
  }
  const double nn = static_cast<double>(n_samples);
  const double mean_w = s1 / nn;
  const double var_w = std::max(s2 / nn - mean_w * mean_w, 0.0);
  McEstimate out;
  out.log_estimate = mx + std::log(mean_w);
  out.log_std_error = std::sqrt(var_w / nn) / mean_w;
  return out;
}

}  // namespace statepath
