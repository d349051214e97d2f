#pragma once

// Empirical Bayes fitting: plug-in sigma^2, then EM over the state-level
// prior and the mean-level truncated-normal parameters. The observed-data
// log-likelihood trace must be nondecreasing up to a small slack; the
// mean-level update is a composite (pairwise) maximization, so a violation
// beyond the slack is surfaced as a hard error rather than hidden.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "statepath/dataset.hpp"
#include "statepath/likelihood.hpp"
#include "statepath/math/optimize.hpp"
#include "statepath/math/rng.hpp"
#include "statepath/params.hpp"
#include "statepath/state_path.hpp"
#include "statepath/util/parallel.hpp"

namespace statepath {

struct GenePosterior {
  std::vector<double> path_probs;       // over the canonical PathSet
  std::vector<double> state_marginals;  // T x 3 row-major; row 1 is (1,0,0) by
                                        // convention (the first point is Start)
  std::vector<double> pairwise;         // (T-2) x 9 row-major, prev*3+next, t=3..T
  double log_marginal = 0.0;            // log f(x_g)

  double marginal(std::size_t t, State s) const {  // t is 1-based
    return state_marginals[(t - 1) * 3 + static_cast<std::size_t>(state_digit(s))];
  }
};

struct FitConfig {
  double rel_tol = 1e-6;
  int max_iters = 500;
  int threads = 1;
  bool deterministic_reduction = true;  // reductions are always fixed-order;
                                        // kept as an accepted config key
  int multi_start = 0;                  // extra perturbed starts (0 = off)
  std::uint64_t multi_start_seed = 0;
  double mono_slack = 1e-8;             // absolute slack for the trace check
};

struct FitReport {
  ModelParams params;
  std::vector<double> log_lik_trace;
  int iterations = 0;
  bool converged = false;
  std::vector<GenePosterior> posteriors;
  // The mean-level update is a composite (pairwise) maximization, so it can
  // reduce the observed-data likelihood near a fixed point. Such steps are
  // rejected in favor of a state-only update; rejections are counted here and
  // repeated rejections freeze the mean level for the rest of the run.
  int mean_step_rejections = 0;
  bool mean_updates_frozen = false;
};

inline ObservationParams estimate_sigma2(const SufficientStats &stats) {
  std::size_t df_total = 0;
  for (std::size_t t = 0; t < stats.T; ++t) df_total += stats.n[t] - 1;
  if (df_total == 0)
    throw std::invalid_argument("estimate_sigma2: zero degrees of freedom (no replication)");
  const double s2 = stats.pooled_ss / (static_cast<double>(stats.G) *
                                       static_cast<double>(df_total));
  if (!(s2 > 0.0))
    throw std::invalid_argument("estimate_sigma2: pooled variance is zero");
  return ObservationParams{s2};
}

inline ObservationParams estimate_sigma2(const ExpressionDataset &ds) {
  return estimate_sigma2(compute_sufficient_stats(ds));
}

inline StateLevelParams default_state_params(MarkovOrder order, std::size_t T) {
  StateLevelParams sp;
  sp.order = order;
  sp.T = T;
  const StateProb init{0.8, 0.1, 0.1};  // Same, Up, Down
  switch (order) {
    case MarkovOrder::Zero:
      sp.marginals.assign(T - 1, init);
      break;
    case MarkovOrder::First:
      sp.pi = init;
      sp.transitions.assign(T - 2, TransitionMatrix{init, init, init});
      break;
    case MarkovOrder::Full: {
      const PathSet ps = enumerate_state_paths(T);
      sp.path_probs.resize(ps.size());
      for (std::size_t i = 0; i < ps.size(); ++i) {
        double p = 1.0;
        for (std::size_t t = 2; t <= T; ++t)
          p *= init[static_cast<std::size_t>(state_digit(ps[i].at_time(t)))];
        sp.path_probs[i] = p;
      }
      break;
    }
  }
  return sp;
}

inline ModelParams initialize_params(const ExpressionDataset &ds, MarkovOrder order) {
  ModelParams p;
  p.obs = estimate_sigma2(ds);
  p.mean = MeanLevelParams::constant(ds.design.T - 1, 1.0, 1.0, -1.0, 1.0);
  p.state = default_state_params(order, ds.design.T);
  p.validate();
  return p;
}

namespace detail {

struct PathDigits {
  // digit of each path at each period, plus the all-Same index (always 0)
  std::size_t P = 0, periods = 0;
  std::vector<int> d;  // P x periods
  int at(std::size_t path, std::size_t period) const { return d[path * periods + period]; }
};

inline PathDigits make_path_digits(const PathSet &ps) {
  PathDigits pd;
  pd.P = ps.size();
  pd.periods = ps.T - 1;
  pd.d.resize(pd.P * pd.periods);
  for (std::size_t i = 0; i < pd.P; ++i)
    for (std::size_t t = 2; t <= ps.T; ++t)
      pd.d[i * pd.periods + (t - 2)] = state_digit(ps[i].at_time(t));
  return pd;
}

}  // namespace detail

/// One E-step pass: exact posteriors over paths for every gene, the
/// implied marginals, and the observed-data log-likelihood.
inline std::vector<GenePosterior> e_step(const SufficientStats &stats,
                                         const ModelParams &params, int threads = 1) {
  params.validate();
  if (params.state.T != stats.T)
    throw std::invalid_argument("e_step: params/stats time-point mismatch");
  const PathEngine engine(stats.n, params.obs, params.mean);
  const std::size_t P = engine.path_count();
  const detail::PathDigits digits = detail::make_path_digits(engine.paths());
  std::vector<double> log_prior(P);
  for (std::size_t i = 0; i < P; ++i)
    log_prior[i] = log_prior_path_probability(engine.paths()[i], params.state);

  const std::size_t T = stats.T;
  std::vector<GenePosterior> post(stats.G);
  util::parallel_for(stats.G, threads, [&](std::size_t g) {
    GenePosterior &gp = post[g];
    gp.path_probs.assign(P, 0.0);
    const double *row = stats.centered_row(g);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < P; ++i) {
      double lw = log_prior[i];
      if (lw != -std::numeric_limits<double>::infinity())
        lw += engine.log_likelihood(row, i);
      gp.path_probs[i] = lw;
      mx = std::max(mx, lw);
    }
    if (!(mx > -std::numeric_limits<double>::infinity()))
      throw std::runtime_error("e_step: all paths have zero prior probability");
    double z = 0.0;
    for (std::size_t i = 0; i < P; ++i) {
      const double e = std::exp(gp.path_probs[i] - mx);
      gp.path_probs[i] = e;
      z += e;
    }
    for (std::size_t i = 0; i < P; ++i) gp.path_probs[i] /= z;
    gp.log_marginal = mx + std::log(z);

    gp.state_marginals.assign(T * 3, 0.0);
    gp.state_marginals[0] = 1.0;  // Start row
    for (std::size_t i = 0; i < P; ++i) {
      const double p = gp.path_probs[i];
      for (std::size_t pd = 0; pd < T - 1; ++pd)
        gp.state_marginals[(pd + 1) * 3 + static_cast<std::size_t>(digits.at(i, pd))] += p;
    }
    if (T >= 3) {
      gp.pairwise.assign((T - 2) * 9, 0.0);
      for (std::size_t i = 0; i < P; ++i) {
        const double p = gp.path_probs[i];
        for (std::size_t pd = 1; pd < T - 1; ++pd)
          gp.pairwise[(pd - 1) * 9 + static_cast<std::size_t>(digits.at(i, pd - 1)) * 3 +
                      static_cast<std::size_t>(digits.at(i, pd))] += p;
      }
    }
  });
  return post;
}

/// Observed-data log-likelihood, reduced in gene order.
inline double total_log_likelihood(const std::vector<GenePosterior> &post) {
  double s = 0.0;
  for (const auto &gp : post) s += gp.log_marginal;
  return s;
}

inline StateLevelParams m_step_state(const std::vector<GenePosterior> &post,
                                     MarkovOrder order, std::size_t T) {
  if (post.empty()) throw std::invalid_argument("m_step_state: empty gene set");
  const double G = static_cast<double>(post.size());
  StateLevelParams sp;
  sp.order = order;
  sp.T = T;
  const auto normalize3 = [](StateProb &v) {
    const double s = v[0] + v[1] + v[2];
    if (s > 0.0)
      for (double &x : v) x /= s;
    else
      v = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  };
  switch (order) {
    case MarkovOrder::Zero: {
      sp.marginals.assign(T - 1, StateProb{0.0, 0.0, 0.0});
      for (const auto &gp : post)
        for (std::size_t pd = 0; pd < T - 1; ++pd)
          for (int i = 0; i < 3; ++i)
            sp.marginals[pd][static_cast<std::size_t>(i)] +=
                gp.state_marginals[(pd + 1) * 3 + static_cast<std::size_t>(i)];
      for (auto &m : sp.marginals) {
        for (double &x : m) x /= G;
        normalize3(m);
      }
      break;
    }
    case MarkovOrder::First: {
      sp.pi = {0.0, 0.0, 0.0};
      for (const auto &gp : post)
        for (int i = 0; i < 3; ++i)
          sp.pi[static_cast<std::size_t>(i)] += gp.state_marginals[3 + static_cast<std::size_t>(i)];
      for (double &x : sp.pi) x /= G;
      normalize3(sp.pi);
      sp.transitions.assign(T - 2, TransitionMatrix{});
      for (std::size_t pd = 0; pd + 2 < T; ++pd) {
        std::array<std::array<double, 3>, 3> joint{};
        for (const auto &gp : post)
          for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
              joint[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] +=
                  gp.pairwise[pd * 9 + static_cast<std::size_t>(i) * 3 +
                              static_cast<std::size_t>(j)];
        for (int i = 0; i < 3; ++i) {
          StateProb row{joint[static_cast<std::size_t>(i)][0] / G,
                        joint[static_cast<std::size_t>(i)][1] / G,
                        joint[static_cast<std::size_t>(i)][2] / G};
          normalize3(row);
          sp.transitions[pd][static_cast<std::size_t>(i)] = row;
        }
      }
      break;
    }
    case MarkovOrder::Full: {
      const std::size_t P = post.front().path_probs.size();
      sp.path_probs.assign(P, 0.0);
      for (const auto &gp : post)
        for (std::size_t i = 0; i < P; ++i) sp.path_probs[i] += gp.path_probs[i];
      double z = 0.0;
      for (double v : sp.path_probs) z += v;
      for (double &v : sp.path_probs) v /= z;
      break;
    }
  }
  sp.validate();
  return sp;
}

namespace detail {

struct MeanCell {
  double eta, tau;
};

// Expected complete-data objective for one direction at one period:
// sum_g w_g * log f_dir(d_g; eta, tau). Directions decouple, so each cell is
// a 2-D maximization of its own weighted component log-density.
inline double weighted_component_loglik(const std::vector<double> &d,
                                        const std::vector<double> &w, double s2,
                                        const MeanCell &cell, double sign) {
  double q = 0.0;
  for (std::size_t g = 0; g < d.size(); ++g)
    if (w[g] > 0.0)
      q += w[g] * log_signed_increment_density(d[g], cell.eta, cell.tau, s2, sign);
  return q;
}

// Shared bounded warm-started maximization; returns the improved cell (or the
// start if no improvement was found).
inline MeanCell optimize_mean_cell(const std::vector<double> &d, const std::vector<double> &w,
                                   double s2, MeanCell start, double sign) {
  const double before = weighted_component_loglik(d, w, s2, start, sign);
  const auto neg = [&](const std::array<double, 2> &x) {
    if (std::fabs(x[0]) > 30.0 || x[1] < std::log(1e-3) || x[1] > std::log(100.0))
      return std::numeric_limits<double>::infinity();
    return -weighted_component_loglik(d, w, s2, MeanCell{x[0], std::exp(x[1])}, sign);
  };
  const auto res =
      math::nelder_mead_2d(neg, {start.eta, std::log(start.tau)}, {0.25, 0.25}, 1e-9, 160);
  if (-res.f > before) return {res.x[0], std::exp(res.x[1])};
  return start;
}

}  // namespace detail

/// Mean-level M-step: per period and direction, bounded 2-D maximization of
/// the posterior-weighted pairwise objective, warm-started from the current
/// values and accepted only on improvement.
inline MeanLevelParams m_step_mean(const SufficientStats &stats,
                                   const std::vector<GenePosterior> &post,
                                   const ModelParams &current) {
  const std::size_t T = stats.T;
  const std::size_t G = stats.G;
  MeanLevelParams out = current.mean;
  const double weight_floor = 1e-6 * static_cast<double>(G);

  std::vector<double> d(G), w_up(G), w_down(G);
  for (std::size_t pd = 0; pd < T - 1; ++pd) {
    const std::size_t t = pd + 2;  // 1-based time the period ends at
    const double s2 = current.obs.sigma2 * (1.0 / static_cast<double>(stats.n[pd]) +
                                            1.0 / static_cast<double>(stats.n[pd + 1]));
    double wu_total = 0.0, wd_total = 0.0;
    for (std::size_t g = 0; g < G; ++g) {
      const double *row = stats.centered_row(g);
      d[g] = row[pd + 1] - row[pd];
      w_up[g] = post[g].state_marginals[(t - 1) * 3 + 1];
      w_down[g] = post[g].state_marginals[(t - 1) * 3 + 2];
      wu_total += w_up[g];
      wd_total += w_down[g];
    }
    if (wu_total >= weight_floor) {
      const detail::MeanCell up = detail::optimize_mean_cell(
          d, w_up, s2, {out.eta_up[pd], out.tau_up[pd]}, +1.0);
      out.eta_up[pd] = up.eta;
      out.tau_up[pd] = up.tau;
    }
    if (wd_total >= weight_floor) {
      const detail::MeanCell down = detail::optimize_mean_cell(
          d, w_down, s2, {out.eta_down[pd], out.tau_down[pd]}, -1.0);
      out.eta_down[pd] = down.eta;
      out.tau_down[pd] = down.tau;
    }
  }
  out.validate();
  return out;
}

namespace detail {

inline ModelParams perturb_params(const ModelParams &base, std::uint64_t seed) {
  ModelParams p = base;
  math::Rng rng(seed);
  for (std::size_t i = 0; i < p.mean.periods(); ++i) {
    p.mean.eta_up[i] += rng.uniform(-0.5, 0.5);
    p.mean.eta_down[i] += rng.uniform(-0.5, 0.5);
    p.mean.tau_up[i] *= std::exp(rng.uniform(-0.5, 0.5));
    p.mean.tau_down[i] *= std::exp(rng.uniform(-0.5, 0.5));
  }
  return p;
}

}  // namespace detail

/// Full EM fit. Posteriors in the report correspond to the returned
/// parameters. Every accepted step is nondecreasing in observed-data
/// log-likelihood (within mono_slack): the state-level update is a proper EM
/// M-step, and the composite mean-level update is only kept when it does not
/// hurt — otherwise the iteration falls back to the state-only update.
inline FitReport fit(const ExpressionDataset &ds, MarkovOrder order,
                     const FitConfig &config = {}) {
  if (config.max_iters < 1) throw std::invalid_argument("fit: max_iters must be >= 1");
  if (!(config.rel_tol > 0.0)) throw std::invalid_argument("fit: rel_tol must be > 0");
  const SufficientStats stats = compute_sufficient_stats(ds);
  const ObservationParams obs = estimate_sigma2(stats);

  const auto run_from = [&](const ModelParams &init) {
    FitReport rep;
    rep.params = init;
    rep.params.obs = obs;  // plug-in, held fixed
    rep.posteriors = e_step(stats, rep.params, config.threads);
    double ll = total_log_likelihood(rep.posteriors);
    rep.log_lik_trace.push_back(ll);
    int consecutive_rejections = 0;
    for (int iter = 1; iter <= config.max_iters; ++iter) {
      rep.iterations = iter;
      ModelParams candidate = rep.params;
      candidate.state = m_step_state(rep.posteriors, order, stats.T);
      const bool try_mean = !rep.mean_updates_frozen;
      if (try_mean) candidate.mean = m_step_mean(stats, rep.posteriors, rep.params);

      std::vector<GenePosterior> post = e_step(stats, candidate, config.threads);
      double new_ll = total_log_likelihood(post);
      if (try_mean && new_ll < ll - config.mono_slack) {
        // Composite mean update hurt; redo the iteration state-only.
        candidate.mean = rep.params.mean;
        post = e_step(stats, candidate, config.threads);
        new_ll = total_log_likelihood(post);
        ++rep.mean_step_rejections;
        if (++consecutive_rejections >= 2) rep.mean_updates_frozen = true;
      } else if (try_mean) {
        consecutive_rejections = 0;
      }
      if (new_ll < ll - config.mono_slack)
        throw std::runtime_error(
            "fit: log-likelihood decreased beyond slack at iteration " +
            std::to_string(iter) + " (" + std::to_string(ll) + " -> " +
            std::to_string(new_ll) + ")");
      rep.params = std::move(candidate);
      rep.posteriors = std::move(post);
      rep.log_lik_trace.push_back(new_ll);
      if (std::fabs(new_ll - ll) < config.rel_tol * std::fabs(ll)) {
        rep.converged = true;
        return rep;
      }
      ll = new_ll;
    }
    rep.converged = false;
    return rep;
  };

  const ModelParams base = [&] {
    ModelParams p;
    p.obs = obs;
    p.mean = MeanLevelParams::constant(stats.T - 1, 1.0, 1.0, -1.0, 1.0);
    p.state = default_state_params(order, stats.T);
    return p;
  }();

  FitReport best = run_from(base);
  for (int k = 1; k <= config.multi_start; ++k) {
    FitReport alt = run_from(detail::perturb_params(base, math::derive_seed(config.multi_start_seed, static_cast<std::uint64_t>(k))));
    if (alt.log_lik_trace.back() > best.log_lik_trace.back()) best = std::move(alt);
  }
  return best;
}

/// Total log f(x) of a dataset under fixed params (held-out evaluation).
inline double log_marginal_likelihood(const ExpressionDataset &ds, const ModelParams &params,
                                      int threads = 1) {
  const SufficientStats stats = compute_sufficient_stats(ds);
  return total_log_likelihood(e_step(stats, params, threads));
}

}  // namespace statepath
