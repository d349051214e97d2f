#pragma once

// Posterior decoding and downstream summaries: per-time (MMP) and joint (MJP)
// optimal paths, conditional FDR estimates over the called sets, clustering by
// optimal path, and posterior mean curves for the latent centered means.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "statepath/em.hpp"
#include "statepath/likelihood.hpp"
#include "statepath/params.hpp"
#include "statepath/state_path.hpp"
#include "statepath/util/parallel.hpp"

namespace statepath {

enum class CallCriterion { MMP, MJP };

inline const char *call_criterion_name(CallCriterion c) {
  return c == CallCriterion::MMP ? "mmp" : "mjp";
}

inline CallCriterion call_criterion_from_name(const std::string &name) {
  if (name == "mmp") return CallCriterion::MMP;
  if (name == "mjp") return CallCriterion::MJP;
  throw std::invalid_argument("unknown call criterion: " + name);
}

struct GeneCall {
  StatePath path;
  bool tde = false;                // any non-Same state in the path
  std::vector<bool> tde_per_time;  // over t = 2..T
};

struct ClusterEntry {
  std::size_t path_index = 0;
  std::string path_string;
  std::vector<std::size_t> genes;  // indices into the call set's gene order
};

struct CallSet {
  CallCriterion criterion = CallCriterion::MMP;
  std::size_t T = 0;
  std::vector<GeneCall> calls;
  // Conditional FDR over the called sets; absent when no gene is called.
  std::vector<std::optional<double>> fdr_per_time;  // over t = 2..T
  std::optional<double> fdr_overall;
  std::vector<ClusterEntry> clusters;
};

namespace detail {

inline GeneCall make_call(StatePath path) {
  GeneCall c;
  c.tde_per_time.reserve(path.periods());
  bool any = false;
  for (std::size_t t = 2; t <= path.time_points(); ++t) {
    const bool tde = is_tde(path.at_time(t));
    c.tde_per_time.push_back(tde);
    any = any || tde;
  }
  c.tde = any;
  c.path = std::move(path);
  return c;
}

}  // namespace detail

/// Optimal state at each time point separately: argmax of the marginal
/// posterior row, ties broken Same > Up > Down.
inline CallSet call_mmp(const std::vector<GenePosterior> &posteriors) {
  if (posteriors.empty()) throw std::invalid_argument("call_mmp: no posteriors");
  CallSet cs;
  cs.criterion = CallCriterion::MMP;
  cs.T = posteriors.front().state_marginals.size() / 3;
  cs.calls.reserve(posteriors.size());
  for (const auto &gp : posteriors) {
    StatePath path;
    path.states.assign(cs.T, State::Start);
    for (std::size_t t = 2; t <= cs.T; ++t) {
      int best = 0;
      double best_p = gp.state_marginals[(t - 1) * 3];
      for (int i = 1; i < 3; ++i) {
        const double p = gp.state_marginals[(t - 1) * 3 + static_cast<std::size_t>(i)];
        if (p > best_p) {
          best_p = p;
          best = i;
        }
      }
      path.states[t - 1] = state_from_digit(best);
    }
    cs.calls.push_back(detail::make_call(std::move(path)));
  }
  return cs;
}

/// Optimal full path: argmax of the joint posterior, ties broken by canonical
/// path index (lower wins).
inline CallSet call_mjp(const std::vector<GenePosterior> &posteriors) {
  if (posteriors.empty()) throw std::invalid_argument("call_mjp: no posteriors");
  CallSet cs;
  cs.criterion = CallCriterion::MJP;
  cs.T = posteriors.front().state_marginals.size() / 3;
  cs.calls.reserve(posteriors.size());
  for (const auto &gp : posteriors) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < gp.path_probs.size(); ++i)
      if (gp.path_probs[i] > gp.path_probs[best]) best = i;
    cs.calls.push_back(detail::make_call(path_from_index(cs.T, best)));
  }
  return cs;
}

/// Conditional FDR over the called sets (averages of posterior Same
/// probabilities); per-time over genes called TDE at t, overall over genes
/// called TDE anywhere using the all-Same-path posterior probability.
inline CallSet estimate_fdr(CallSet cs, const std::vector<GenePosterior> &posteriors) {
  if (cs.calls.size() != posteriors.size())
    throw std::invalid_argument("estimate_fdr: call/posterior size mismatch");
  cs.fdr_per_time.assign(cs.T - 1, std::nullopt);
  for (std::size_t t = 2; t <= cs.T; ++t) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t g = 0; g < cs.calls.size(); ++g) {
      if (!cs.calls[g].tde_per_time[t - 2]) continue;
      sum += posteriors[g].state_marginals[(t - 1) * 3];  // Pr(Same at t | x)
      ++count;
    }
    if (count > 0) cs.fdr_per_time[t - 2] = sum / static_cast<double>(count);
  }
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t g = 0; g < cs.calls.size(); ++g) {
    if (!cs.calls[g].tde) continue;
    sum += posteriors[g].path_probs[0];  // all-Same path is index 0
    ++count;
  }
  cs.fdr_overall = count > 0 ? std::optional<double>(sum / static_cast<double>(count))
                             : std::nullopt;
  return cs;
}

/// Partition genes by optimal path, largest cluster first (ties: lower path
/// index first).
inline std::vector<ClusterEntry> cluster_by_path(const CallSet &cs) {
  std::vector<std::vector<std::size_t>> buckets(path_count(cs.T));
  for (std::size_t g = 0; g < cs.calls.size(); ++g)
    buckets[path_to_index(cs.calls[g].path)].push_back(g);
  std::vector<ClusterEntry> table;
  for (std::size_t i = 0; i < buckets.size(); ++i) {
    if (buckets[i].empty()) continue;
    ClusterEntry e;
    e.path_index = i;
    e.path_string = path_to_string(path_from_index(cs.T, i));
    e.genes = std::move(buckets[i]);
    table.push_back(std::move(e));
  }
  std::stable_sort(table.begin(), table.end(), [](const ClusterEntry &a, const ClusterEntry &b) {
    if (a.genes.size() != b.genes.size()) return a.genes.size() > b.genes.size();
    return a.path_index < b.path_index;
  });
  return table;
}

struct PosteriorCurve {
  std::vector<double> mean;      // posterior mean of the centered latent curve
  std::vector<double> variance;  // posterior variance, length T
};

/// Mixture of per-path conditional posteriors: mean is the probability-
/// weighted combination, variance by the law of total variance. Components
/// with probability <= skip_tol are skipped (moments[i] is not read) and the
/// remaining mass renormalized.
inline PosteriorCurve posterior_mean_curve(const GenePosterior &gp,
                                           const std::vector<PathConditionalResult> &moments,
                                           double skip_tol = 0.0) {
  if (moments.size() != gp.path_probs.size())
    throw std::invalid_argument("posterior_mean_curve: moments/path size mismatch");
  std::size_t T = 0;
  for (std::size_t i = 0; i < moments.size(); ++i)
    if (gp.path_probs[i] > skip_tol) {
      T = moments[i].post_mean.size();
      break;
    }
  if (T == 0) throw std::invalid_argument("posterior_mean_curve: no usable component");
  PosteriorCurve curve;
  curve.mean.assign(T, 0.0);
  curve.variance.assign(T, 0.0);
  double mass = 0.0;
  for (std::size_t i = 0; i < moments.size(); ++i) {
    const double p = gp.path_probs[i];
    if (!(p > skip_tol)) continue;
    mass += p;
    for (std::size_t t = 0; t < T; ++t) {
      const double m = moments[i].post_mean[t];
      curve.mean[t] += p * m;
      curve.variance[t] += p * (moments[i].post_var[t] + m * m);
    }
  }
  for (std::size_t t = 0; t < T; ++t) {
    curve.mean[t] /= mass;
    curve.variance[t] = std::max(0.0, curve.variance[t] / mass - curve.mean[t] * curve.mean[t]);
  }
  return curve;
}

/// Posterior mean curves for every gene, sharing one path engine.
inline std::vector<PosteriorCurve> compute_posterior_curves(
    const SufficientStats &stats, const ModelParams &params,
    const std::vector<GenePosterior> &posteriors, int threads = 1,
    double skip_tol = 1e-12) {
  if (posteriors.size() != stats.G)
    throw std::invalid_argument("compute_posterior_curves: posterior/stats size mismatch");
  const PathEngine engine(stats.n, params.obs, params.mean);
  std::vector<PosteriorCurve> curves(stats.G);
  util::parallel_for(stats.G, threads, [&](std::size_t g) {
    const GenePosterior &gp = posteriors[g];
    std::vector<PathConditionalResult> moments(gp.path_probs.size());
    for (std::size_t i = 0; i < gp.path_probs.size(); ++i)
      if (gp.path_probs[i] > skip_tol)
        moments[i] = engine.conditional_moments(stats.centered_row(g), i);
    curves[g] = posterior_mean_curve(gp, moments, skip_tol);
  });
  return curves;
}

}  // namespace statepath
