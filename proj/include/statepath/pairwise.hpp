#pragma once

// Pairwise baseline: each successive period is analyzed on its own using only
// the two adjacent time points — a local three-component mixture (no change /
// up / down) on the difference of sample means, with its own locally pooled
// variance. Period calls are therefore invariant to data at other time points.

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include "statepath/dataset.hpp"
#include "statepath/em.hpp"
#include "statepath/inference.hpp"
#include "statepath/likelihood.hpp"
#include "statepath/math/optimize.hpp"

namespace statepath {

struct PairwiseConfig {
  double rel_tol = 1e-6;
  int max_iters = 200;
};

namespace detail {

struct PairwisePeriodFit {
  std::array<double, 3> weights{};  // Same, Up, Down mixing proportions
  MeanCell up{1.0, 1.0}, down{-1.0, 1.0};
  std::vector<double> resp;  // G x 3 responsibilities
};

inline PairwisePeriodFit fit_pairwise_period(const std::vector<double> &d, double s2,
                                             const PairwiseConfig &config) {
  const std::size_t G = d.size();
  PairwisePeriodFit fit;
  fit.weights = {0.8, 0.1, 0.1};
  fit.resp.assign(G * 3, 0.0);
  std::vector<double> w_up(G), w_down(G);
  const double weight_floor = 1e-6 * static_cast<double>(G);

  double prev_ll = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < config.max_iters; ++iter) {
    double ll = 0.0;
    double totals[3] = {0.0, 0.0, 0.0};
    for (std::size_t g = 0; g < G; ++g) {
      double lw[3] = {std::log(fit.weights[0]) + log_same_increment_density(d[g], s2),
                      std::log(fit.weights[1]) +
                          log_signed_increment_density(d[g], fit.up.eta, fit.up.tau, s2, +1.0),
                      std::log(fit.weights[2]) + log_signed_increment_density(
                                                     d[g], fit.down.eta, fit.down.tau, s2, -1.0)};
      const double mx = std::max(lw[0], std::max(lw[1], lw[2]));
      double z = 0.0;
      for (int i = 0; i < 3; ++i) z += std::exp(lw[i] - mx);
      ll += mx + std::log(z);
      for (int i = 0; i < 3; ++i) {
        const double r = std::exp(lw[i] - mx) / z;
        fit.resp[g * 3 + static_cast<std::size_t>(i)] = r;
        totals[i] += r;
      }
      w_up[g] = fit.resp[g * 3 + 1];
      w_down[g] = fit.resp[g * 3 + 2];
    }
    if (ll < prev_ll - 1e-8 * std::max(1.0, std::fabs(prev_ll)))
      throw std::runtime_error("pairwise_baseline: mixture log-likelihood decreased");
    if (std::fabs(ll - prev_ll) < config.rel_tol * std::fabs(prev_ll)) break;
    prev_ll = ll;

    for (int i = 0; i < 3; ++i)
      fit.weights[static_cast<std::size_t>(i)] = totals[i] / static_cast<double>(G);
    if (totals[1] >= weight_floor) fit.up = optimize_mean_cell(d, w_up, s2, fit.up, +1.0);
    if (totals[2] >= weight_floor) fit.down = optimize_mean_cell(d, w_down, s2, fit.down, -1.0);
  }
  return fit;
}

}  // namespace detail

inline CallSet pairwise_baseline(const ExpressionDataset &ds, const PairwiseConfig &config = {}) {
  const Design &design = ds.design;
  const std::size_t G = ds.gene_count();
  const std::size_t T = design.T;
  if (G == 0) throw std::invalid_argument("pairwise_baseline: empty dataset");

  CallSet cs;
  cs.criterion = CallCriterion::MMP;
  cs.T = T;
  cs.calls.resize(G);
  for (auto &c : cs.calls) {
    c.path.states.assign(T, State::Start);
    c.tde_per_time.assign(T - 1, false);
  }

  std::vector<double> d(G);
  for (std::size_t pd = 0; pd < T - 1; ++pd) {
    const std::size_t n1 = design.n[pd], n2 = design.n[pd + 1];
    const std::size_t df = G * (n1 + n2 - 2);
    double ss = 0.0;
    for (std::size_t g = 0; g < G; ++g) {
      const double *row = ds.row(g);
      double m1 = 0.0, m2 = 0.0;
      for (std::size_t k = 0; k < n1; ++k) m1 += row[design.column_offset(pd + 1) + k];
      for (std::size_t k = 0; k < n2; ++k) m2 += row[design.column_offset(pd + 2) + k];
      m1 /= static_cast<double>(n1);
      m2 /= static_cast<double>(n2);
      d[g] = m2 - m1;
      for (std::size_t k = 0; k < n1; ++k) {
        const double r = row[design.column_offset(pd + 1) + k] - m1;
        ss += r * r;
      }
      for (std::size_t k = 0; k < n2; ++k) {
        const double r = row[design.column_offset(pd + 2) + k] - m2;
        ss += r * r;
      }
    }
    if (df == 0)
      throw std::invalid_argument(
          "pairwise_baseline: no replication at time points " + std::to_string(pd + 1) +
          "/" + std::to_string(pd + 2));
    const double sigma2 = ss / static_cast<double>(df);
    if (!(sigma2 > 0.0))
      throw std::invalid_argument("pairwise_baseline: zero local variance at period " +
                                  std::to_string(pd + 1));
    const double s2 = sigma2 * (1.0 / static_cast<double>(n1) + 1.0 / static_cast<double>(n2));

    const detail::PairwisePeriodFit fit = detail::fit_pairwise_period(d, s2, config);
    for (std::size_t g = 0; g < G; ++g) {
      int best = 0;
      double best_r = fit.resp[g * 3];
      for (int i = 1; i < 3; ++i)
        if (fit.resp[g * 3 + static_cast<std::size_t>(i)] > best_r) {
          best_r = fit.resp[g * 3 + static_cast<std::size_t>(i)];
          best = i;
        }
      cs.calls[g].path.states[pd + 1] = state_from_digit(best);
      cs.calls[g].tde_per_time[pd] = best != 0;
    }
  }
  for (auto &c : cs.calls) {
    bool any = false;
    for (bool b : c.tde_per_time) any = any || b;
    c.tde = any;
  }
  return cs;
}

}  // namespace statepath
