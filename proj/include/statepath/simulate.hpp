#pragma once

// Generative sampling from the model: state series, then latent mean series,
// then observed expression levels. Each gene draws from its own counter-based
// subseed, so output is bit-exact for a given (seed, params, G, design)
// regardless of threading or gene count elsewhere.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "statepath/dataset.hpp"
#include "statepath/math/rng.hpp"
#include "statepath/params.hpp"
#include "statepath/state_path.hpp"

namespace statepath {

struct SimulationTruth {
  std::vector<StatePath> true_paths;
  std::vector<double> true_means;  // G x T row-major latent mean curves
  std::uint64_t seed = 0;
  ModelParams params_used;
};

struct SimulationConfig {
  double first_level_mean = 7.0;  // latent mean at the first time point
  double first_level_sd = 2.0;
};

namespace detail {

inline StatePath draw_path(math::Rng &rng, const StateLevelParams &sp) {
  StatePath path;
  path.states.assign(sp.T, State::Start);
  switch (sp.order) {
    case MarkovOrder::Zero:
      for (std::size_t t = 2; t <= sp.T; ++t)
        path.states[t - 1] = state_from_digit(
            static_cast<int>(rng.categorical(sp.marginals[t - 2].data(), 3)));
      break;
    case MarkovOrder::First: {
      int prev = static_cast<int>(rng.categorical(sp.pi.data(), 3));
      path.states[1] = state_from_digit(prev);
      for (std::size_t t = 3; t <= sp.T; ++t) {
        prev = static_cast<int>(rng.categorical(
            sp.transitions[t - 3][static_cast<std::size_t>(prev)].data(), 3));
        path.states[t - 1] = state_from_digit(prev);
      }
      break;
    }
    case MarkovOrder::Full: {
      const std::size_t idx = rng.categorical(sp.path_probs.data(), sp.path_probs.size());
      path = path_from_index(sp.T, idx);
      break;
    }
  }
  return path;
}

}  // namespace detail

inline std::string make_gene_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "gene_%06zu", index + 1);
  return std::string(buf);
}

inline std::pair<ExpressionDataset, SimulationTruth> simulate_dataset(
    const ModelParams &params, std::size_t G, const Design &design, std::uint64_t seed,
    const SimulationConfig &config = {}) {
  params.validate();
  if (G < 1) throw std::invalid_argument("simulate_dataset: G must be >= 1");
  if (params.state.T != design.T)
    throw std::invalid_argument("simulate_dataset: params/design time-point mismatch");
  if (!(config.first_level_sd >= 0.0))
    throw std::invalid_argument("simulate_dataset: first_level_sd must be >= 0");

  const std::size_t T = design.T;
  const std::size_t cols = design.total_columns();
  const double sigma = std::sqrt(params.obs.sigma2);

  ExpressionDataset ds;
  ds.design = design;
  ds.gene_ids.reserve(G);
  ds.values.resize(G * cols);
  SimulationTruth truth;
  truth.true_paths.reserve(G);
  truth.true_means.resize(G * T);
  truth.seed = seed;
  truth.params_used = params;

  for (std::size_t g = 0; g < G; ++g) {
    ds.gene_ids.push_back(make_gene_id(g));
    math::Rng rng(math::derive_seed(seed, g));
    StatePath path = detail::draw_path(rng, params.state);

    double *mu = &truth.true_means[g * T];
    mu[0] = rng.normal(config.first_level_mean, config.first_level_sd);
    for (std::size_t t = 2; t <= T; ++t) {
      const std::size_t pd = t - 2;
      double delta = 0.0;
      switch (path.at_time(t)) {
        case State::Same:
          break;  // exactly zero, no variates consumed
        case State::Up:
          delta = rng.truncated_normal_above(0.0, params.mean.eta_up[pd],
                                             params.mean.tau_up[pd]);
          break;
        case State::Down:
          delta = rng.truncated_normal_below(0.0, params.mean.eta_down[pd],
                                             params.mean.tau_down[pd]);
          break;
        case State::Start:
          throw std::logic_error("simulate_dataset: Start state after t=1");
      }
      mu[t - 1] = mu[t - 2] + delta;
    }

    double *row = &ds.values[g * cols];
    for (std::size_t t = 1; t <= T; ++t)
      for (std::size_t k = 0; k < design.n[t - 1]; ++k)
        row[design.column_offset(t) + k] = rng.normal(mu[t - 1], sigma);
    truth.true_paths.push_back(std::move(path));
  }
  return {std::move(ds), std::move(truth)};
}

/// Convenience: first-order Markov state parameters and mean-level defaults
/// used throughout the simulation studies (T=4).
inline ModelParams default_simulation_params() {
  ModelParams p;
  p.obs.sigma2 = 0.35 * 0.35;
  p.mean = MeanLevelParams::constant(3, 1.2, 0.6, -1.2, 0.6);
  p.state = canonical_first_order_params(4);
  p.validate();
  return p;
}

}  // namespace statepath
