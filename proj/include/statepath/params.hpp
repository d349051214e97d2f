#pragma once

// Model parameters: observation variance, per-period truncated-normal mean
// level, and the state-level prior at zero, first, or full Markov order.
// Probability vectors are indexed by state digit (Same=0, Up=1, Down=2).

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "statepath/state_path.hpp"

namespace statepath {

struct ObservationParams {
  double sigma2 = 1.0;

  void validate() const {
    if (!(sigma2 > 0.0)) throw std::invalid_argument("ObservationParams: sigma2 must be > 0");
  }
};

/// Pre-truncation location/scale per period and direction. Periods are
/// indexed 0..T-2 for transitions into t = 2..T. Up increments live on
/// (0, inf), Down increments on (-inf, 0); eta is unconstrained in sign.
struct MeanLevelParams {
  std::vector<double> eta_up, tau_up;
  std::vector<double> eta_down, tau_down;

  std::size_t periods() const { return eta_up.size(); }

  static MeanLevelParams constant(std::size_t periods, double eta_u, double tau_u,
                                  double eta_d, double tau_d) {
    MeanLevelParams m;
    m.eta_up.assign(periods, eta_u);
    m.tau_up.assign(periods, tau_u);
    m.eta_down.assign(periods, eta_d);
    m.tau_down.assign(periods, tau_d);
    return m;
  }

  double eta(std::size_t period, State d) const {
    return d == State::Up ? eta_up[period] : eta_down[period];
  }
  double tau(std::size_t period, State d) const {
    return d == State::Up ? tau_up[period] : tau_down[period];
  }

  void validate() const {
    const std::size_t p = periods();
    if (tau_up.size() != p || eta_down.size() != p || tau_down.size() != p)
      throw std::invalid_argument("MeanLevelParams: ragged period vectors");
    for (std::size_t i = 0; i < p; ++i) {
      if (!(tau_up[i] > 0.0) || !(tau_down[i] > 0.0))
        throw std::invalid_argument("MeanLevelParams: tau must be > 0");
      if (!std::isfinite(eta_up[i]) || !std::isfinite(eta_down[i]))
        throw std::invalid_argument("MeanLevelParams: eta must be finite");
    }
  }
};

enum class MarkovOrder { Zero, First, Full };

inline const char *markov_order_name(MarkovOrder o) {
  switch (o) {
    case MarkovOrder::Zero: return "zero";
    case MarkovOrder::First: return "first";
    case MarkovOrder::Full: return "full";
  }
  throw std::invalid_argument("markov_order_name: bad order");
}

inline MarkovOrder markov_order_from_name(const std::string &s) {
  if (s == "zero") return MarkovOrder::Zero;
  if (s == "first") return MarkovOrder::First;
  if (s == "full") return MarkovOrder::Full;
  throw std::invalid_argument("unknown order '" + s + "' (expected zero|first|full)");
}

using StateProb = std::array<double, 3>;         // indexed by state digit
using TransitionMatrix = std::array<StateProb, 3>;

struct StateLevelParams {
  MarkovOrder order = MarkovOrder::First;
  std::size_t T = 0;

  // Zero: independent per-period marginals, size T-1.
  std::vector<StateProb> marginals;
  // First: initial distribution at t=2 plus transitions for t=3..T (size T-2).
  StateProb pi{};
  std::vector<TransitionMatrix> transitions;
  // Full: unrestricted joint over all 3^(T-1) paths in canonical order.
  std::vector<double> path_probs;

  static constexpr double kSumTol = 1e-12;

  static void check_prob_vector(const double *p, std::size_t k, const char *what) {
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      if (!(p[i] >= 0.0 && p[i] <= 1.0 + kSumTol))
        throw std::invalid_argument(std::string(what) + ": entry outside [0,1]");
      s += p[i];
    }
    if (std::fabs(s - 1.0) > 1e-10)
      throw std::invalid_argument(std::string(what) + ": probabilities sum to " +
                                  std::to_string(s));
  }

  void validate() const {
    if (T < 2) throw std::invalid_argument("StateLevelParams: T must be >= 2");
    switch (order) {
      case MarkovOrder::Zero:
        if (marginals.size() != T - 1)
          throw std::invalid_argument("StateLevelParams: need T-1 marginal vectors");
        for (const auto &m : marginals) check_prob_vector(m.data(), 3, "marginal");
        break;
      case MarkovOrder::First:
        check_prob_vector(pi.data(), 3, "pi");
        if (transitions.size() != T - 2)
          throw std::invalid_argument("StateLevelParams: need T-2 transition matrices");
        for (const auto &tm : transitions)
          for (const auto &row : tm) check_prob_vector(row.data(), 3, "transition row");
        break;
      case MarkovOrder::Full:
        if (path_probs.size() != path_count(T))
          throw std::invalid_argument("StateLevelParams: need 3^(T-1) path probabilities");
        check_prob_vector(path_probs.data(), path_probs.size(), "path_probs");
        break;
    }
  }
};

struct ModelParams {
  ObservationParams obs;
  MeanLevelParams mean;
  StateLevelParams state;

  void validate() const {
    obs.validate();
    mean.validate();
    state.validate();
    if (mean.periods() != state.T - 1)
      throw std::invalid_argument("ModelParams: mean-level period count mismatch");
  }
};

inline double prior_path_probability(const StatePath &path, const StateLevelParams &sp) {
  path.validate();
  if (path.time_points() != sp.T)
    throw std::invalid_argument("prior_path_probability: path length mismatch");
  switch (sp.order) {
    case MarkovOrder::Zero: {
      double p = 1.0;
      for (std::size_t t = 2; t <= sp.T; ++t)
        p *= sp.marginals[t - 2][state_digit(path.at_time(t))];
      return p;
    }
    case MarkovOrder::First: {
      double p = sp.pi[state_digit(path.at_time(2))];
      for (std::size_t t = 3; t <= sp.T; ++t)
        p *= sp.transitions[t - 3][state_digit(path.at_time(t - 1))]
                            [state_digit(path.at_time(t))];
      return p;
    }
    case MarkovOrder::Full:
      return sp.path_probs[path_to_index(path)];
  }
  throw std::invalid_argument("prior_path_probability: bad order");
}

inline double log_prior_path_probability(const StatePath &path, const StateLevelParams &sp) {
  const double p = prior_path_probability(path, sp);
  return (p > 0.0) ? std::log(p) : -std::numeric_limits<double>::infinity();
}

/// The first-order parameters reported for the motivating experiment, used
/// as the default simulation truth (indexed Same, Up, Down).
inline StateLevelParams canonical_first_order_params(std::size_t T = 4) {
  if (T != 4) throw std::invalid_argument("canonical_first_order_params: defined for T=4");
  StateLevelParams sp;
  sp.order = MarkovOrder::First;
  sp.T = 4;
  sp.pi = {0.88, 0.04, 0.08};
  TransitionMatrix t3;
  t3[0] = {1.00, 0.00, 0.00};  // from Same
  t3[1] = {0.23, 0.09, 0.68};  // from Up
  t3[2] = {0.28, 0.72, 0.00};  // from Down
  TransitionMatrix t4;
  t4[0] = {1.00, 0.00, 0.00};
  t4[1] = {0.51, 0.33, 0.16};
  t4[2] = {0.82, 0.00, 0.18};
  sp.transitions = {t3, t4};
  return sp;
}

}  // namespace statepath
