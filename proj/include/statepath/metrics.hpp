#pragma once

// State-level evaluation against simulation truth (sensitivity, specificity,
// realized FDR, misclassification rates), mean-level MSE comparison, and the
// replicated benchmark harness over the competing methods.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "statepath/dataset.hpp"
#include "statepath/em.hpp"
#include "statepath/inference.hpp"
#include "statepath/pairwise.hpp"
#include "statepath/simulate.hpp"
#include "statepath/state_path.hpp"

namespace statepath {

struct PeriodMetrics {
  // Rates with an empty denominator are reported as absent, never as 0/0.
  std::optional<double> sensitivity;  // TDE truths called TDE
  std::optional<double> specificity;  // TNDE truths called TNDE
  std::optional<double> fdr_realized; // TNDE truths among TDE calls
  double mr = 0.0;                    // exact state mismatches / G
};

struct CallMetrics {
  std::vector<PeriodMetrics> periods;  // over t = 2..T
  double smr = 0.0;                    // full-series mismatches / G
};

inline CallMetrics evaluate_calls(const SimulationTruth &truth, const CallSet &cs) {
  const std::size_t G = truth.true_paths.size();
  if (G == 0 || cs.calls.size() != G)
    throw std::invalid_argument("evaluate_calls: truth/call gene sets differ");
  const std::size_t T = cs.T;
  if (truth.true_paths.front().time_points() != T)
    throw std::invalid_argument("evaluate_calls: truth/call time points differ");

  CallMetrics m;
  m.periods.resize(T - 1);
  std::size_t series_wrong = 0;
  for (std::size_t pd = 0; pd < T - 1; ++pd) {
    std::size_t tde_truth = 0, tnde_truth = 0, tde_calls = 0;
    std::size_t true_pos = 0, true_neg = 0, false_pos = 0, wrong = 0;
    for (std::size_t g = 0; g < G; ++g) {
      const State truth_s = truth.true_paths[g].at_time(pd + 2);
      const State call_s = cs.calls[g].path.at_time(pd + 2);
      const bool truth_tde = is_tde(truth_s);
      const bool call_tde = is_tde(call_s);
      tde_truth += truth_tde;
      tnde_truth += !truth_tde;
      tde_calls += call_tde;
      true_pos += truth_tde && call_tde;
      true_neg += !truth_tde && !call_tde;
      false_pos += !truth_tde && call_tde;
      wrong += call_s != truth_s;
    }
    PeriodMetrics &p = m.periods[pd];
    if (tde_truth > 0)
      p.sensitivity = static_cast<double>(true_pos) / static_cast<double>(tde_truth);
    if (tnde_truth > 0)
      p.specificity = static_cast<double>(true_neg) / static_cast<double>(tnde_truth);
    if (tde_calls > 0)
      p.fdr_realized = static_cast<double>(false_pos) / static_cast<double>(tde_calls);
    p.mr = static_cast<double>(wrong) / static_cast<double>(G);
  }
  for (std::size_t g = 0; g < G; ++g)
    series_wrong += !(cs.calls[g].path == truth.true_paths[g]);
  m.smr = static_cast<double>(series_wrong) / static_cast<double>(G);
  return m;
}

struct MseComparison {
  double posterior_mean = 0.0;  // MSE of posterior mean curves
  double sample_mean = 0.0;     // MSE of centered sample-mean curves
};

/// Both estimators target the same latent quantity: the true mean curve
/// centered at the observed first-time sample mean.
inline MseComparison mean_level_mse(const SufficientStats &stats, const SimulationTruth &truth,
                                    const std::vector<PosteriorCurve> &curves) {
  if (truth.true_means.size() != stats.G * stats.T || curves.size() != stats.G)
    throw std::invalid_argument("mean_level_mse: size mismatch");
  MseComparison out;
  for (std::size_t g = 0; g < stats.G; ++g) {
    const double center = stats.mean_row(g)[0];
    for (std::size_t t = 0; t < stats.T; ++t) {
      const double target = truth.true_means[g * stats.T + t] - center;
      const double em = curves[g].mean[t] - target;
      const double es = stats.centered_row(g)[t] - target;
      out.posterior_mean += em * em;
      out.sample_mean += es * es;
    }
  }
  const double denom = static_cast<double>(stats.G * stats.T);
  out.posterior_mean /= denom;
  out.sample_mean /= denom;
  return out;
}

enum class BenchmarkMethod { FirstOrder, ZeroOrder, Pairwise };

inline const char *benchmark_method_name(BenchmarkMethod m) {
  switch (m) {
    case BenchmarkMethod::FirstOrder: return "first";
    case BenchmarkMethod::ZeroOrder: return "zero";
    case BenchmarkMethod::Pairwise: return "pairwise";
  }
  return "?";
}

inline BenchmarkMethod benchmark_method_from_name(const std::string &name) {
  if (name == "first") return BenchmarkMethod::FirstOrder;
  if (name == "zero") return BenchmarkMethod::ZeroOrder;
  if (name == "pairwise") return BenchmarkMethod::Pairwise;
  throw std::invalid_argument("unknown benchmark method: " + name);
}

struct BenchmarkConfig {
  std::vector<BenchmarkMethod> methods = {BenchmarkMethod::FirstOrder,
                                          BenchmarkMethod::ZeroOrder,
                                          BenchmarkMethod::Pairwise};
  std::size_t replications = 10;
  std::size_t G = 4000;
  Design design{{4, 4, 4, 4}};
  ModelParams sim_params = default_simulation_params();
  SimulationConfig sim;
  std::uint64_t seed = 0;
  CallCriterion criterion = CallCriterion::MMP;
  FitConfig fit;
};

struct ReplicationRecord {
  std::size_t replication = 0;  // 1-based
  BenchmarkMethod method = BenchmarkMethod::FirstOrder;
  std::uint64_t dataset_seed = 0;
  CallMetrics metrics;
};

struct RateAggregate {
  std::optional<double> mean;
  double sd = 0.0;
  std::size_t count = 0;  // replications where the rate was defined
};

struct PeriodAggregate {
  RateAggregate sensitivity, specificity, fdr_realized, mr;
};

struct MethodAggregate {
  BenchmarkMethod method = BenchmarkMethod::FirstOrder;
  std::vector<PeriodAggregate> periods;
  RateAggregate smr;
};

struct BenchmarkResult {
  std::vector<MethodAggregate> methods;
  std::vector<ReplicationRecord> raw;
};

namespace detail {

inline RateAggregate aggregate_rate(const std::vector<std::optional<double>> &values) {
  RateAggregate agg;
  double sum = 0.0;
  for (const auto &v : values)
    if (v) {
      sum += *v;
      ++agg.count;
    }
  if (agg.count == 0) return agg;
  const double mean = sum / static_cast<double>(agg.count);
  agg.mean = mean;
  if (agg.count >= 2) {
    double ss = 0.0;
    for (const auto &v : values)
      if (v) ss += (*v - mean) * (*v - mean);
    agg.sd = std::sqrt(ss / static_cast<double>(agg.count - 1));
  }
  return agg;
}

}  // namespace detail

/// Replicated simulation benchmark: each replication simulates one dataset
/// (shared across methods for paired comparison), fits/decodes per method,
/// and evaluates against truth. Aggregates are across-replication mean and
/// sample standard deviation.
inline BenchmarkResult run_benchmark(const BenchmarkConfig &config) {
  if (config.replications < 1)
    throw std::invalid_argument("run_benchmark: replications must be >= 1");
  if (config.methods.empty()) throw std::invalid_argument("run_benchmark: no methods");
  const std::size_t periods = config.design.T - 1;

  BenchmarkResult result;
  for (std::size_t rep = 1; rep <= config.replications; ++rep) {
    const std::uint64_t rep_seed = math::derive_seed(config.seed, rep);
    try {
      const auto [ds, truth] = simulate_dataset(config.sim_params, config.G, config.design,
                                                rep_seed, config.sim);
      for (BenchmarkMethod method : config.methods) {
        CallSet cs;
        if (method == BenchmarkMethod::Pairwise) {
          cs = pairwise_baseline(ds);
        } else {
          const MarkovOrder order = method == BenchmarkMethod::FirstOrder
                                        ? MarkovOrder::First
                                        : MarkovOrder::Zero;
          const FitReport rep_fit = fit(ds, order, config.fit);
          cs = config.criterion == CallCriterion::MMP ? call_mmp(rep_fit.posteriors)
                                                      : call_mjp(rep_fit.posteriors);
        }
        result.raw.push_back({rep, method, rep_seed, evaluate_calls(truth, cs)});
      }
    } catch (const std::exception &e) {
      throw std::runtime_error("run_benchmark: replication " + std::to_string(rep) +
                               " (seed " + std::to_string(rep_seed) + ") failed: " + e.what());
    }
  }

  for (BenchmarkMethod method : config.methods) {
    MethodAggregate agg;
    agg.method = method;
    agg.periods.resize(periods);
    std::vector<std::optional<double>> smr_vals;
    for (const auto &rec : result.raw)
      if (rec.method == method) smr_vals.emplace_back(rec.metrics.smr);
    agg.smr = detail::aggregate_rate(smr_vals);
    for (std::size_t pd = 0; pd < periods; ++pd) {
      std::vector<std::optional<double>> sens, spec, fdr, mr;
      for (const auto &rec : result.raw) {
        if (rec.method != method) continue;
        sens.push_back(rec.metrics.periods[pd].sensitivity);
        spec.push_back(rec.metrics.periods[pd].specificity);
        fdr.push_back(rec.metrics.periods[pd].fdr_realized);
        mr.emplace_back(rec.metrics.periods[pd].mr);
      }
      agg.periods[pd].sensitivity = detail::aggregate_rate(sens);
      agg.periods[pd].specificity = detail::aggregate_rate(spec);
      agg.periods[pd].fdr_realized = detail::aggregate_rate(fdr);
      agg.periods[pd].mr = detail::aggregate_rate(mr);
    }
    result.methods.push_back(std::move(agg));
  }
  return result;
}

}  // namespace statepath
