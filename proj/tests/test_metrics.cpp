#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <string>
#include <vector>

#include "statepath/math/rng.hpp"
#include "statepath/metrics.hpp"

using namespace statepath;

namespace {

SimulationTruth truth_from_strings(const std::vector<std::string> &paths) {
  SimulationTruth t;
  for (const std::string &s : paths) t.true_paths.push_back(path_from_string(s));
  const std::size_t T = t.true_paths.front().time_points();
  t.true_means.assign(paths.size() * T, 0.0);
  return t;
}

CallSet calls_from_strings(const std::vector<std::string> &paths) {
  CallSet cs;
  cs.T = path_from_string(paths.front()).time_points();
  for (const std::string &s : paths) {
    GeneCall c;
    c.path = path_from_string(s);
    c.tde = c.path.is_tde_path();
    c.tde_per_time.clear();
    for (std::size_t t = 2; t <= cs.T; ++t)
      c.tde_per_time.push_back(is_tde(c.path.at_time(t)));
    cs.calls.push_back(std::move(c));
  }
  return cs;
}

}  // namespace

TEST_CASE("perfect calls score perfectly") {
  const std::vector<std::string> paths = {"uu", "ss", "ud", "ds"};
  const CallMetrics m = evaluate_calls(truth_from_strings(paths), calls_from_strings(paths));
  REQUIRE(m.periods.size() == 2);
  for (const PeriodMetrics &p : m.periods) {
    CHECK(p.sensitivity.value() == 1.0);
    CHECK(p.specificity.value() == 1.0);
    CHECK(p.fdr_realized.value() == 0.0);
    CHECK(p.mr == 0.0);
  }
  CHECK(m.smr == 0.0);
}

TEST_CASE("hand-worked confusion example") {
  const CallMetrics m = evaluate_calls(truth_from_strings({"uu", "ss", "ud", "ds"}),
                                       calls_from_strings({"uu", "us", "sd", "ds"}));
  // Period t2: truth TDE {g0,g2,g3}, calls TDE {g0,g1,g3}.
  CHECK(m.periods[0].sensitivity.value() == Catch::Approx(2.0 / 3.0));
  CHECK(m.periods[0].specificity.value() == 0.0);
  CHECK(m.periods[0].fdr_realized.value() == Catch::Approx(1.0 / 3.0));
  CHECK(m.periods[0].mr == Catch::Approx(0.5));
  // Period t3 is called exactly.
  CHECK(m.periods[1].sensitivity.value() == 1.0);
  CHECK(m.periods[1].specificity.value() == 1.0);
  CHECK(m.periods[1].fdr_realized.value() == 0.0);
  CHECK(m.periods[1].mr == 0.0);
  // Two of four gene series are wrong somewhere.
  CHECK(m.smr == Catch::Approx(0.5));
}

TEST_CASE("one wrong series out of four gives SMR 0.25") {
  const CallMetrics m = evaluate_calls(truth_from_strings({"sss", "uds", "sss", "dss"}),
                                       calls_from_strings({"sss", "uds", "sus", "dss"}));
  CHECK(m.smr == Catch::Approx(0.25));
}

TEST_CASE("empty denominators are reported absent, not zero") {
  // No TDE truths: sensitivity undefined; calls are all flat: realized FDR
  // undefined too.
  const CallMetrics none = evaluate_calls(truth_from_strings({"ss", "ss"}),
                                          calls_from_strings({"ss", "ss"}));
  CHECK_FALSE(none.periods[0].sensitivity.has_value());
  CHECK(none.periods[0].specificity.value() == 1.0);
  CHECK_FALSE(none.periods[0].fdr_realized.has_value());

  // All-TDE truths leave specificity undefined.
  const CallMetrics all = evaluate_calls(truth_from_strings({"uu", "du"}),
                                         calls_from_strings({"uu", "du"}));
  CHECK_FALSE(all.periods[0].specificity.has_value());
  CHECK(all.periods[0].sensitivity.value() == 1.0);
}

TEST_CASE("metrics agree with an independent recount on random pairs") {
  math::Rng rng(404);
  const std::size_t G = 1000, T = 4;
  std::vector<std::string> truth_s, call_s;
  const char alphabet[3] = {'s', 'u', 'd'};
  for (std::size_t g = 0; g < G; ++g) {
    std::string a, b;
    for (std::size_t p = 0; p + 1 < T; ++p) {
      a += alphabet[rng.uniform_int(3)];
      b += alphabet[rng.uniform_int(3)];
    }
    truth_s.push_back(a);
    call_s.push_back(b);
  }
  const CallMetrics m =
      evaluate_calls(truth_from_strings(truth_s), calls_from_strings(call_s));

  std::size_t series_mismatch = 0;
  for (std::size_t g = 0; g < G; ++g) series_mismatch += truth_s[g] != call_s[g];
  CHECK(m.smr == Catch::Approx(static_cast<double>(series_mismatch) / G));

  for (std::size_t p = 0; p + 1 < T; ++p) {
    std::size_t tde_truth = 0, tde_called_and_true = 0, tnde_truth = 0,
                tnde_called_and_true = 0, called = 0, false_calls = 0, mismatch = 0;
    for (std::size_t g = 0; g < G; ++g) {
      const bool truth_tde = truth_s[g][p] != 's';
      const bool call_tde = call_s[g][p] != 's';
      tde_truth += truth_tde;
      tnde_truth += !truth_tde;
      tde_called_and_true += truth_tde && call_tde;
      tnde_called_and_true += !truth_tde && !call_tde;
      called += call_tde;
      false_calls += call_tde && !truth_tde;
      mismatch += truth_s[g][p] != call_s[g][p];
    }
    CHECK(m.periods[p].sensitivity.value() ==
          Catch::Approx(static_cast<double>(tde_called_and_true) / static_cast<double>(tde_truth)));
    CHECK(m.periods[p].specificity.value() ==
          Catch::Approx(static_cast<double>(tnde_called_and_true) /
                        static_cast<double>(tnde_truth)));
    CHECK(m.periods[p].fdr_realized.value() ==
          Catch::Approx(static_cast<double>(false_calls) / static_cast<double>(called)));
    CHECK(m.periods[p].mr ==
          Catch::Approx(static_cast<double>(mismatch) / static_cast<double>(G)));
  }
}

TEST_CASE("evaluate_calls validates shapes") {
  CHECK_THROWS_AS(evaluate_calls(truth_from_strings({"uu"}), calls_from_strings({"uu", "ss"})),
                  std::invalid_argument);
  CHECK_THROWS_AS(evaluate_calls(truth_from_strings({"uus"}), calls_from_strings({"uu"})),
                  std::invalid_argument);
}

TEST_CASE("rate aggregation skips absent values and uses sample sd") {
  const RateAggregate agg =
      detail::aggregate_rate({0.2, std::nullopt, 0.4});
  CHECK(agg.count == 2);
  CHECK(agg.mean.value() == Catch::Approx(0.3));
  CHECK(agg.sd == Catch::Approx(std::sqrt(0.02)));

  const RateAggregate single = detail::aggregate_rate({std::nullopt, 0.7});
  CHECK(single.count == 1);
  CHECK(single.mean.value() == Catch::Approx(0.7));
  CHECK(single.sd == 0.0);

  const RateAggregate empty = detail::aggregate_rate({std::nullopt});
  CHECK(empty.count == 0);
  CHECK_FALSE(empty.mean.has_value());
}

TEST_CASE("mean-square error comparison targets the centered truth") {
  // One gene, two time points: t1 (1, 3), t2 (4, 6) -> sample means (2, 5),
  // centered curve (0, 3). True means (2.5, 4.0) -> target (0.5, 2.0).
  const ExpressionDataset ds =
      validate_dataset({"g1"}, {1.0, 3.0, 4.0, 6.0}, Design({2, 2}));
  const SufficientStats stats = compute_sufficient_stats(ds);
  SimulationTruth truth;
  truth.true_paths.push_back(path_from_string("u"));
  truth.true_means = {2.5, 4.0};
  std::vector<PosteriorCurve> curves(1);
  curves[0].mean = {0.2, 2.2};
  curves[0].variance = {0.0, 0.0};
  const MseComparison mse = mean_level_mse(stats, truth, curves);
  // Sample errors: (0-0.5, 3-2.0); model errors: (0.2-0.5, 2.2-2.0).
  CHECK(mse.sample_mean == Catch::Approx((0.25 + 1.0) / 2.0));
  CHECK(mse.posterior_mean == Catch::Approx((0.09 + 0.04) / 2.0));
}

TEST_CASE("benchmark method names round-trip") {
  for (const char *name : {"first", "zero", "pairwise"})
    CHECK(std::string(benchmark_method_name(benchmark_method_from_name(name))) == name);
  CHECK_THROWS_AS(benchmark_method_from_name("bogus"), std::invalid_argument);
}

TEST_CASE("benchmark runs replications over shared datasets") {
  BenchmarkConfig cfg;
  cfg.methods = {BenchmarkMethod::FirstOrder, BenchmarkMethod::Pairwise};
  cfg.replications = 2;
  cfg.G = 60;
  cfg.design = Design({3, 3, 3, 3});
  cfg.seed = 77;
  cfg.fit.max_iters = 30;
  const BenchmarkResult r = run_benchmark(cfg);
  REQUIRE(r.methods.size() == 2);
  REQUIRE(r.raw.size() == 4);  // 2 replications x 2 methods
  for (const MethodAggregate &m : r.methods) {
    CHECK(m.periods.size() == 3);
    CHECK(m.smr.count == 2);
    CHECK(m.smr.mean.has_value());
  }
  // Replications share one dataset across methods.
  CHECK(r.raw[0].dataset_seed == r.raw[1].dataset_seed);
  CHECK(r.raw[0].replication == r.raw[1].replication);
  CHECK(r.raw[0].dataset_seed != r.raw[2].dataset_seed);

  // Deterministic under a rerun.
  const BenchmarkResult r2 = run_benchmark(cfg);
  CHECK(r.methods[0].smr.mean.value() == r2.methods[0].smr.mean.value());
  CHECK(r.methods[1].smr.mean.value() == r2.methods[1].smr.mean.value());
}
