#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "statepath/likelihood.hpp"
#include "statepath/math/quadrature.hpp"
#include "statepath/math/rng.hpp"

using namespace statepath;

namespace {

// Independent closed form for the all-Same path. With every increment zero,
// the centered means (t = 2..T) are jointly Gaussian with covariance
//   S = (sigma2/n1) * J + diag(sigma2/n_t),
// a rank-one update evaluated here via Sherman-Morrison, not the library's
// generic Cholesky machinery.
double all_same_reference(const double *centered, double sigma2,
                          const std::vector<std::size_t> &n) {
  const std::size_t q = n.size() - 1;
  const double c = sigma2 / static_cast<double>(n[0]);
  double sum_inv = 0.0, weighted = 0.0, quad_diag = 0.0, log_det_d = 0.0;
  for (std::size_t r = 0; r < q; ++r) {
    const double d = sigma2 / static_cast<double>(n[r + 1]);
    const double y = centered[r + 1];
    sum_inv += 1.0 / d;
    weighted += y / d;
    quad_diag += y * y / d;
    log_det_d += std::log(d);
  }
  const double k = 1.0 + c * sum_inv;
  const double quad = quad_diag - (c / k) * weighted * weighted;
  const double log_det = log_det_d + std::log(k);
  return -0.5 * (static_cast<double>(q) * math::kLog2Pi + log_det + quad);
}

MeanLevelParams test_mean_levels(std::size_t periods) {
  return MeanLevelParams::constant(periods, 1.0, 0.5, -0.8, 0.6);
}

}  // namespace

TEST_CASE("all-Same path likelihood matches the rank-one closed form") {
  const std::vector<std::size_t> n = {4, 4, 3, 4};
  const Design design(n);
  const ObservationParams obs{0.35 * 0.35};
  const MeanLevelParams mean = test_mean_levels(3);
  const StatePath same = path_from_string("sss");

  math::Rng rng(17);
  for (int rep = 0; rep < 50; ++rep) {
    double cm[4] = {0.0, rng.normal(0, 0.8), rng.normal(0, 0.8), rng.normal(0, 0.8)};
    const double got = path_log_likelihood(cm, same, obs, mean, design);
    const double want = all_same_reference(cm, obs.sigma2, n);
    CHECK(got == Catch::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("single-period marginal densities integrate to one") {
  // T=2 with one replicate per time point: the only observable is the
  // centered second mean, a scalar with an explicit mixture-free density.
  const Design design({1, 1});
  const ObservationParams obs{0.4};
  const MeanLevelParams mean = test_mean_levels(1);
  for (const char *ps : {"s", "u", "d"}) {
    const StatePath path = path_from_string(ps);
    const double total = math::integrate_adaptive(
        [&](double y) {
          double cm[2] = {0.0, y};
          return std::exp(path_log_likelihood(cm, path, obs, mean, design));
        },
        -40.0, 40.0, 1e-11);
    CHECK(total == Catch::Approx(1.0).epsilon(1e-8));
  }
}

TEST_CASE("likelihood agrees with the Monte Carlo oracle") {
  const Design design({2, 3, 2});
  const ObservationParams obs{0.3};
  const MeanLevelParams mean = test_mean_levels(2);
  const double cm[3] = {0.0, 0.8, -0.2};
  int checked = 0;
  for (const char *ps : {"ud", "su", "dd"}) {
    const StatePath path = path_from_string(ps);
    const double exact = path_log_likelihood(cm, path, obs, mean, design);
    const McEstimate mc =
        mc_oracle_log_likelihood(cm, path, obs, mean, design, 400000, 555 + checked);
    CHECK(exact == Catch::Approx(mc.log_estimate).margin(4.0 * mc.log_std_error));
    ++checked;
  }
  CHECK(checked == 3);
  CHECK_THROWS_AS(mc_oracle_log_likelihood(cm, path_from_string("ud"), obs, mean, design,
                                           100, 1),
                  std::invalid_argument);
}

TEST_CASE("PathEngine matches the one-off evaluation") {
  const Design design({4, 4, 3, 4});
  const ObservationParams obs{0.2};
  const MeanLevelParams mean = test_mean_levels(3);
  const PathEngine engine(design, obs, mean);
  REQUIRE(engine.path_count() == 27);
  math::Rng rng(3);
  double cm[4] = {0.0, rng.normal(), rng.normal(), rng.normal()};
  for (std::size_t i = 0; i < engine.path_count(); ++i) {
    const StatePath &p = engine.paths()[i];
    CHECK(engine.log_likelihood(cm, i) ==
          Catch::Approx(path_log_likelihood(cm, p, obs, mean, design)).epsilon(1e-13));
  }
}

TEST_CASE("conditional moments: all-Same two-point posterior in closed form") {
  // T=2: the latent level is constant, prior N(0, sigma2/n1), observation
  // ybar2 ~ N(level, sigma2/n2). Standard conjugate update.
  const Design design({4, 2});
  const double sigma2 = 0.5;
  const ObservationParams obs{sigma2};
  const MeanLevelParams mean = test_mean_levels(1);
  const double y = 0.9;
  const double cm[2] = {0.0, y};
  const double v_prior = sigma2 / 4.0, v_obs = sigma2 / 2.0;
  const double post_var = 1.0 / (1.0 / v_prior + 1.0 / v_obs);
  const double post_mean = post_var * y / v_obs;

  const PathConditionalResult r =
      path_conditional_moments(cm, path_from_string("s"), obs, mean, design);
  CHECK(r.log_lik == Catch::Approx(all_same_reference(cm, sigma2, {4, 2})).epsilon(1e-12));
  REQUIRE(r.post_mean.size() == 2);
  CHECK(r.post_mean[0] == Catch::Approx(post_mean).epsilon(1e-10));
  CHECK(r.post_mean[1] == Catch::Approx(post_mean).epsilon(1e-10));
  CHECK(r.post_var[0] == Catch::Approx(post_var).epsilon(1e-10));
  CHECK(r.post_var[1] == Catch::Approx(post_var).epsilon(1e-10));
}

TEST_CASE("conditional moments: Up paths bend the curve upward") {
  const Design design({4, 4});
  const ObservationParams obs{0.3};
  const MeanLevelParams mean = test_mean_levels(1);
  const double cm[2] = {0.0, 1.4};
  const PathConditionalResult up =
      path_conditional_moments(cm, path_from_string("u"), obs, mean, design);
  const PathConditionalResult down =
      path_conditional_moments(cm, path_from_string("d"), obs, mean, design);
  CHECK(up.post_mean[1] - up.post_mean[0] > 0.0);
  CHECK(down.post_mean[1] - down.post_mean[0] < 0.0);
  CHECK(up.post_var[0] > 0.0);
  CHECK(up.post_var[1] > 0.0);
  // Data strongly favor the Up path here.
  const double ll_up = path_log_likelihood(cm, path_from_string("u"), obs, mean, design);
  const double ll_down = path_log_likelihood(cm, path_from_string("d"), obs, mean, design);
  CHECK(ll_up > ll_down);
}

TEST_CASE("signed increment density: normalization and quadrature cross-check") {
  const double eta = 1.0, tau = 0.5, s2 = 0.3;
  // Integrates to one over the observed difference.
  const double total = math::integrate_adaptive(
      [&](double d) { return std::exp(log_signed_increment_density(d, eta, tau, s2, 1.0)); },
      -30.0, 30.0, 1e-11);
  CHECK(total == Catch::Approx(1.0).epsilon(1e-8));

  // Matches the defining integral: d = delta + e with delta truncated to
  // the positive half-line and e ~ N(0, s2).
  const double d_obs = 0.7;
  const double tn_norm = math::norm_cdf(eta / tau);
  const double direct = math::integrate_adaptive(
      [&](double delta) {
        const double prior =
            math::norm_pdf((delta - eta) / tau) / tau / tn_norm;
        const double lik = math::norm_pdf((d_obs - delta) / std::sqrt(s2)) / std::sqrt(s2);
        return prior * lik;
      },
      0.0, eta + 12.0 * tau, 1e-11);
  CHECK(std::exp(log_signed_increment_density(d_obs, eta, tau, s2, 1.0)) ==
        Catch::Approx(direct).epsilon(1e-8));

  // Down direction mirrors the Up one.
  CHECK(log_signed_increment_density(-d_obs, -eta, tau, s2, -1.0) ==
        Catch::Approx(log_signed_increment_density(d_obs, eta, tau, s2, 1.0)).epsilon(1e-12));

  // Same-state density is plain centered Gaussian noise.
  CHECK(log_same_increment_density(0.25, s2) ==
        Catch::Approx(std::log(math::norm_pdf(0.25 / std::sqrt(s2)) / std::sqrt(s2)))
            .epsilon(1e-12));
}

TEST_CASE("prior path probabilities: first-order worked example") {
  const StateLevelParams sp = canonical_first_order_params();
  // P(u) * P(u->d) * P(d->s) with the canonical transition tables:
  // 0.04 * 0.68 * 0.82.
  CHECK(prior_path_probability(path_from_string("uds"), sp) ==
        Catch::Approx(0.04 * 0.68 * 0.82).epsilon(1e-14));
  CHECK(prior_path_probability(path_from_string("sss"), sp) ==
        Catch::Approx(0.88).epsilon(1e-14));
  // Same is absorbing in the canonical tables.
  CHECK(prior_path_probability(path_from_string("sus"), sp) == 0.0);
  CHECK(log_prior_path_probability(path_from_string("sus"), sp) ==
        -std::numeric_limits<double>::infinity());

  double total = 0.0;
  for (std::size_t i = 0; i < 27; ++i)
    total += prior_path_probability(path_from_index(4, i), sp);
  CHECK(total == Catch::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("prior path probabilities: zero and full orders") {
  StateLevelParams zero;
  zero.order = MarkovOrder::Zero;
  zero.T = 4;
  zero.marginals = {{1.0 / 3, 1.0 / 3, 1.0 / 3},
                    {1.0 / 3, 1.0 / 3, 1.0 / 3},
                    {1.0 / 3, 1.0 / 3, 1.0 / 3}};
  zero.validate();
  for (std::size_t i : {std::size_t{0}, std::size_t{13}, std::size_t{26}})
    CHECK(prior_path_probability(path_from_index(4, i), zero) ==
          Catch::Approx(1.0 / 27.0).epsilon(1e-14));

  // Non-uniform zero-order factorizes over periods.
  zero.marginals[0] = {0.5, 0.3, 0.2};
  zero.marginals[1] = {0.6, 0.1, 0.3};
  zero.marginals[2] = {0.7, 0.2, 0.1};
  CHECK(prior_path_probability(path_from_string("uds"), zero) ==
        Catch::Approx(0.3 * 0.3 * 0.7).epsilon(1e-14));

  StateLevelParams full;
  full.order = MarkovOrder::Full;
  full.T = 3;
  full.path_probs.assign(9, 0.0);
  full.path_probs[0] = 0.5;
  full.path_probs[4] = 0.25;  // "uu"
  full.path_probs[8] = 0.25;  // "dd"
  full.validate();
  CHECK(prior_path_probability(path_from_string("uu"), full) == 0.25);
  CHECK(prior_path_probability(path_from_string("ud"), full) == 0.0);
}

TEST_CASE("parameter validation rejects inconsistent inputs") {
  const Design design({2, 2});
  const ObservationParams bad_obs{0.0};
  const MeanLevelParams mean = test_mean_levels(1);
  const double cm[2] = {0.0, 0.5};
  CHECK_THROWS_AS(path_log_likelihood(cm, path_from_string("u"), bad_obs, mean, design),
                  std::invalid_argument);
  // Path length must match the design.
  CHECK_THROWS_AS(path_log_likelihood(cm, path_from_string("uu"), ObservationParams{1.0},
                                      mean, design),
                  std::invalid_argument);
  MeanLevelParams bad_mean = mean;
  bad_mean.tau_up[0] = 0.0;
  CHECK_THROWS_AS(path_log_likelihood(cm, path_from_string("u"), ObservationParams{1.0},
                                      bad_mean, design),
                  std::invalid_argument);
}
