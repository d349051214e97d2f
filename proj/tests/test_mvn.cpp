#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "statepath/math/linalg.hpp"
#include "statepath/math/mvn.hpp"
#include "statepath/math/normal.hpp"
#include "statepath/math/rng.hpp"

using namespace statepath::math;

namespace {

Mat corr2(double rho) {
  Mat r(2, 2);
  r(0, 0) = r(1, 1) = 1.0;
  r(0, 1) = r(1, 0) = rho;
  return r;
}

Mat corr3(double r12, double r13, double r23) {
  Mat r = Mat::identity(3);
  r(0, 1) = r(1, 0) = r12;
  r(0, 2) = r(2, 0) = r13;
  r(1, 2) = r(2, 1) = r23;
  return r;
}

}  // namespace

// References: mpmath (30 digits) via nested conditional-normal integrals.
TEST_CASE("bivariate normal cdf matches references") {
  CHECK(log_mvn_cdf({0.3, -0.4}, corr2(0.35)) ==
        Catch::Approx(-1.3403675683290413).epsilon(1e-10));
  CHECK(log_mvn_cdf({-1.0, -2.0}, corr2(-0.7)) ==
        Catch::Approx(-12.539419236154914).epsilon(1e-10));
  // Far tail: plain double-precision 2D cdf routines lose this one.
  CHECK(log_mvn_cdf({-4.0, -5.0}, corr2(0.3)) ==
        Catch::Approx(-20.31074465962472).epsilon(1e-9));
}

TEST_CASE("bivariate degenerate cases reduce to one dimension") {
  // rho = 0: independence.
  CHECK(log_mvn_cdf({0.7, -1.2}, corr2(0.0)) ==
        Catch::Approx(log_norm_cdf(0.7) + log_norm_cdf(-1.2)).epsilon(1e-11));
  // rho = 1: comonotone, the tighter bound wins.
  CHECK(log_mvn_cdf({0.4, -0.3}, corr2(1.0)) ==
        Catch::Approx(log_norm_cdf(-0.3)).epsilon(1e-9));
  // rho = -1: antithetic pair, interval probability.
  CHECK(log_mvn_cdf({0.8, -0.3}, corr2(-1.0)) ==
        Catch::Approx(log_norm_cdf_interval(0.3, 0.8)).epsilon(1e-9));
}

TEST_CASE("trivariate normal cdf matches reference") {
  CHECK(log_mvn_cdf({0.5, 0.0, -0.5}, corr3(0.5, 0.25, 0.4)) ==
        Catch::Approx(-1.6965136839349268).epsilon(1e-9));
}

TEST_CASE("4-dimensional orthant probability matches Genz reference") {
  // Sigma = A A^T for the fixed lower-triangular A below; reference
  // 0.08405001615201647 from scipy.stats.multivariate_normal.cdf with
  // abseps 5e-14 averaged over 8 seeds (spread ~2e-8).
  const double a[4][4] = {{1.0, 0.0, 0.0, 0.0},
                          {0.4, 0.9, 0.0, 0.0},
                          {-0.3, 0.2, 1.1, 0.0},
                          {0.1, -0.5, 0.3, 0.8}};
  Mat sigma(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      double acc = 0.0;
      for (int k = 0; k < 4; ++k) acc += a[i][k] * a[j][k];
      sigma(i, j) = acc;
    }
  const Vec mu = {0.2, -0.3, 0.5, 0.1};
  CHECK(log_positive_orthant(mu, sigma) ==
        Catch::Approx(-2.476343226956008).epsilon(1e-5));
}

TEST_CASE("univariate truncated moments match closed forms") {
  // Y ~ N(mu, s^2) conditioned on Y > 0: standard hazard-rate identities
  //   E[Y]   = mu + s * phi(alpha) / Phi(-alpha),      alpha = -mu/s
  //   E[Y^2] = mu^2 + s^2 + mu * s * lambda,            lambda = phi/Phi(-alpha)
  const double mu1 = -0.4, s = 1.3;
  Mat sigma(1, 1);
  sigma(0, 0) = s * s;
  const TruncatedMoments m = positive_orthant_moments({mu1}, sigma);
  const double alpha = -mu1 / s;
  const double lambda = norm_pdf(alpha) / norm_cdf(-alpha);
  CHECK(std::exp(m.log_alpha) == Catch::Approx(norm_cdf(-alpha)).epsilon(1e-11));
  CHECK(m.mean[0] == Catch::Approx(mu1 + s * lambda).epsilon(1e-10));
  CHECK(m.second(0, 0) ==
        Catch::Approx(mu1 * mu1 + s * s + mu1 * s * lambda).epsilon(1e-10));
}

TEST_CASE("bivariate truncated moments match quadrature references") {
  // mpmath 2D quadrature (25 digits): Y ~ N((0.3,-0.2), [[1,.5],[.5,2]]),
  // conditioned on Y > 0 componentwise.
  Mat sigma(2, 2);
  sigma(0, 0) = 1.0;
  sigma(0, 1) = sigma(1, 0) = 0.5;
  sigma(1, 1) = 2.0;
  const TruncatedMoments m = positive_orthant_moments({0.3, -0.2}, sigma);
  CHECK(m.log_alpha == Catch::Approx(-1.1145256435728528).epsilon(1e-8));
  CHECK(m.mean[0] == Catch::Approx(1.0348823084483389).epsilon(1e-8));
  CHECK(m.mean[1] == Catch::Approx(1.1296305278454259).epsilon(1e-8));
  CHECK(m.second(0, 0) == Catch::Approx(1.554788023125576).epsilon(1e-8));
  CHECK(m.second(0, 1) == Catch::Approx(1.270316860674631).epsilon(1e-8));
  CHECK(m.second(1, 0) == Catch::Approx(1.270316860674631).epsilon(1e-8));
  CHECK(m.second(1, 1) == Catch::Approx(1.9897877368646577).epsilon(1e-8));
}

TEST_CASE("trivariate truncated moments agree with rejection sampling") {
  // Correlated 3D case cross-checked against a plain rejection sampler.
  Mat sigma(3, 3);
  const double a[3][3] = {{0.9, 0.0, 0.0}, {0.3, 1.1, 0.0}, {-0.2, 0.4, 0.7}};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double acc = 0.0;
      for (int k = 0; k < 3; ++k) acc += a[i][k] * a[j][k];
      sigma(i, j) = acc;
    }
  const Vec mu = {0.5, -0.1, 0.4};
  const TruncatedMoments m = positive_orthant_moments(mu, sigma);

  Rng rng(31);
  const std::size_t target = 200000;
  std::size_t kept = 0, total = 0;
  double s1[3] = {0, 0, 0}, s2[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
  while (kept < target && total < 50u * target) {
    ++total;
    double z[3], y[3];
    for (double &v : z) v = rng.normal();
    bool ok = true;
    for (int i = 0; i < 3; ++i) {
      y[i] = mu[i];
      for (int k = 0; k <= i; ++k) y[i] += a[i][k] * z[k];
      ok = ok && y[i] > 0.0;
    }
    if (!ok) continue;
    ++kept;
    for (int i = 0; i < 3; ++i) {
      s1[i] += y[i];
      for (int j = 0; j < 3; ++j) s2[i][j] += y[i] * y[j];
    }
  }
  REQUIRE(kept == target);
  const double accept = static_cast<double>(kept) / static_cast<double>(total);
  // Acceptance-rate standard error on the orthant probability.
  const double se_p = std::sqrt(accept * (1 - accept) / static_cast<double>(total));
  CHECK(std::exp(m.log_alpha) == Catch::Approx(accept).margin(5.0 * se_p));
  for (int i = 0; i < 3; ++i) {
    CHECK(m.mean[i] == Catch::Approx(s1[i] / static_cast<double>(kept)).margin(0.01));
    for (int j = 0; j < 3; ++j)
      CHECK(m.second(i, j) ==
            Catch::Approx(s2[i][j] / static_cast<double>(kept)).margin(0.03));
  }
}

TEST_CASE("empty orthant is certain") {
  CHECK(log_positive_orthant({}, Mat(0, 0)) == 0.0);
  const TruncatedMoments m = positive_orthant_moments({}, Mat(0, 0));
  CHECK(m.log_alpha == 0.0);
  CHECK(m.mean.empty());
}

TEST_CASE("linear algebra kernels: Cholesky solve and inverse") {
  Mat s(3, 3);
  const double a[3][3] = {{1.2, 0.0, 0.0}, {0.5, 0.8, 0.0}, {-0.3, 0.2, 1.4}};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double acc = 0.0;
      for (int k = 0; k < 3; ++k) acc += a[i][k] * a[j][k];
      s(i, j) = acc;
    }
  const Mat l = cholesky(s);
  // L should reproduce the generating factor up to sign conventions; its
  // product must reproduce s exactly.
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double acc = 0.0;
      for (int k = 0; k < 3; ++k) acc += l(i, k) * l(j, k);
      CHECK(acc == Catch::Approx(s(i, j)).margin(1e-12));
    }
  const Vec b = {1.0, -2.0, 0.5};
  const Vec x = cholesky_solve(l, b);
  const Vec back = matvec(s, x);
  for (int i = 0; i < 3; ++i) CHECK(back[i] == Catch::Approx(b[i]).margin(1e-10));

  const Mat inv = spd_inverse(s);
  const Mat prod = matmul(s, inv);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      CHECK(prod(i, j) == Catch::Approx(i == j ? 1.0 : 0.0).margin(1e-10));

  // det(s) = det(a)^2 = (1.2 * 0.8 * 1.4)^2.
  CHECK(log_det_from_cholesky(l) ==
        Catch::Approx(2.0 * std::log(1.2 * 0.8 * 1.4)).epsilon(1e-12));
}
