#pragma once

// Random number generation with portable output. std::mt19937_64 has a
// standardized bit stream, and every variate below is derived from it via
// fixed arithmetic (inverse-CDF transforms), so a given seed produces the
// same draws on every conforming implementation. std::*_distribution is
// deliberately not used: its mapping is implementation-defined.

#include <cstdint>
#include <random>

#include "statepath/math/normal.hpp"

namespace statepath::math {

/// splitmix64 step; used to derive independent sub-seeds from a master seed.
inline std::uint64_t splitmix64(std::uint64_t &state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// Sub-seed for stream `index` of a master seed. Distinct indices give
/// decorrelated generators, so per-unit streams are order-independent.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t s = master;
  std::uint64_t z = splitmix64(s);
  s = z ^ (index * 0x9e3779b97f4a7c15ull + 0x7f4a7c15ull);
  return splitmix64(s);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  /// Uniform on (0,1): (x >> 11) * 2^-53, nudged away from 0 so inverse-CDF
  /// transforms never see an exact endpoint.
  double uniform() {
    const std::uint64_t x = gen_();
    double u = static_cast<double>(x >> 11) * 0x1.0p-53;
    if (u <= 0.0) u = 0x1.0p-53;
    return u;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via inverse CDF (one uniform consumed per draw).
  double normal() { return norm_quantile(uniform()); }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  /// N(mean, sd^2) truncated to (lo, inf). Inverse-CDF in the log domain, so
  /// it stays exact even when lo is many sds above the mean.
  double truncated_normal_above(double lo, double mean, double sd) {
    const double a = (lo - mean) / sd;
    // P(Z > a) = Phi(-a); sample the upper tail via the lower one reflected.
    const double lp_tail = log_norm_cdf(-a);
    const double u = uniform();
    const double lp = lp_tail + std::log(u);
    const double z = -norm_quantile_from_log(lp);
    return mean + sd * z;
  }

  /// N(mean, sd^2) truncated to (-inf, hi).
  double truncated_normal_below(double hi, double mean, double sd) {
    return 2.0 * mean - truncated_normal_above(2.0 * mean - hi, mean, sd);
  }

  /// Integer in [0, n).
  std::uint64_t uniform_int(std::uint64_t n) {
    // Rejection-free would bias; bound the bias instead by rejection on the
    // top partial block. n is tiny (state counts), so rejection is rare.
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return x % n;
  }

  /// Index drawn from unnormalized weights (linear scan; few categories).
  std::size_t categorical(const double *w, std::size_t n) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += w[i];
    double u = uniform() * total;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      u -= w[i];
      if (u <= 0.0) return i;
    }
    return n - 1;
  }

  std::mt19937_64 &engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
};

}  // namespace statepath::math
