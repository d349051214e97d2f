#pragma once

// Derivative-free 2-D minimization (Nelder-Mead with standard coefficients).
// Deterministic: fixed initial simplex, no randomized restarts.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace statepath::math {

struct NelderMead2dResult {
  std::array<double, 2> x{};
  double f = 0.0;
  int evals = 0;
};

template <class F>
NelderMead2dResult nelder_mead_2d(F &&f, std::array<double, 2> x0,
                                  std::array<double, 2> step, double ftol_abs = 1e-9,
                                  int max_evals = 200) {
  using P = std::array<double, 2>;
  std::array<P, 3> v{P{x0[0], x0[1]},
                     P{x0[0] + step[0], x0[1]},
                     P{x0[0], x0[1] + step[1]}};
  std::array<double, 3> fv{};
  int evals = 0;
  const auto eval = [&](const P &p) {
    ++evals;
    const double val = f(p);
    return std::isnan(val) ? std::numeric_limits<double>::infinity() : val;
  };
  for (int i = 0; i < 3; ++i) fv[i] = eval(v[i]);

  const auto order = [&] {
    // insertion sort on 3 items, stable
    if (fv[1] < fv[0]) { std::swap(fv[0], fv[1]); std::swap(v[0], v[1]); }
    if (fv[2] < fv[1]) { std::swap(fv[1], fv[2]); std::swap(v[1], v[2]); }
    if (fv[1] < fv[0]) { std::swap(fv[0], fv[1]); std::swap(v[0], v[1]); }
  };

  while (evals < max_evals) {
    order();
    if (std::isfinite(fv[2]) && fv[2] - fv[0] <= ftol_abs) break;
    const P c{0.5 * (v[0][0] + v[1][0]), 0.5 * (v[0][1] + v[1][1])};
    const P xr{c[0] + (c[0] - v[2][0]), c[1] + (c[1] - v[2][1])};
    const double fr = eval(xr);
    if (fr < fv[0]) {
      const P xe{c[0] + 2.0 * (c[0] - v[2][0]), c[1] + 2.0 * (c[1] - v[2][1])};
      const double fe = eval(xe);
      if (fe < fr) { v[2] = xe; fv[2] = fe; } else { v[2] = xr; fv[2] = fr; }
    } else if (fr < fv[1]) {
      v[2] = xr;
      fv[2] = fr;
    } else {
      if (fr < fv[2]) {
        // outside contraction
        const P xc{c[0] + 0.5 * (xr[0] - c[0]), c[1] + 0.5 * (xr[1] - c[1])};
        const double fc = eval(xc);
        if (fc <= fr) { v[2] = xc; fv[2] = fc; continue; }
      } else {
        // inside contraction
        const P xc{c[0] - 0.5 * (c[0] - v[2][0]), c[1] - 0.5 * (c[1] - v[2][1])};
        const double fc = eval(xc);
        if (fc < fv[2]) { v[2] = xc; fv[2] = fc; continue; }
      }
      // shrink toward the best vertex
      for (int i = 1; i < 3; ++i) {
        v[i] = {v[0][0] + 0.5 * (v[i][0] - v[0][0]), v[0][1] + 0.5 * (v[i][1] - v[0][1])};
        fv[i] = eval(v[i]);
      }
    }
  }
  order();
  return {v[0], fv[0], evals};
}

}  // namespace statepath::math
