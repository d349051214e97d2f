#pragma once

// Experiment design, validated expression matrices, and per-gene sufficient
// statistics (sample means, pooled within-group SS, centered means).

#include <cmath>
#include <cstddef>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace statepath {

struct Design {
  std::size_t T = 0;
  std::vector<std::size_t> n;            // replicate count per time point
  std::vector<std::string> time_labels;  // size T

  Design() = default;
  Design(std::vector<std::size_t> reps, std::vector<std::string> labels = {})
      : T(reps.size()), n(std::move(reps)), time_labels(std::move(labels)) {
    if (T < 2) throw std::invalid_argument("Design: need at least 2 time points");
    for (std::size_t t = 0; t < T; ++t)
      if (n[t] < 1) throw std::invalid_argument("Design: every n_t must be >= 1");
    if (time_labels.empty()) {
      time_labels.resize(T);
      for (std::size_t t = 0; t < T; ++t) time_labels[t] = "t" + std::to_string(t + 1);
    }
    if (time_labels.size() != T)
      throw std::invalid_argument("Design: time_labels size mismatch");
  }

  std::size_t total_columns() const {
    std::size_t s = 0;
    for (auto v : n) s += v;
    return s;
  }

  /// First column (0-based) of time point t (1-based), time-major layout.
  std::size_t column_offset(std::size_t t) const {
    std::size_t off = 0;
    for (std::size_t u = 0; u + 1 < t; ++u) off += n[u];
    return off;
  }

  /// Residual degrees of freedom per gene: sum n_t - T.
  std::size_t df_per_gene() const { return total_columns() - T; }
};

struct ExpressionDataset {
  Design design;
  std::vector<std::string> gene_ids;
  std::vector<double> values;  // G x total_columns, row-major

  std::size_t gene_count() const { return gene_ids.size(); }
  double at(std::size_t g, std::size_t col) const {
    return values[g * design.total_columns() + col];
  }
  const double *row(std::size_t g) const { return values.data() + g * design.total_columns(); }
};

/// Validates a raw matrix against a design. Never drops rows; every problem
/// is an error that names the offending gene/column.
inline ExpressionDataset validate_dataset(std::vector<std::string> gene_ids,
                                          std::vector<double> values, Design design) {
  const std::size_t cols = design.total_columns();
  const std::size_t G = gene_ids.size();
  if (G == 0) throw std::invalid_argument("validate_dataset: empty gene list");
  if (values.size() != G * cols)
    throw std::invalid_argument(
        "validate_dataset: matrix is " + std::to_string(values.size()) +
        " values, expected " + std::to_string(G) + " x " + std::to_string(cols));
  if (design.df_per_gene() == 0)
    throw std::invalid_argument(
        "validate_dataset: all n_t = 1, observation variance is inestimable");
  {
    std::set<std::string> seen;
    for (const auto &id : gene_ids)
      if (!seen.insert(id).second)
        throw std::invalid_argument("validate_dataset: duplicate gene id '" + id + "'");
  }
  for (std::size_t g = 0; g < G; ++g)
    for (std::size_t c = 0; c < cols; ++c)
      if (!std::isfinite(values[g * cols + c]))
        throw std::invalid_argument("validate_dataset: non-finite value at gene '" +
                                    gene_ids[g] + "', column " + std::to_string(c + 1));
  ExpressionDataset ds;
  ds.design = std::move(design);
  ds.gene_ids = std::move(gene_ids);
  ds.values = std::move(values);
  return ds;
}

struct SufficientStats {
  std::size_t G = 0;
  std::size_t T = 0;
  std::vector<std::size_t> n;
  std::vector<double> means;     // G x T sample means
  std::vector<double> centered;  // G x T, column 1 identically 0
  double pooled_ss = 0.0;        // sum_g sum_t sum_k (x - mean)^2

  const double *mean_row(std::size_t g) const { return means.data() + g * T; }
  const double *centered_row(std::size_t g) const { return centered.data() + g * T; }
};

inline SufficientStats compute_sufficient_stats(const ExpressionDataset &ds) {
  const Design &d = ds.design;
  SufficientStats s;
  s.G = ds.gene_count();
  s.T = d.T;
  s.n = d.n;
  s.means.resize(s.G * s.T);
  s.centered.resize(s.G * s.T);
  s.pooled_ss = 0.0;
  for (std::size_t g = 0; g < s.G; ++g) {
    const double *row = ds.row(g);
    for (std::size_t t = 0; t < s.T; ++t) {
      const std::size_t off = d.column_offset(t + 1);
      double m = 0.0;
      for (std::size_t k = 0; k < d.n[t]; ++k) m += row[off + k];
      m /= static_cast<double>(d.n[t]);
      s.means[g * s.T + t] = m;
      for (std::size_t k = 0; k < d.n[t]; ++k) {
        const double r = row[off + k] - m;
        s.pooled_ss += r * r;
      }
    }
    const double base = s.means[g * s.T];
    for (std::size_t t = 0; t < s.T; ++t)
      s.centered[g * s.T + t] = s.means[g * s.T + t] - base;
    s.centered[g * s.T] = 0.0;  // exact, not just base - base
  }
  return s;
}

}  // namespace statepath
