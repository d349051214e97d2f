#pragma once

// Text formats: TSV for matrices and tables, JSON for parameters and
// summaries. Floats are written in shortest round-trip form; every file gets
// a comment line recording artifact version, command, and seed; writes are
// atomic (temp file + rename) so no command leaves partial output behind.

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdint>
#include <initializer_list>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "statepath/dataset.hpp"
#include "statepath/em.hpp"
#include "statepath/inference.hpp"
#include "statepath/metrics.hpp"
#include "statepath/params.hpp"
#include "statepath/simulate.hpp"
#include "statepath/version.hpp"

namespace statepath::io {

inline std::string format_double(double v) {
  std::array<char, 40> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (res.ec != std::errc{}) throw std::runtime_error("format_double: conversion failed");
  return std::string(buf.data(), res.ptr);
}

inline double parse_double(const std::string &field, const std::string &where) {
  double v = 0.0;
  const char *first = field.data();
  const char *last = field.data() + field.size();
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc{} || res.ptr != last)
    throw std::invalid_argument(where + ": malformed number '" + field + "'");
  return v;
}

inline std::size_t parse_index(const std::string &field, const std::string &where) {
  std::size_t v = 0;
  const char *first = field.data();
  const char *last = field.data() + field.size();
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc{} || res.ptr != last)
    throw std::invalid_argument(where + ": malformed integer '" + field + "'");
  return v;
}

inline std::vector<std::string> split_tsv(const std::string &line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return fields;
}

/// Provenance stamp for output files.
struct OutputContext {
  std::string command;
  std::optional<std::uint64_t> seed;

  std::string comment_line() const {
    std::string s = "# statepath " + std::string(kVersion);
    if (!command.empty()) s += " | command: " + command;
    if (seed) s += " | seed: " + std::to_string(*seed);
    return s + "\n";
  }
};

inline void write_text_atomic(const std::string &path, const std::string &content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.parent_path() / (target.filename().string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, target);
}

/// Lines of a text file with 1-based numbering; comments ('#') and blank
/// lines are dropped but numbering is preserved.
struct NumberedLine {
  std::size_t number;
  std::string text;
};

inline std::vector<NumberedLine> read_table_lines(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::vector<NumberedLine> lines;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    lines.push_back({number, line});
  }
  return lines;
}

// ---------------------------------------------------------------------------
// Dataset + design

inline std::string sample_label(const Design &design, std::size_t t, std::size_t k) {
  return design.time_labels[t - 1] + "_r" + std::to_string(k + 1);
}

inline std::string dataset_to_tsv(const ExpressionDataset &ds, const OutputContext &ctx) {
  std::string out = ctx.comment_line();
  out += "gene_id";
  for (std::size_t t = 1; t <= ds.design.T; ++t)
    for (std::size_t k = 0; k < ds.design.n[t - 1]; ++k)
      out += "\t" + sample_label(ds.design, t, k);
  out += "\n";
  const std::size_t cols = ds.design.total_columns();
  for (std::size_t g = 0; g < ds.gene_count(); ++g) {
    out += ds.gene_ids[g];
    for (std::size_t c = 0; c < cols; ++c) out += "\t" + format_double(ds.values[g * cols + c]);
    out += "\n";
  }
  return out;
}

inline std::string design_to_tsv(const Design &design, const OutputContext &ctx) {
  std::string out = ctx.comment_line();
  out += "sample_id\ttime_index\treplicate\ttime_label\n";
  for (std::size_t t = 1; t <= design.T; ++t)
    for (std::size_t k = 0; k < design.n[t - 1]; ++k)
      out += sample_label(design, t, k) + "\t" + std::to_string(t) + "\t" +
             std::to_string(k + 1) + "\t" + design.time_labels[t - 1] + "\n";
  return out;
}

inline void write_dataset(const std::string &data_path, const std::string &design_path,
                          const ExpressionDataset &ds, const OutputContext &ctx) {
  write_text_atomic(data_path, dataset_to_tsv(ds, ctx));
  write_text_atomic(design_path, design_to_tsv(ds.design, ctx));
}

namespace detail {

struct DesignSample {
  std::size_t time = 0;       // 1-based
  std::size_t replicate = 0;  // 1-based, unique within a time point
};

struct DesignTable {
  Design design;
  std::map<std::string, DesignSample> samples;          // id -> position
  std::vector<std::vector<std::size_t>> replicate_ids;  // per time, sorted
};

inline DesignTable read_design_tsv(const std::string &path) {
  const auto lines = read_table_lines(path);
  if (lines.empty()) throw std::invalid_argument(path + ": empty design file");
  const auto header = split_tsv(lines.front().text);
  if (header.size() < 3 || header[0] != "sample_id" || header[1] != "time_index" ||
      header[2] != "replicate")
    throw std::invalid_argument(path + ": design header must start with "
                                       "'sample_id\\ttime_index\\treplicate'");

  DesignTable table;
  std::map<std::size_t, std::map<std::size_t, std::string>> by_time;  // t -> rep -> label
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string where = path + ": line " + std::to_string(lines[i].number);
    const auto fields = split_tsv(lines[i].text);
    if (fields.size() < 3 || fields.size() > 4)
      throw std::invalid_argument(where + ": expected 3 or 4 columns, got " +
                                  std::to_string(fields.size()));
    const std::string &id = fields[0];
    const std::size_t t = parse_index(fields[1], where);
    const std::size_t k = parse_index(fields[2], where);
    if (t == 0 || k == 0) throw std::invalid_argument(where + ": indices are 1-based");
    if (table.samples.count(id))
      throw std::invalid_argument(where + ": duplicate sample id '" + id + "'");
    auto &reps = by_time[t];
    if (reps.count(k))
      throw std::invalid_argument(where + ": duplicate replicate " + std::to_string(k) +
                                  " at time " + std::to_string(t));
    reps[k] = fields.size() == 4 ? fields[3] : ("t" + std::to_string(t));
    table.samples[id] = {t, k};
  }
  if (by_time.empty()) throw std::invalid_argument(path + ": no samples in design");
  const std::size_t T = by_time.rbegin()->first;
  std::vector<std::size_t> n(T, 0);
  std::vector<std::string> labels(T);
  table.replicate_ids.resize(T);
  for (std::size_t t = 1; t <= T; ++t) {
    const auto it = by_time.find(t);
    if (it == by_time.end())
      throw std::invalid_argument(path + ": no samples at time " + std::to_string(t));
    n[t - 1] = it->second.size();
    labels[t - 1] = it->second.begin()->second;
    for (const auto &[k, label] : it->second) table.replicate_ids[t - 1].push_back(k);
  }
  table.design = Design(std::move(n), std::move(labels));
  return table;
}

}  // namespace detail

/// Expression TSV (first column gene id) + design TSV (sample_id, time_index,
/// replicate). Columns are reordered into time-major layout and the result is
/// validated.
inline ExpressionDataset ingest_tsv(const std::string &data_path,
                                    const std::string &design_path) {
  const detail::DesignTable table = detail::read_design_tsv(design_path);
  const Design &design = table.design;

  const auto lines = read_table_lines(data_path);
  if (lines.empty()) throw std::invalid_argument(data_path + ": empty expression file");
  const auto header = split_tsv(lines.front().text);
  if (header.size() < 2)
    throw std::invalid_argument(data_path + ": header needs a gene id column and samples");

  const std::size_t cols = design.total_columns();
  if (header.size() - 1 != cols)
    throw std::invalid_argument(data_path + ": header has " +
                                std::to_string(header.size() - 1) + " samples, design has " +
                                std::to_string(cols));
  // Map each file column to its slot in the time-major layout.
  std::vector<std::size_t> slot(cols);
  std::vector<bool> seen(cols, false);
  for (std::size_t c = 0; c < cols; ++c) {
    const std::string &id = header[c + 1];
    const auto it = table.samples.find(id);
    if (it == table.samples.end())
      throw std::invalid_argument(data_path + ": sample '" + id + "' not in design");
    const auto &reps = table.replicate_ids[it->second.time - 1];
    const std::size_t rank = static_cast<std::size_t>(
        std::lower_bound(reps.begin(), reps.end(), it->second.replicate) - reps.begin());
    const std::size_t s = design.column_offset(it->second.time) + rank;
    if (seen[s])
      throw std::invalid_argument(data_path + ": sample '" + id + "' appears twice");
    seen[s] = true;
    slot[c] = s;
  }

  std::vector<std::string> gene_ids;
  std::vector<double> values;
  gene_ids.reserve(lines.size() - 1);
  values.reserve((lines.size() - 1) * cols);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string where = data_path + ": line " + std::to_string(lines[i].number);
    const auto fields = split_tsv(lines[i].text);
    if (fields.size() != cols + 1)
      throw std::invalid_argument(where + ": expected " + std::to_string(cols + 1) +
                                  " columns, got " + std::to_string(fields.size()));
    gene_ids.push_back(fields[0]);
    values.resize(values.size() + cols);
    double *row = &values[values.size() - cols];
    for (std::size_t c = 0; c < cols; ++c)
      row[slot[c]] = parse_double(fields[c + 1], where);
  }

  ExpressionDataset ds = validate_dataset(std::move(gene_ids), std::move(values), design);
  return ds;
}

// ---------------------------------------------------------------------------
// Parameters (JSON)

inline void reject_unknown_keys(const nlohmann::json &obj, const std::string &what,
                                std::initializer_list<const char *> allowed) {
  for (const auto &item : obj.items()) {
    bool ok = false;
    for (const char *key : allowed) ok = ok || item.key() == key;
    if (!ok) throw std::invalid_argument(what + ": unknown key '" + item.key() + "'");
  }
}

inline nlohmann::json params_to_json(const ModelParams &p) {
  nlohmann::json j;
  j["sigma2"] = p.obs.sigma2;
  j["mean"] = {{"eta_up", p.mean.eta_up},
               {"tau_up", p.mean.tau_up},
               {"eta_down", p.mean.eta_down},
               {"tau_down", p.mean.tau_down}};
  nlohmann::json s;
  s["order"] = markov_order_name(p.state.order);
  s["T"] = p.state.T;
  switch (p.state.order) {
    case MarkovOrder::Zero:
      s["marginals"] = p.state.marginals;
      break;
    case MarkovOrder::First:
      s["pi"] = p.state.pi;
      s["transitions"] = p.state.transitions;
      break;
    case MarkovOrder::Full:
      s["path_probs"] = p.state.path_probs;
      break;
  }
  j["state"] = std::move(s);
  return j;
}

inline ModelParams params_from_json(const nlohmann::json &j) {
  reject_unknown_keys(j, "params", {"sigma2", "mean", "state"});
  ModelParams p;
  p.obs.sigma2 = j.at("sigma2").get<double>();
  const auto &m = j.at("mean");
  reject_unknown_keys(m, "params.mean", {"eta_up", "tau_up", "eta_down", "tau_down"});
  p.mean.eta_up = m.at("eta_up").get<std::vector<double>>();
  p.mean.tau_up = m.at("tau_up").get<std::vector<double>>();
  p.mean.eta_down = m.at("eta_down").get<std::vector<double>>();
  p.mean.tau_down = m.at("tau_down").get<std::vector<double>>();
  const auto &s = j.at("state");
  reject_unknown_keys(s, "params.state",
                      {"order", "T", "marginals", "pi", "transitions", "path_probs"});
  p.state.order = markov_order_from_name(s.at("order").get<std::string>());
  p.state.T = s.at("T").get<std::size_t>();
  switch (p.state.order) {
    case MarkovOrder::Zero:
      p.state.marginals = s.at("marginals").get<std::vector<StateProb>>();
      break;
    case MarkovOrder::First:
      p.state.pi = s.at("pi").get<StateProb>();
      p.state.transitions = s.at("transitions").get<std::vector<TransitionMatrix>>();
      break;
    case MarkovOrder::Full:
      p.state.path_probs = s.at("path_probs").get<std::vector<double>>();
      break;
  }
  p.validate();
  return p;
}

inline void write_params(const std::string &path, const ModelParams &p,
                         const OutputContext &ctx) {
  nlohmann::json j = params_to_json(p);
  j["artifact"] = {{"version", kVersion}, {"command", ctx.command}};
  if (ctx.seed) j["artifact"]["seed"] = *ctx.seed;
  write_text_atomic(path, j.dump(2) + "\n");
}

inline ModelParams read_params(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  nlohmann::json j = nlohmann::json::parse(in);
  j.erase("artifact");  // provenance stamp, not a parameter
  return params_from_json(j);
}

// ---------------------------------------------------------------------------
// Result tables

inline std::string truth_to_tsv(const SimulationTruth &truth, const std::vector<std::string> &ids,
                                const OutputContext &ctx) {
  const std::size_t T = truth.true_paths.front().time_points();
  std::string out = ctx.comment_line();
  out += "gene_id\tpath";
  for (std::size_t t = 1; t <= T; ++t) out += "\tmu_t" + std::to_string(t);
  out += "\n";
  for (std::size_t g = 0; g < truth.true_paths.size(); ++g) {
    out += ids[g] + "\t" + path_to_string(truth.true_paths[g]);
    for (std::size_t t = 0; t < T; ++t)
      out += "\t" + format_double(truth.true_means[g * T + t]);
    out += "\n";
  }
  return out;
}

inline std::string calls_to_tsv(const CallSet &cs, const std::vector<std::string> &ids,
                                const std::vector<GenePosterior> &posteriors,
                                const OutputContext &ctx) {
  std::string out = ctx.comment_line();
  out += "gene_id\tcriterion\tpath\ttde";
  for (std::size_t t = 2; t <= cs.T; ++t) out += "\tstate_t" + std::to_string(t);
  for (std::size_t t = 2; t <= cs.T; ++t) out += "\tpr_same_t" + std::to_string(t);
  out += "\tpr_all_same\n";
  for (std::size_t g = 0; g < cs.calls.size(); ++g) {
    const GeneCall &c = cs.calls[g];
    out += ids[g];
    out += "\t";
    out += call_criterion_name(cs.criterion);
    out += "\t" + path_to_string(c.path) + "\t" + (c.tde ? "1" : "0");
    for (std::size_t t = 2; t <= cs.T; ++t) {
      out += "\t";
      out += state_char(c.path.at_time(t));
    }
    for (std::size_t t = 2; t <= cs.T; ++t)
      out += "\t" + format_double(posteriors[g].state_marginals[(t - 1) * 3]);
    out += "\t" + format_double(posteriors[g].path_probs[0]) + "\n";
  }
  return out;
}

inline std::string fdr_to_json(const CallSet &cs, const OutputContext &ctx) {
  nlohmann::json j;
  j["artifact"] = {{"version", kVersion}, {"command", ctx.command}};
  if (ctx.seed) j["artifact"]["seed"] = *ctx.seed;
  j["criterion"] = call_criterion_name(cs.criterion);
  nlohmann::json per;
  for (std::size_t t = 2; t <= cs.T; ++t) {
    const auto &v = cs.fdr_per_time[t - 2];
    per["t" + std::to_string(t)] = v ? nlohmann::json(*v) : nlohmann::json();
  }
  j["fdr_per_time"] = std::move(per);
  j["fdr_overall"] = cs.fdr_overall ? nlohmann::json(*cs.fdr_overall) : nlohmann::json();
  std::size_t tde = 0;
  for (const auto &c : cs.calls) tde += c.tde;
  j["genes_called_tde"] = tde;
  j["genes_total"] = cs.calls.size();
  return j.dump(2) + "\n";
}

inline std::string clusters_to_tsv(const std::vector<ClusterEntry> &clusters,
                                   const OutputContext &ctx) {
  std::string out = ctx.comment_line();
  out += "rank\tpath\tsize\n";
  for (std::size_t i = 0; i < clusters.size(); ++i)
    out += std::to_string(i + 1) + "\t" + clusters[i].path_string + "\t" +
           std::to_string(clusters[i].genes.size()) + "\n";
  return out;
}

inline std::string curves_to_tsv(const std::vector<PosteriorCurve> &curves,
                                 const std::vector<std::string> &ids, const OutputContext &ctx) {
  const std::size_t T = curves.empty() ? 0 : curves.front().mean.size();
  std::string out = ctx.comment_line();
  out += "gene_id";
  for (std::size_t t = 1; t <= T; ++t) out += "\tmean_t" + std::to_string(t);
  for (std::size_t t = 1; t <= T; ++t) out += "\tvar_t" + std::to_string(t);
  out += "\n";
  for (std::size_t g = 0; g < curves.size(); ++g) {
    out += ids[g];
    for (std::size_t t = 0; t < T; ++t) out += "\t" + format_double(curves[g].mean[t]);
    for (std::size_t t = 0; t < T; ++t) out += "\t" + format_double(curves[g].variance[t]);
    out += "\n";
  }
  return out;
}

inline std::string format_rate(const std::optional<double> &v) {
  return v ? format_double(*v) : "NA";
}

inline std::string benchmark_to_tsv(const BenchmarkResult &result, const OutputContext &ctx) {
  std::string out = ctx.comment_line();
  out += "method\tmetric\tperiod\tmean\tsd\tcount\n";
  const auto row = [&](const char *method, const std::string &metric, const std::string &period,
                       const RateAggregate &agg) {
    out += std::string(method) + "\t" + metric + "\t" + period + "\t" + format_rate(agg.mean) +
           "\t" + format_double(agg.sd) + "\t" + std::to_string(agg.count) + "\n";
  };
  for (const auto &m : result.methods) {
    const char *name = benchmark_method_name(m.method);
    for (std::size_t pd = 0; pd < m.periods.size(); ++pd) {
      const std::string period = "t" + std::to_string(pd + 1) + "_t" + std::to_string(pd + 2);
      row(name, "fdr", period, m.periods[pd].fdr_realized);
      row(name, "sensitivity", period, m.periods[pd].sensitivity);
      row(name, "specificity", period, m.periods[pd].specificity);
      row(name, "mr", period, m.periods[pd].mr);
    }
    row(name, "smr", "all", m.smr);
  }
  return out;
}

inline std::string benchmark_raw_to_tsv(const BenchmarkResult &result, const OutputContext &ctx) {
  std::string out = ctx.comment_line();
  out += "replication\tmethod\tdataset_seed\tmetric\tperiod\tvalue\n";
  const auto row = [&](const ReplicationRecord &rec, const std::string &metric,
                       const std::string &period, const std::optional<double> &v) {
    out += std::to_string(rec.replication) + "\t" + benchmark_method_name(rec.method) + "\t" +
           std::to_string(rec.dataset_seed) + "\t" + metric + "\t" + period + "\t" +
           format_rate(v) + "\n";
  };
  for (const auto &rec : result.raw) {
    for (std::size_t pd = 0; pd < rec.metrics.periods.size(); ++pd) {
      const std::string period = "t" + std::to_string(pd + 1) + "_t" + std::to_string(pd + 2);
      row(rec, "fdr", period, rec.metrics.periods[pd].fdr_realized);
      row(rec, "sensitivity", period, rec.metrics.periods[pd].sensitivity);
      row(rec, "specificity", period, rec.metrics.periods[pd].specificity);
      row(rec, "mr", period, rec.metrics.periods[pd].mr);
    }
    row(rec, "smr", "all", rec.metrics.smr);
  }
  return out;
}

inline std::string trace_to_tsv(const FitReport &report, const OutputContext &ctx) {
  std::string out = ctx.comment_line();
  out += "iteration\tlog_likelihood\n";
  for (std::size_t i = 0; i < report.log_lik_trace.size(); ++i)
    out += std::to_string(i + 1) + "\t" + format_double(report.log_lik_trace[i]) + "\n";
  return out;
}

}  // namespace statepath::io
