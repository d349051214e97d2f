// Command-line front end: simulate / fit / infer / benchmark / export-plots.
// Flags win over STATEPATH_* environment variables, which win over --config
// JSON values, which win over built-in defaults. All outputs are written
// atomically after computation finishes, so errors never leave partial files.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "statepath/em.hpp"
#include "statepath/inference.hpp"
#include "statepath/io.hpp"
#include "statepath/math/normal.hpp"
#include "statepath/metrics.hpp"
#include "statepath/pairwise.hpp"
#include "statepath/simulate.hpp"
#include "statepath/version.hpp"

namespace statepath {

namespace {

std::vector<std::size_t> parse_reps(const std::string &spec) {
  std::vector<std::size_t> reps;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ','))
    reps.push_back(io::parse_index(item, "--reps"));
  return reps;
}

std::vector<std::string> split_commas(const std::string &spec) {
  std::vector<std::string> items;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) items.push_back(item);
  return items;
}

std::string join_path(const std::string &dir, const std::string &name) {
  return (std::filesystem::path(dir) / name).string();
}

void announce_outputs(const std::string &out_dir, std::initializer_list<const char *> names) {
  std::cout << "wrote";
  const char *sep = " ";
  for (const char *name : names) {
    std::cout << sep << join_path(out_dir, name);
    sep = ", ";
  }
  std::cout << "\n";
}

// Apply a JSON config file as option defaults: every key must name a long
// option of the subcommand ('_' and '-' are interchangeable); values given on
// the command line or via environment still win.
void apply_config_defaults(CLI::App *cmd, const std::string &config_path) {
  std::ifstream in(config_path);
  if (!in) throw CLI::ValidationError("--config", "cannot open: " + config_path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const std::exception &e) {
    throw CLI::ValidationError(config_path + ": " + e.what());
  }
  if (!j.is_object()) throw CLI::ValidationError("config must be a JSON object");
  for (const auto &item : j.items()) {
    std::string flag = item.key();
    for (char &c : flag) c = c == '_' ? '-' : c;
    CLI::Option *opt = nullptr;
    try {
      opt = cmd->get_option("--" + flag);
    } catch (const CLI::OptionNotFound &) {
      throw CLI::ValidationError("unknown key '" + item.key() + "'");
    }
    const nlohmann::json &v = item.value();
    opt->default_val(v.is_string() ? v.get<std::string>() : v.dump());
  }
}

// Shared wiring: register --config on a subcommand and resolve it before the
// other options are parsed.
void add_config_option(CLI::App *cmd) {
  auto *opt = cmd->add_option("--config", "JSON file with option defaults (flags and env win)")
                  ->option_text("FILE");
  opt->each([cmd](const std::string &path) { apply_config_defaults(cmd, path); });
  opt->trigger_on_parse();
}

struct CommonFitOptions {
  std::string order = "first";
  double rel_tol = 1e-6;
  int max_iters = 500;
  int threads = 1;
  bool deterministic_reduction = true;
  int multi_start = 0;
  std::uint64_t multi_start_seed = 0;

  FitConfig to_config() const {
    FitConfig c;
    c.rel_tol = rel_tol;
    c.max_iters = max_iters;
    c.threads = threads;
    c.deterministic_reduction = deterministic_reduction;
    c.multi_start = multi_start;
    c.multi_start_seed = multi_start_seed;
    return c;
  }
};

void add_fit_options(CLI::App *cmd, CommonFitOptions &opts, bool with_order = true) {
  if (with_order)
    cmd->add_option("--order", opts.order, "state model order: zero | first | full")
        ->envname("STATEPATH_ORDER")
        ->check(CLI::IsMember({"zero", "first", "full"}))
        ->capture_default_str();
  cmd->add_option("--rel-tol", opts.rel_tol, "relative log-likelihood convergence tolerance")
      ->envname("STATEPATH_REL_TOL")
      ->capture_default_str();
  cmd->add_option("--max-iters", opts.max_iters, "EM iteration cap")
      ->envname("STATEPATH_MAX_ITERS")
      ->capture_default_str();
  cmd->add_option("--threads", opts.threads, "worker threads for per-gene passes")
      ->envname("STATEPATH_THREADS")
      ->capture_default_str();
  cmd->add_option("--deterministic-reduction", opts.deterministic_reduction,
                  "fixed-order reductions (always enabled; accepted for config compatibility)")
      ->capture_default_str();
  cmd->add_option("--multi-start", opts.multi_start, "extra perturbed EM starts")
      ->capture_default_str();
  cmd->add_option("--multi-start-seed", opts.multi_start_seed, "seed for perturbed starts")
      ->capture_default_str();
}

int run_simulate(const std::string &out_dir, std::size_t genes, const std::string &reps,
                 const std::string &labels, std::uint64_t seed,
                 const std::string &params_path, double first_mean, double first_sd) {
  ModelParams params =
      params_path.empty() ? default_simulation_params() : io::read_params(params_path);
  std::vector<std::string> label_list;
  if (!labels.empty()) label_list = split_commas(labels);
  const Design design(parse_reps(reps), std::move(label_list));
  if (design.T != params.state.T)
    throw std::invalid_argument("simulate: --reps has " + std::to_string(design.T) +
                                " time points but params expect " +
                                std::to_string(params.state.T));
  SimulationConfig sim;
  sim.first_level_mean = first_mean;
  sim.first_level_sd = first_sd;
  const auto [ds, truth] = simulate_dataset(params, genes, design, seed, sim);

  io::OutputContext ctx{"simulate", seed};
  io::write_dataset(join_path(out_dir, "data.tsv"), join_path(out_dir, "design.tsv"), ds, ctx);
  io::write_text_atomic(join_path(out_dir, "truth.tsv"),
                        io::truth_to_tsv(truth, ds.gene_ids, ctx));
  io::write_params(join_path(out_dir, "params_used.json"), params, ctx);
  std::cout << "simulate: " << genes << " genes, T=" << design.T << ", seed=" << seed << "\n";
  announce_outputs(out_dir, {"data.tsv", "design.tsv", "truth.tsv", "params_used.json"});
  return 0;
}

int run_fit(const std::string &data, const std::string &design_path, const std::string &out_dir,
            const CommonFitOptions &opts) {
  const ExpressionDataset ds = io::ingest_tsv(data, design_path);
  const MarkovOrder order = markov_order_from_name(opts.order);
  const FitReport report = fit(ds, order, opts.to_config());

  io::OutputContext ctx{"fit", std::nullopt};
  io::write_params(join_path(out_dir, "params.json"), report.params, ctx);
  io::write_text_atomic(join_path(out_dir, "trace.tsv"), io::trace_to_tsv(report, ctx));
  nlohmann::json summary;
  summary["artifact"] = {{"version", kVersion}, {"command", "fit"}};
  summary["order"] = opts.order;
  summary["genes"] = ds.gene_count();
  summary["time_points"] = ds.design.T;
  summary["iterations"] = report.iterations;
  summary["converged"] = report.converged;
  summary["log_likelihood"] = report.log_lik_trace.back();
  summary["sigma2"] = report.params.obs.sigma2;
  io::write_text_atomic(join_path(out_dir, "summary.json"), summary.dump(2) + "\n");
  std::cout << "fit: " << ds.gene_count() << " genes, T=" << ds.design.T
            << ", order=" << opts.order << "\n"
            << "fit: " << (report.converged ? "converged" : "iteration cap reached") << " after "
            << report.iterations << " iterations, log-likelihood "
            << io::format_double(report.log_lik_trace.back()) << "\n";
  announce_outputs(out_dir, {"params.json", "trace.tsv", "summary.json"});
  return 0;
}

int run_infer(const std::string &data, const std::string &design_path,
              const std::string &params_path, const std::string &out_dir,
              const std::string &criterion_name, int threads) {
  const ExpressionDataset ds = io::ingest_tsv(data, design_path);
  const ModelParams params = io::read_params(params_path);
  const CallCriterion criterion = call_criterion_from_name(criterion_name);
  const SufficientStats stats = compute_sufficient_stats(ds);
  const std::vector<GenePosterior> posteriors = e_step(stats, params, threads);
  CallSet cs = criterion == CallCriterion::MMP ? call_mmp(posteriors) : call_mjp(posteriors);
  cs = estimate_fdr(std::move(cs), posteriors);
  cs.clusters = cluster_by_path(cs);
  const std::vector<PosteriorCurve> curves =
      compute_posterior_curves(stats, params, posteriors, threads);

  io::OutputContext ctx{"infer", std::nullopt};
  io::write_text_atomic(join_path(out_dir, "calls.tsv"),
                        io::calls_to_tsv(cs, ds.gene_ids, posteriors, ctx));
  io::write_text_atomic(join_path(out_dir, "fdr.json"), io::fdr_to_json(cs, ctx));
  io::write_text_atomic(join_path(out_dir, "clusters.tsv"),
                        io::clusters_to_tsv(cs.clusters, ctx));
  io::write_text_atomic(join_path(out_dir, "curves.tsv"),
                        io::curves_to_tsv(curves, ds.gene_ids, ctx));
  std::size_t tde = 0;
  for (const auto &c : cs.calls) tde += c.tde;
  std::cout << "infer: " << ds.gene_count() << " genes, criterion=" << criterion_name << ", "
            << tde << " called TDE, " << cs.clusters.size() << " clusters\n";
  announce_outputs(out_dir, {"calls.tsv", "fdr.json", "clusters.tsv", "curves.tsv"});
  return 0;
}

int run_benchmark_cmd(const std::string &out_dir, std::size_t replications, std::size_t genes,
                      const std::string &reps, std::uint64_t seed, const std::string &methods,
                      const std::string &criterion_name, const std::string &params_path,
                      const CommonFitOptions &opts) {
  BenchmarkConfig config;
  config.replications = replications;
  config.G = genes;
  config.design = Design(parse_reps(reps));
  if (!params_path.empty()) config.sim_params = io::read_params(params_path);
  config.seed = seed;
  config.criterion = call_criterion_from_name(criterion_name);
  config.fit = opts.to_config();
  config.methods.clear();
  for (const std::string &name : split_commas(methods))
    config.methods.push_back(benchmark_method_from_name(name));

  const BenchmarkResult result = run_benchmark(config);
  io::OutputContext ctx{"benchmark", seed};
  io::write_text_atomic(join_path(out_dir, "benchmark.tsv"), io::benchmark_to_tsv(result, ctx));
  io::write_text_atomic(join_path(out_dir, "benchmark_raw.tsv"),
                        io::benchmark_raw_to_tsv(result, ctx));
  std::cout << "benchmark: " << replications << " replications x " << methods << ", G=" << genes
            << "\n";
  for (const auto &m : result.methods)
    std::cout << "benchmark: smr[" << benchmark_method_name(m.method)
              << "] = " << io::format_rate(m.smr.mean) << " (sd "
              << io::format_double(m.smr.sd) << ")\n";
  announce_outputs(out_dir, {"benchmark.tsv", "benchmark_raw.tsv"});
  return 0;
}

int run_export_plots(const std::string &data, const std::string &design_path,
                     const std::string &params_path, const std::string &out_dir,
                     const std::string &criterion_name, int grid_points, int threads) {
  const ExpressionDataset ds = io::ingest_tsv(data, design_path);
  const ModelParams params = io::read_params(params_path);
  const SufficientStats stats = compute_sufficient_stats(ds);
  const std::vector<GenePosterior> posteriors = e_step(stats, params, threads);
  CallSet cs = call_criterion_from_name(criterion_name) == CallCriterion::MMP
                   ? call_mmp(posteriors)
                   : call_mjp(posteriors);
  cs.clusters = cluster_by_path(cs);
  const std::vector<PosteriorCurve> curves =
      compute_posterior_curves(stats, params, posteriors, threads);

  io::OutputContext ctx{"export-plots", std::nullopt};
  // Fitted population densities of the per-period changes (truncated normals).
  std::string densities = ctx.comment_line();
  densities += "period\tdirection\tx\tdensity\n";
  for (std::size_t pd = 0; pd < params.mean.periods(); ++pd) {
    for (int dir = 0; dir < 2; ++dir) {
      const bool up = dir == 0;
      const double eta = up ? params.mean.eta_up[pd] : params.mean.eta_down[pd];
      const double tau = up ? params.mean.tau_up[pd] : params.mean.tau_down[pd];
      const double norm = math::norm_cdf((up ? 1.0 : -1.0) * eta / tau);
      for (int i = 0; i < grid_points; ++i) {
        const double x = -5.0 + 10.0 * static_cast<double>(i) /
                                    static_cast<double>(grid_points - 1);
        const bool in_support = up ? x > 0.0 : x < 0.0;
        const double density =
            in_support ? math::norm_pdf((x - eta) / tau) / (tau * norm) : 0.0;
        densities += "t" + std::to_string(pd + 1) + "_t" + std::to_string(pd + 2) + "\t" +
                     (up ? "up" : "down") + "\t" + io::format_double(x) + "\t" +
                     io::format_double(density) + "\n";
      }
    }
  }
  io::write_text_atomic(join_path(out_dir, "densities.tsv"), densities);

  // Cluster-average posterior mean curves, shifted to start at zero.
  std::string cluster_curves = ctx.comment_line();
  cluster_curves += "rank\tpath\tsize\ttime_index\tmean\n";
  for (std::size_t rank = 0; rank < cs.clusters.size(); ++rank) {
    const ClusterEntry &e = cs.clusters[rank];
    std::vector<double> avg(ds.design.T, 0.0);
    for (std::size_t g : e.genes)
      for (std::size_t t = 0; t < ds.design.T; ++t) avg[t] += curves[g].mean[t];
    for (std::size_t t = 0; t < ds.design.T; ++t) avg[t] /= static_cast<double>(e.genes.size());
    for (std::size_t t = 0; t < ds.design.T; ++t)
      cluster_curves += std::to_string(rank + 1) + "\t" + e.path_string + "\t" +
                        std::to_string(e.genes.size()) + "\t" + std::to_string(t + 1) + "\t" +
                        io::format_double(avg[t] - avg[0]) + "\n";
  }
  io::write_text_atomic(join_path(out_dir, "cluster_curves.tsv"), cluster_curves);
  std::cout << "export-plots: " << cs.clusters.size() << " clusters, "
            << params.mean.periods() << " periods\n";
  announce_outputs(out_dir, {"densities.tsv", "cluster_curves.tsv"});
  return 0;
}

}  // namespace

int cli_main(int argc, char **argv) {
  CLI::App app{"Hierarchical state-path analysis of short expression time courses"};
  app.set_version_flag("--version", std::string("statepath ") + kVersion);
  app.require_subcommand(1);

  // simulate ----------------------------------------------------------------
  auto *sim = app.add_subcommand("simulate", "generate a synthetic dataset with known truth");
  std::string sim_out, sim_reps = "4,4,4,4", sim_labels, sim_params;
  std::size_t sim_genes = 4000;
  std::uint64_t sim_seed = 0;
  double sim_first_mean = 7.0, sim_first_sd = 2.0;
  sim->add_option("--out-dir", sim_out, "output directory")->required();
  sim->add_option("--genes", sim_genes, "number of genes")->capture_default_str();
  sim->add_option("--reps", sim_reps, "replicates per time point, comma separated")
      ->capture_default_str();
  sim->add_option("--labels", sim_labels, "time point labels, comma separated");
  sim->add_option("--seed", sim_seed, "random seed")
      ->envname("STATEPATH_SEED")
      ->capture_default_str();
  sim->add_option("--params", sim_params, "model params JSON (default: built-in first-order)");
  sim->add_option("--first-level-mean", sim_first_mean, "mean of first-time-point levels")
      ->capture_default_str();
  sim->add_option("--first-level-sd", sim_first_sd, "sd of first-time-point levels")
      ->capture_default_str();
  add_config_option(sim);

  // fit ---------------------------------------------------------------------
  auto *fit_cmd = app.add_subcommand("fit", "estimate model parameters by EM");
  std::string fit_data, fit_design, fit_out;
  CommonFitOptions fit_opts;
  fit_cmd->add_option("--data", fit_data, "expression TSV")->required();
  fit_cmd->add_option("--design", fit_design, "design TSV")->required();
  fit_cmd->add_option("--out-dir", fit_out, "output directory")->required();
  add_fit_options(fit_cmd, fit_opts);
  add_config_option(fit_cmd);

  // infer ---------------------------------------------------------------------
  auto *infer_cmd = app.add_subcommand("infer", "decode states and summarize posteriors");
  std::string inf_data, inf_design, inf_params, inf_out, inf_criterion = "mmp";
  int inf_threads = 1;
  infer_cmd->add_option("--data", inf_data, "expression TSV")->required();
  infer_cmd->add_option("--design", inf_design, "design TSV")->required();
  infer_cmd->add_option("--params", inf_params, "fitted params JSON")->required();
  infer_cmd->add_option("--out-dir", inf_out, "output directory")->required();
  infer_cmd->add_option("--criterion", inf_criterion, "decoding criterion: mmp | mjp")
      ->envname("STATEPATH_CRITERION")
      ->check(CLI::IsMember({"mmp", "mjp"}))
      ->capture_default_str();
  infer_cmd->add_option("--threads", inf_threads, "worker threads")
      ->envname("STATEPATH_THREADS")
      ->capture_default_str();
  add_config_option(infer_cmd);

  // benchmark -----------------------------------------------------------------
  auto *bench = app.add_subcommand("benchmark", "replicated simulation comparison of methods");
  std::string bench_out, bench_reps = "4,4,4,4", bench_methods = "first,zero,pairwise";
  std::string bench_criterion = "mmp", bench_params;
  std::size_t bench_replications = 10, bench_genes = 4000;
  std::uint64_t bench_seed = 0;
  CommonFitOptions bench_opts;
  bench->add_option("--out-dir", bench_out, "output directory")->required();
  bench->add_option("--replications", bench_replications, "number of simulated datasets")
      ->capture_default_str();
  bench->add_option("--genes", bench_genes, "genes per dataset")->capture_default_str();
  bench->add_option("--reps", bench_reps, "replicates per time point, comma separated")
      ->capture_default_str();
  bench->add_option("--seed", bench_seed, "master seed")
      ->envname("STATEPATH_SEED")
      ->capture_default_str();
  bench->add_option("--methods", bench_methods, "subset of first,zero,pairwise")
      ->capture_default_str();
  bench->add_option("--criterion", bench_criterion, "decoding criterion: mmp | mjp")
      ->envname("STATEPATH_CRITERION")
      ->check(CLI::IsMember({"mmp", "mjp"}))
      ->capture_default_str();
  bench->add_option("--params", bench_params, "simulation params JSON (default: built-in)");
  add_fit_options(bench, bench_opts, /*with_order=*/false);
  add_config_option(bench);

  // export-plots ----------------------------------------------------------------
  auto *plots = app.add_subcommand("export-plots", "plot-ready density and cluster curves");
  std::string pl_data, pl_design, pl_params, pl_out, pl_criterion = "mmp";
  int pl_grid = 401, pl_threads = 1;
  plots->add_option("--data", pl_data, "expression TSV")->required();
  plots->add_option("--design", pl_design, "design TSV")->required();
  plots->add_option("--params", pl_params, "fitted params JSON")->required();
  plots->add_option("--out-dir", pl_out, "output directory")->required();
  plots->add_option("--criterion", pl_criterion, "decoding criterion: mmp | mjp")
      ->check(CLI::IsMember({"mmp", "mjp"}))
      ->capture_default_str();
  plots->add_option("--grid-points", pl_grid, "density grid resolution")
      ->check(CLI::Range(2, 100000))
      ->capture_default_str();
  plots->add_option("--threads", pl_threads, "worker threads")
      ->envname("STATEPATH_THREADS")
      ->capture_default_str();
  add_config_option(plots);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    return app.exit(e);
  }

  try {
    if (sim->parsed())
      return run_simulate(sim_out, sim_genes, sim_reps, sim_labels, sim_seed, sim_params,
                          sim_first_mean, sim_first_sd);
    if (fit_cmd->parsed()) return run_fit(fit_data, fit_design, fit_out, fit_opts);
    if (infer_cmd->parsed())
      return run_infer(inf_data, inf_design, inf_params, inf_out, inf_criterion, inf_threads);
    if (bench->parsed())
      return run_benchmark_cmd(bench_out, bench_replications, bench_genes, bench_reps,
                               bench_seed, bench_methods, bench_criterion, bench_params,
                               bench_opts);
    if (plots->parsed())
      return run_export_plots(pl_data, pl_design, pl_params, pl_out, pl_criterion, pl_grid,
                              pl_threads);
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace statepath

int main(int argc, char **argv) { return statepath::cli_main(argc, argv); }
