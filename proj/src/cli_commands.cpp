#include "rollgate/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "rollgate/divergence.hpp"
#include "rollgate/gate.hpp"
#include "rollgate/simenv.hpp"
#include "rollgate/stats.hpp"

namespace rollgate::cli {

namespace {

namespace fs = std::filesystem;

std::string fmt_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string opt_g(const std::optional<double>& v) { return v ? fmt_g(*v) : ""; }

core::Corpus load_corpus_checked(const std::string& path) {
  if (!report::file_exists(path))
    throw report::IoError("missing input: " + path + " (run the rollout step first)");
  return core::read_corpus(path);
}

report::FileStamp stamp_of(const core::Corpus& corpus, const std::string& path) {
  if (!corpus.header)
    throw report::ValidationError("corpus has no header stamp: " + path);
  return {corpus.header->config_hash, corpus.header->seed};
}

report::RunPaths prepare_run_dir(const std::string& out_dir) {
  fs::create_directories(out_dir);
  return report::RunPaths{out_dir};
}

std::vector<int> with_value(std::vector<int> grid, int value) {
  if (std::find(grid.begin(), grid.end(), value) == grid.end()) grid.push_back(value);
  std::sort(grid.begin(), grid.end());
  return grid;
}

std::string csv_safe(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  return s;
}

}  // namespace

config::AppConfig resolve_config(const std::optional<std::string>& config_path,
                                 const FlagOverrides& overrides) {
  config::AppConfig cfg;
  if (config_path) {
    if (!report::file_exists(*config_path))
      throw report::IoError("config file not found: " + *config_path);
    cfg = config::load_config(*config_path);
  }
  if (overrides.n_groups) cfg.run.n_groups = *overrides.n_groups;
  if (overrides.g) cfg.run.g = *overrides.g;
  if (overrides.t_max) cfg.run.t_max = *overrides.t_max;
  if (overrides.k) cfg.run.k = *overrides.k;
  if (overrides.d_l) cfg.run.d_l = *overrides.d_l;
  if (overrides.tau_h) cfg.run.tau_h = *overrides.tau_h;
  if (overrides.epsilon) cfg.run.epsilon = *overrides.epsilon;
  if (overrides.seed) cfg.run.seed = *overrides.seed;
  if (overrides.seeds) cfg.seeds = *overrides.seeds;
  config::validate(cfg);
  return cfg;
}

void cmd_rollout(const config::AppConfig& cfg, const std::string& out_dir) {
  const report::RunPaths paths = prepare_run_dir(out_dir);
  config::RunLock lock(out_dir);
  config::write_resolved(paths.config_resolved(), cfg);

  simenv::CorpusSpec spec;
  spec.g = cfg.run.g;
  spec.t_max = cfg.run.t_max;
  spec.n_groups = cfg.run.n_groups;
  spec.seed = cfg.run.seed;
  const auto groups = simenv::generate_corpus(spec);

  core::CorpusHeader header;
  header.config_hash = config::config_hash(cfg);
  header.seed = cfg.run.seed;
  core::write_corpus(paths.corpus(), header, groups);

  int n_zv = 0;
  for (const auto& group : groups) n_zv += core::zero_variance(group.label) ? 1 : 0;
  std::cout << "wrote " << groups.size() << " groups (" << n_zv << " zero-variance) to "
            << paths.corpus() << "\nconfig_hash " << header.config_hash << ", seed "
            << header.seed << "\n";
}

void cmd_signals(const std::vector<int>& k_grid, const std::string& out_dir) {
  const report::RunPaths paths = prepare_run_dir(out_dir);
  config::RunLock lock(out_dir);
  core::Corpus corpus = load_corpus_checked(paths.corpus());
  const report::FileStamp stamp = stamp_of(corpus, paths.corpus());

  divergence::annotate_corpus(corpus.groups, k_grid);

  core::CorpusHeader header;
  header.config_hash = stamp.config_hash;
  header.seed = stamp.seed;
  core::write_corpus(paths.corpus(), header, corpus.groups);

  std::string ks;
  for (const int k : k_grid) ks += (ks.empty() ? "" : ",") + std::to_string(k);
  std::cout << "annotated " << corpus.groups.size() << " groups with divergence at K={" << ks
            << "}\n";
}

void cmd_sweep(const config::AppConfig& cfg, const SweepOptions& options,
               const std::string& out_dir) {
  const report::RunPaths paths = prepare_run_dir(out_dir);
  config::RunLock lock(out_dir);
  core::Corpus corpus = load_corpus_checked(paths.corpus());
  const report::FileStamp stamp = stamp_of(corpus, paths.corpus());

  std::vector<int> k_grid = options.k_grid.empty() ? std::vector<int>{cfg.run.k} : options.k_grid;
  k_grid = with_value(std::move(k_grid), cfg.run.k);
  std::vector<double> d_l_grid = options.d_l_grid;
  if (d_l_grid.empty()) d_l_grid = {0.05, 0.08, 0.10, 0.12, 0.14, 0.18};
  if (std::find(d_l_grid.begin(), d_l_grid.end(), cfg.run.d_l) == d_l_grid.end())
    d_l_grid.push_back(cfg.run.d_l);
  std::sort(d_l_grid.begin(), d_l_grid.end());

  divergence::annotate_corpus(corpus.groups, k_grid);
  int n_zv = 0;
  for (const auto& group : corpus.groups) n_zv += core::zero_variance(group.label) ? 1 : 0;

  std::vector<std::string> csv_rows;
  for (const int k : k_grid) {
    const auto rows = gate::sweep(corpus.groups, k, d_l_grid);
    for (const auto& row : rows) {
      std::ostringstream line;
      line << k << ',' << fmt_g(row.d_l) << ',' << row.cut << ',' << row.tp << ',' << row.fp
           << ',' << opt_g(row.precision) << ',' << fmt_g(row.recall) << ','
           << fmt_g(row.safe_pct) << ',' << fmt_g(row.raw_pct);
      csv_rows.push_back(line.str());
    }
    std::cout << report::sweep_text(rows, cfg.run.d_l, options.precision_floor, k,
                                    static_cast<int>(corpus.groups.size()), n_zv)
              << "\n";
  }
  report::write_csv(paths.sweep_csv(), stamp,
                    "K,d_L,cut,TP,FP,precision,recall,safe_pct,raw_pct", csv_rows);

  gate::ArmTableConfig arm_cfg;
  arm_cfg.k = cfg.run.k;
  arm_cfg.d_l = cfg.run.d_l;
  arm_cfg.tau_h = cfg.run.tau_h.value_or(0.90);
  arm_cfg.epsilon = cfg.run.epsilon;
  arm_cfg.seed = stamp.seed;
  const auto arms = gate::arms_table(corpus.groups, arm_cfg);
  std::vector<std::string> arm_rows;
  for (const auto& row : arms) {
    std::ostringstream line;
    line << row.arm << ',' << row.cut << ',' << row.tp << ',' << row.fp << ','
         << opt_g(row.precision) << ',' << fmt_g(row.rollout_saved_actual_pct) << ','
         << fmt_g(row.rollout_saved_tmax_pct) << ',' << fmt_g(row.l2_preserved_pct);
    arm_rows.push_back(line.str());
  }
  report::write_csv(paths.arms_csv(), stamp,
                    "arm,cut,TP,FP,precision,rollout_saved_actual_pct,rollout_saved_tmax_pct,"
                    "l2_preserved_pct",
                    arm_rows);
  std::cout << report::arms_text(arms) << "\n";

  std::vector<double> mirror_d;
  for (double d = 0.02; d <= 0.30 + 1e-9; d += 0.02) mirror_d.push_back(d);
  const std::vector<double> mirror_t = {0.0, 0.05, 0.10, 0.15};
  const auto mirror = gate::low_tau_sweep(corpus.groups, k_grid, mirror_d, mirror_t);
  std::vector<std::string> mirror_rows;
  for (const auto& point : mirror) {
    std::ostringstream line;
    line << point.k << ',' << fmt_g(point.d_l) << ',' << fmt_g(point.t_l) << ',' << point.cut
         << ',' << point.tp << ',' << point.fp << ',' << opt_g(point.precision);
    mirror_rows.push_back(line.str());
  }
  report::write_csv(paths.mirror_csv(), stamp, "K,d_L,t_L,cut,TP,FP,precision", mirror_rows);
  std::cout << report::mirror_text(mirror, options.precision_floor);
}

void cmd_correlate(const config::AppConfig& cfg, const CorrelateOptions& options,
                   const std::string& out_dir) {
  const report::RunPaths paths = prepare_run_dir(out_dir);
  config::RunLock lock(out_dir);
  core::Corpus corpus = load_corpus_checked(paths.corpus());
  const report::FileStamp stamp = stamp_of(corpus, paths.corpus());

  const std::vector<int> k_grid = with_value(options.k_grid, cfg.run.k);
  divergence::annotate_corpus(corpus.groups, k_grid);

  const auto cells = stats::heatmap(corpus.groups, k_grid, options.flip_auroc);
  std::vector<std::string> rows;
  for (const auto& cell : cells) {
    std::ostringstream line;
    line << cell.metric << ',' << cell.k << ',' << opt_g(cell.spearman_rho) << ','
         << opt_g(cell.p_value) << ',' << opt_g(cell.auroc) << ',' << cell.n;
    rows.push_back(line.str());
  }
  report::write_csv(paths.heatmap_csv(), stamp, "metric,K,spearman_rho,p_value,auroc,n", rows);
  std::cout << report::heatmap_text(cells, k_grid) << "\n";

  const auto table = stats::per_type_breakdown(corpus.groups, cfg.run.k, k_grid,
                                               options.flip_auroc);
  std::vector<std::string> type_rows;
  for (const auto& row : table.rows) {
    std::ostringstream line;
    line << row.task_type << ',' << row.n << ',' << row.n_zero_variance << ','
         << opt_g(row.auroc_at_k) << ',' << row.best_metric << ',' << row.best_k << ','
         << opt_g(row.best_auroc) << ',' << (row.single_observation ? 1 : 0) << ','
         << (row.skipped ? 1 : 0) << ',' << csv_safe(row.note);
    type_rows.push_back(line.str());
  }
  report::write_csv(paths.per_type_csv(), stamp,
                    "task_type,n,n_zv,auroc_at_k,best_metric,best_k,best_auroc,"
                    "single_observation,skipped,note",
                    type_rows);
  std::cout << report::per_type_text(table, cfg.run.k);
}

void cmd_abtest(const config::AppConfig& cfg, const AbOptions& options,
                const std::string& out_dir) {
  const report::RunPaths paths = prepare_run_dir(out_dir);
  config::RunLock lock(out_dir);
  config::write_resolved(paths.config_resolved(), cfg);

  simenv::CorpusSpec spec;
  spec.g = cfg.run.g;
  spec.t_max = cfg.run.t_max;
  spec.n_groups = cfg.run.n_groups;
  spec.seed = cfg.run.seed;

  simenv::GateSupervisorConfig gate_cfg;
  gate_cfg.k = cfg.run.k;
  gate_cfg.d_l = cfg.run.d_l;
  gate_cfg.tau_h = cfg.run.tau_h;

  auto baseline = simenv::generate_corpus(spec);
  const std::vector<int> k_only = {cfg.run.k};
  divergence::annotate_corpus(baseline, k_only);
  const auto gated = simenv::generate_supervised_corpus(spec, gate_cfg);

  core::CorpusHeader header;
  header.config_hash = config::config_hash(cfg);
  header.seed = cfg.run.seed;
  core::write_corpus(paths.abtest_baseline(), header, baseline);
  core::write_corpus(paths.abtest_gated(), header, gated);

  const auto ab = report::ab_summary(baseline, gated, cfg.run.k, options.bootstrap_resamples,
                                     options.level, cfg.run.seed);

  std::vector<std::string> rows;
  for (std::size_t i = 0; i < baseline.size(); ++i) {
    std::ostringstream line;
    line << baseline[i].prompt_id << ',' << baseline[i].task_type << ','
         << core::step_tokens(baseline[i]) << ',' << core::step_tokens(gated[i]) << ','
         << (gated[i].is_cut ? 1 : 0) << ','
         << (gated[i].gate ? core::to_string(gated[i].gate->clause) : "none") << ','
         << core::to_string(baseline[i].label);
    rows.push_back(line.str());
  }
  report::write_csv(
      paths.abtest_csv(), {header.config_hash, header.seed},
      "prompt_id,task_type,baseline_steps,gated_steps,cut,clause,baseline_label", rows);

  std::cout << report::ab_text(ab);
}

namespace {

void train_tier2(const config::AppConfig& cfg, const TrainOptions& options,
                 const report::RunPaths& paths) {
  core::Corpus corpus = load_corpus_checked(paths.corpus());
  const report::FileStamp stamp = stamp_of(corpus, paths.corpus());
  const std::vector<int> k_only = {cfg.run.k};
  divergence::annotate_corpus(corpus.groups, k_only);

  toytrain::Tier2Config t2;
  t2.k = cfg.run.k;
  t2.d_l = cfg.run.d_l;
  t2.epsilon = cfg.run.epsilon;
  t2.learning_rate = cfg.learning_rate;
  t2.temperature = cfg.temp_rollout;
  t2.seed = cfg.run.seed;
  const auto result = toytrain::run_tier2(corpus.groups, t2, options.arms);

  std::vector<std::string> rows;
  for (const auto& row : result.rows) {
    std::ostringstream line;
    line << row.step << ',' << row.arm << ',' << row.groups_sampled << ',' << row.groups_trained
         << ',' << row.cut_count << ',' << row.items << ',' << fmt_g(row.loss) << ','
         << fmt_g(row.gradient_l2) << ',' << fmt_g(row.zero_advantage_fraction);
    rows.push_back(line.str());
  }
  report::write_csv(paths.tier2_csv(), stamp,
                    "step,arm,groups_sampled,groups_trained,cut_count,items,loss,gradient_l2,"
                    "zero_advantage_fraction",
                    rows);
  std::cout << report::tier2_text(result, t2.position_cap);
}

void train_tier3(const config::AppConfig& cfg, const TrainOptions& options,
                 const report::RunPaths& paths) {
  if (options.arms != toytrain::ArmSelect::both)
    std::cerr << "note: tier 3 arms are paired by construction; running both\n";
  config::write_resolved(paths.config_resolved(), cfg);

  toytrain::Tier3Config t3;
  t3.g = cfg.run.g;
  t3.t_max = cfg.run.t_max;
  t3.k = cfg.run.k;
  t3.d_l = cfg.run.d_l;
  t3.tau_h = cfg.run.tau_h;
  t3.epsilon = cfg.run.epsilon;
  t3.learning_rate = cfg.learning_rate;
  t3.temp_rollout = cfg.temp_rollout;
  t3.seeds = cfg.seeds;
  const auto result = toytrain::run_tier3(t3);

  const report::FileStamp stamp{config::config_hash(cfg), cfg.run.seed};
  report::write_telemetry(paths.tier3_telemetry(), stamp, result.rows);

  std::vector<std::string> rows;
  for (const auto& s : result.summaries) {
    std::ostringstream line;
    line << s.seed << ',' << s.arm << ',' << s.step_tokens_total << ',' << s.cut_total << ','
         << fmt_g(s.final_heldout_success) << ',' << fmt_g(s.mean_gradient_l2);
    rows.push_back(line.str());
  }
  // The dilution line rides along as a comment so the report can rebuild
  // the consistency check without the telemetry file.
  std::ostringstream dilution;
  dilution << "# dilution z_base=" << fmt_g(result.dilution.z_base)
           << " z_gated=" << fmt_g(result.dilution.z_gated)
           << " predicted=" << fmt_g(result.dilution.predicted_ratio)
           << " measured=" << fmt_g(result.dilution.measured_ratio);
  std::ofstream out(paths.tier3_summary_csv());
  if (!out) throw report::IoError("cannot open for writing: " + paths.tier3_summary_csv());
  out << report::stamp_line(stamp) << '\n'
      << dilution.str() << '\n'
      << "seed,arm,step_tokens_total,cut_total,final_heldout_success,mean_gradient_l2\n";
  for (const auto& row : rows) out << row << '\n';
  if (!out) throw report::IoError("write failed: " + paths.tier3_summary_csv());

  std::cout << report::tier3_text(result);
}

}  // namespace

void cmd_train(const config::AppConfig& cfg, const TrainOptions& options,
               const std::string& out_dir) {
  const report::RunPaths paths = prepare_run_dir(out_dir);
  config::RunLock lock(out_dir);
  if (options.tier == 2) train_tier2(cfg, options, paths);
  else if (options.tier == 3) train_tier3(cfg, options, paths);
  else throw std::invalid_argument("train: tier must be 2 or 3");
}

void cmd_bootstrap(const config::AppConfig& cfg, const BootstrapOptions& options,
                   const std::string& out_dir) {
  const report::RunPaths paths = prepare_run_dir(out_dir);
  config::RunLock lock(out_dir);
  if (!report::file_exists(paths.abtest_baseline()) ||
      !report::file_exists(paths.abtest_gated()))
    throw report::IoError("missing A/B corpora in " + out_dir + " (run the abtest step first)");
  const core::Corpus baseline = core::read_corpus(paths.abtest_baseline());
  const core::Corpus gated = core::read_corpus(paths.abtest_gated());
  const report::FileStamp stamp = stamp_of(baseline, paths.abtest_baseline());
  const report::FileStamp gated_stamp = stamp_of(gated, paths.abtest_gated());
  if (stamp.config_hash != gated_stamp.config_hash)
    throw report::ValidationError("A/B corpora carry different config hashes: " +
                                  stamp.config_hash + " vs " + gated_stamp.config_hash);

  const auto ab = report::ab_summary(baseline.groups, gated.groups, cfg.run.k,
                                     options.resamples, options.level, cfg.run.seed);
  std::ostringstream row;
  row << "step_token_saving_pct," << fmt_g(ab.saving_ci.point_estimate) << ','
      << fmt_g(ab.saving_ci.ci_low) << ',' << fmt_g(ab.saving_ci.ci_high) << ','
      << ab.saving_ci.resamples << ',' << fmt_g(ab.saving_ci.level) << ',' << ab.saving_ci.seed;
  const std::vector<std::string> rows = {row.str()};
  report::write_csv(paths.bootstrap_csv(), stamp,
                    "statistic,point_estimate,ci_low,ci_high,resamples,level,seed", rows);

  std::cout << "step-token saving " << report::fixed(ab.saving_ci.point_estimate, 2) << "%, "
            << report::fixed(100.0 * options.level, 0) << "% CI ["
            << report::fixed(ab.saving_ci.ci_low, 2) << ", "
            << report::fixed(ab.saving_ci.ci_high, 2) << "]% over " << options.resamples
            << " task resamples\n";
}

report::BundleResult cmd_report(const config::AppConfig& cfg, const std::string& out_dir) {
  const report::RunPaths paths = prepare_run_dir(out_dir);
  config::RunLock lock(out_dir);

  report::BundleOptions options;
  options.k = cfg.run.k;
  options.chosen_d_l = cfg.run.d_l;
  options.tau_h = cfg.run.tau_h;
  options.epsilon = cfg.run.epsilon;
  options.seed = cfg.run.seed;
  const auto result = report::assemble(paths, options);

  std::ifstream in(result.report_path);
  std::cout << in.rdbuf();
  std::cout << "\nwrote " << result.report_path << " and " << result.manifest_path << "\n";
  return result;
}

// --- argv front end -----------------------------------------------------------

int run(std::vector<std::string> args) {
  CLI::App app{"selective-rollout gating engine for group-relative policy optimization"};
  app.require_subcommand(1);

  std::optional<std::string> config_path;
  std::string out_dir = "run";
  FlagOverrides over;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key=value config file");
    sub->add_option("--out-dir", out_dir, "run directory (default: run)");
    sub->add_option("--seed", over.seed, "master seed");
  };

  auto* rollout = app.add_subcommand("rollout", "generate the labeled synthetic corpus");
  add_common(rollout);
  rollout->add_option("--n", over.n_groups, "number of groups");
  rollout->add_option("--g", over.g, "trajectories per group");
  rollout->add_option("--tmax", over.t_max, "step horizon");

  std::vector<int> signals_k = {5, 10, 15, 20};
  auto* signals = app.add_subcommand("signals", "annotate the corpus with divergence signals");
  add_common(signals);
  signals->add_option("--k", signals_k, "evaluation steps")->delimiter(',');

  SweepOptions sweep_opts;
  auto* sweep = app.add_subcommand("sweep", "gate threshold sweep and cut-policy comparison");
  add_common(sweep);
  sweep->add_option("--k", sweep_opts.k_grid, "evaluation steps")->delimiter(',');
  sweep->add_option("--k-grid", sweep_opts.k_grid, "evaluation steps")->delimiter(',');
  sweep->add_option("--dl-grid", sweep_opts.d_l_grid, "threshold ladder")->delimiter(',');
  sweep->add_option("--dl", over.d_l, "gate threshold");
  sweep->add_option("--precision-floor", sweep_opts.precision_floor, "operating-point floor");

  CorrelateOptions corr_opts;
  auto* correlate = app.add_subcommand("correlate", "signal-quality grid and per-type table");
  add_common(correlate);
  correlate->add_option("--k-grid", corr_opts.k_grid, "evaluation steps")->delimiter(',');
  correlate->add_option("--k", over.k, "gate evaluation step");
  correlate->add_flag("--flip-auroc", corr_opts.flip_auroc, "score the zero-variance class");

  AbOptions ab_opts;
  auto* abtest = app.add_subcommand("abtest", "paired gate-on/gate-off rollout A/B");
  add_common(abtest);
  abtest->add_option("--n", over.n_groups, "number of groups");
  abtest->add_option("--g", over.g, "trajectories per group");
  abtest->add_option("--tmax", over.t_max, "step horizon");
  abtest->add_option("--k", over.k, "gate evaluation step");
  abtest->add_option("--dl", over.d_l, "gate threshold");
  abtest->add_option("--tau-h", over.tau_h, "or-rule termination threshold");
  abtest->add_option("--b", ab_opts.bootstrap_resamples, "bootstrap resamples");
  abtest->add_option("--level", ab_opts.level, "confidence level");

  TrainOptions train_opts;
  std::string arm_name = "both";
  auto* train = app.add_subcommand("train", "tier 2 replay or tier 3 live loop");
  add_common(train);
  train->add_option("--tier", train_opts.tier, "2: frozen-buffer replay, 3: live loop");
  train->add_option("--arm", arm_name, "baseline, gated or both");
  train->add_option("--k", over.k, "gate evaluation step");
  train->add_option("--dl", over.d_l, "gate threshold");
  train->add_option("--seeds", over.seeds, "tier 3 seed list")->delimiter(',');

  BootstrapOptions boot_opts;
  auto* bootstrap = app.add_subcommand("bootstrap", "confidence interval on the A/B saving");
  add_common(bootstrap);
  bootstrap->add_option("--b", boot_opts.resamples, "bootstrap resamples");
  bootstrap->add_option("--level", boot_opts.level, "confidence level");

  auto* rep = app.add_subcommand("report", "assemble report.txt and manifest.json");
  add_common(rep);
  rep->add_option("--k", over.k, "gate evaluation step");
  rep->add_option("--dl", over.d_l, "chosen gate threshold");

  std::reverse(args.begin(), args.end());
  try {
    app.parse(std::move(args));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsageError;
  }

  const auto started = std::chrono::steady_clock::now();
  std::string name;
  try {
    if (rollout->parsed()) {
      name = "rollout";
      cmd_rollout(resolve_config(config_path, over), out_dir);
    } else if (signals->parsed()) {
      name = "signals";
      cmd_signals(signals_k, out_dir);
    } else if (sweep->parsed()) {
      name = "sweep";
      cmd_sweep(resolve_config(config_path, over), sweep_opts, out_dir);
    } else if (correlate->parsed()) {
      name = "correlate";
      cmd_correlate(resolve_config(config_path, over), corr_opts, out_dir);
    } else if (abtest->parsed()) {
      name = "abtest";
      cmd_abtest(resolve_config(config_path, over), ab_opts, out_dir);
    } else if (train->parsed()) {
      name = "train";
      train_opts.arms = toytrain::arm_select_from_string(arm_name);
      cmd_train(resolve_config(config_path, over), train_opts, out_dir);
    } else if (bootstrap->parsed()) {
      name = "bootstrap";
      cmd_bootstrap(resolve_config(config_path, over), boot_opts, out_dir);
    } else if (rep->parsed()) {
      name = "report";
      cmd_report(resolve_config(config_path, over), out_dir);
    }
  } catch (const config::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const report::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kIoError;
  } catch (const report::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kValidationError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kValidationError;
  } catch (const std::runtime_error& e) {
    const std::string what = e.what();
    const bool io = what.find("cannot open") != std::string::npos ||
                    what.find("write failed") != std::string::npos ||
                    what.find("lock") != std::string::npos;
    std::cerr << (io ? "io error: " : "internal error: ") << what << "\n";
    return io ? kIoError : kInternalError;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternalError;
  }

  const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
      std::chrono::steady_clock::now() - started);
  std::cerr << "[" << name << "] completed in " << elapsed.count() << " ms\n";
  return kOk;
}

int run(int argc, char** argv) {
  return run(std::vector<std::string>(argv + 1, argv + argc));
}

}  // namespace rollgate::cli
