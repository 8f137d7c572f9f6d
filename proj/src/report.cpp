#include "rollgate/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "rollgate/config.hpp"
#include "rollgate/divergence.hpp"
#include "rollgate/grpo_math.hpp"

namespace rollgate::report {

namespace {

using nlohmann::json;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct MeanStd {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation
};

MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  if (values.empty()) return out;
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() < 2) return out;
  double ss = 0.0;
  for (const double v : values) ss += (v - out.mean) * (v - out.mean);
  out.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  return out;
}

std::string ms(const MeanStd& m, int decimals, const std::string& suffix = "") {
  return fixed(m.mean, decimals) + " +- " + fixed(m.sd, decimals) + suffix;
}

double pct_delta(double baseline, double value) {
  return 100.0 * (value / baseline - 1.0);
}

std::string signed_fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%+.*f", decimals, value);
  return buf;
}

std::string group_count(long long n) { return std::to_string(n); }

}  // namespace

// --- stamps and file plumbing -----------------------------------------------

std::string stamp_line(const FileStamp& stamp) {
  return "# config_hash=" + stamp.config_hash + " seed=" + std::to_string(stamp.seed);
}

std::optional<FileStamp> parse_stamp_line(const std::string& line) {
  const std::string hash_key = "config_hash=";
  const std::string seed_key = "seed=";
  if (line.empty() || line[0] != '#') return std::nullopt;
  const auto hpos = line.find(hash_key);
  const auto spos = line.find(seed_key, hpos == std::string::npos ? 0 : hpos);
  if (hpos == std::string::npos || spos == std::string::npos) return std::nullopt;
  FileStamp stamp;
  const auto hstart = hpos + hash_key.size();
  const auto hend = line.find(' ', hstart);
  stamp.config_hash = line.substr(hstart, hend == std::string::npos ? hend : hend - hstart);
  try {
    stamp.seed = std::stoull(line.substr(spos + seed_key.size()));
  } catch (const std::exception&) {
    return std::nullopt;
  }
  if (stamp.config_hash.empty()) return std::nullopt;
  return stamp;
}

void write_csv(const std::string& path, const FileStamp& stamp, const std::string& header,
               std::span<const std::string> rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << stamp_line(stamp) << '\n' << header << '\n';
  for (const auto& row : rows) out << row << '\n';
  if (!out) throw IoError("write failed: " + path);
}

CsvFile read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  CsvFile file;
  std::string line;
  bool have_stamp = false;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (!have_stamp) {
      auto stamp = parse_stamp_line(line);
      if (!stamp) throw ValidationError("missing config stamp line: " + path);
      file.stamp = *stamp;
      have_stamp = true;
    } else if (line[0] == '#') {
      file.comments.push_back(line);
    } else if (!have_header) {
      file.header = line;
      have_header = true;
    } else {
      file.rows.push_back(line);
    }
  }
  if (!have_stamp) throw ValidationError("missing config stamp line: " + path);
  return file;
}

void write_telemetry(const std::string& path, const FileStamp& stamp,
                     std::span<const toytrain::TelemetryRow> rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  json header = {{"schema", "rollgate/telemetry/v1"},
                 {"config_hash", stamp.config_hash},
                 {"seed", stamp.seed}};
  out << header.dump() << '\n';
  for (const auto& row : rows) out << toytrain::telemetry_to_jsonl_line(row) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

TelemetryFile read_telemetry(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  TelemetryFile file;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (first) {
      first = false;
      const json j = json::parse(line);
      if (!j.is_object() || !j.contains("schema"))
        throw ValidationError("telemetry file missing header line: " + path);
      file.stamp.config_hash = j.at("config_hash").get<std::string>();
      file.stamp.seed = j.at("seed").get<std::uint64_t>();
      continue;
    }
    file.rows.push_back(toytrain::telemetry_from_jsonl_line(line));
  }
  if (first) throw ValidationError("telemetry file missing header line: " + path);
  return file;
}

bool file_exists(const std::string& path) {
  std::error_code ec;
  return std::filesystem::is_regular_file(path, ec);
}

// --- paired rollout A/B -----------------------------------------------------

AbSummary ab_summary(std::span<const core::GroupRecord> baseline,
                     std::span<const core::GroupRecord> gated, int k, int bootstrap_resamples,
                     double level, std::uint64_t bootstrap_seed) {
  if (baseline.size() != gated.size())
    throw ValidationError("A/B arms differ in size: " + std::to_string(baseline.size()) + " vs " +
                          std::to_string(gated.size()));
  if (baseline.empty()) throw ValidationError("A/B arms are empty");

  AbSummary ab;
  ab.n_groups = static_cast<int>(baseline.size());
  ab.k = k;

  std::vector<double> base_steps(baseline.size());
  std::vector<double> gated_steps(baseline.size());
  for (std::size_t i = 0; i < baseline.size(); ++i) {
    if (baseline[i].prompt_id != gated[i].prompt_id)
      throw ValidationError("A/B arms are not task-aligned at index " + std::to_string(i));
    base_steps[i] = static_cast<double>(core::step_tokens(baseline[i]));
    gated_steps[i] = static_cast<double>(core::step_tokens(gated[i]));
    ab.step_tokens_baseline += core::step_tokens(baseline[i]);
    ab.step_tokens_gated += core::step_tokens(gated[i]);
    if (gated[i].is_cut) {
      ab.groups_cut++;
      if (core::zero_variance(baseline[i].label)) ab.tp++;
      else ab.fp++;
    }
  }
  ab.saving_pct = 100.0 * (1.0 - static_cast<double>(ab.step_tokens_gated) /
                                     static_cast<double>(ab.step_tokens_baseline));
  ab.mean_per_task_baseline =
      static_cast<double>(ab.step_tokens_baseline) / static_cast<double>(ab.n_groups);
  ab.mean_per_task_gated =
      static_cast<double>(ab.step_tokens_gated) / static_cast<double>(ab.n_groups);
  if (ab.groups_cut > 0)
    ab.precision = static_cast<double>(ab.tp) / static_cast<double>(ab.groups_cut);

  // Signal quality on the uncut arm: divergence at the gate step scoring the
  // non-zero-variance class.
  std::vector<double> scores;
  std::vector<char> labels;
  scores.reserve(baseline.size());
  labels.reserve(baseline.size());
  for (const auto& group : baseline) {
    const auto it = group.divergence.find(k);
    const core::DivergenceVector d =
        it != group.divergence.end() ? it->second : divergence::compute_signals(group, k);
    scores.push_back(d.prefix_edit_distance_mean);
    labels.push_back(core::zero_variance(group.label) ? 0 : 1);
  }
  try {
    ab.d_k_auroc = stats::auroc(scores, labels);
  } catch (const std::invalid_argument&) {
    ab.d_k_auroc = std::nullopt;  // single-class corpus
  }

  ab.saving_ci = stats::bootstrap_ci_indexed(
      baseline.size(),
      [&](std::span<const std::size_t> idx) {
        double b = 0.0;
        double g = 0.0;
        for (const std::size_t i : idx) {
          b += base_steps[i];
          g += gated_steps[i];
        }
        return 100.0 * (1.0 - g / b);
      },
      bootstrap_resamples, level, bootstrap_seed);
  return ab;
}

// --- aligned-text tables -----------------------------------------------------

std::string render_table(std::span<const std::string> header,
                         std::span<const std::vector<std::string>> rows) {
  const std::size_t cols = header.size();
  std::vector<std::size_t> width(cols, 0);
  for (std::size_t c = 0; c < cols; ++c) width[c] = header[c].size();
  for (const auto& row : rows)
    for (std::size_t c = 0; c < cols && c < row.size(); ++c)
      width[c] = std::max(width[c], row[c].size());

  auto emit = [&](const std::vector<std::string>& cells, std::string& out) {
    for (std::size_t c = 0; c < cols; ++c) {
      const std::string cell = c < cells.size() ? cells[c] : "";
      if (c == 0) {
        out += cell;
        out.append(width[c] - cell.size(), ' ');
      } else {
        out += "  ";
        out.append(width[c] - cell.size(), ' ');
        out += cell;
      }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    out += '\n';
  };

  std::string out;
  emit(std::vector<std::string>(header.begin(), header.end()), out);
  for (const auto& row : rows) emit(row, out);
  return out;
}

std::string fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
  return buf;
}

std::string opt_fixed(const std::optional<double>& value, int decimals,
                      const std::string& placeholder) {
  return value ? fixed(*value, decimals) : placeholder;
}

std::string sweep_text(std::span<const gate::SweepRow> rows, double chosen_d_l,
                       double precision_floor, int k, int n_groups, int n_zero_variance) {
  const std::vector<std::string> header = {"d_L",    "cut",   "TP",    "FP",  "prec.",
                                           "recall", "safe%", "raw%", "note"};
  std::vector<std::vector<std::string>> cells;
  for (const auto& row : rows) {
    std::string note;
    if (std::abs(row.d_l - chosen_d_l) < 1e-12) note = "chosen";
    if (!row.precision) note = note.empty() ? "no cuts" : note + ", no cuts";
    else if (*row.precision < precision_floor)
      note = note.empty() ? "below floor" : note + ", below floor";
    cells.push_back({fixed(row.d_l, 2), std::to_string(row.cut), std::to_string(row.tp),
                     std::to_string(row.fp), opt_fixed(row.precision, 2), fixed(row.recall, 2),
                     fixed(row.safe_pct, 1), fixed(row.raw_pct, 1), note});
  }
  std::string out = "single-axis threshold sweep at K=" + std::to_string(k) + " (N=" +
                    std::to_string(n_groups) + " groups, " + std::to_string(n_zero_variance) +
                    " zero-variance)\n\n";
  out += render_table(header, cells);
  out += "\nprecision floor: " + fixed(precision_floor, 2) +
         "; safe counts true-positive cuts only, raw counts all cuts.\n";
  return out;
}

std::string heatmap_text(std::span<const stats::CorrelationCell> cells,
                         std::span<const int> k_grid, double bold_threshold) {
  std::map<std::pair<std::string, int>, const stats::CorrelationCell*> index;
  for (const auto& cell : cells) index[{cell.metric, cell.k}] = &cell;

  std::vector<std::string> header = {"metric"};
  for (const int k : k_grid) header.push_back("K=" + std::to_string(k));

  auto grid = [&](auto value_of, bool mark) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& metric : stats::signal_names()) {
      std::vector<std::string> row = {metric};
      for (const int k : k_grid) {
        const auto it = index.find({metric, k});
        if (it == index.end()) {
          row.push_back("---");
          continue;
        }
        const std::optional<double> v = value_of(*it->second);
        std::string cell = opt_fixed(v, 3);
        if (mark && v && std::abs(*v) >= bold_threshold) cell += "*";
        row.push_back(cell);
      }
      rows.push_back(std::move(row));
    }
    return render_table(header, rows);
  };

  std::string out = "signal correlation grid, Spearman rho vs group reward variance\n";
  out += "(* marks |rho| >= " + fixed(bold_threshold, 2) + ")\n\n";
  out += grid([](const stats::CorrelationCell& c) { return c.spearman_rho; }, true);
  out += "\nAUROC for the non-zero-variance class (signal value as score)\n\n";
  out += grid([](const stats::CorrelationCell& c) { return c.auroc; }, false);
  return out;
}

std::string per_type_text(const stats::PerTypeTable& table, int k) {
  const std::string d_name = "d" + std::to_string(k);
  const std::vector<std::string> header = {"task type",          "n",
                                           "n_zv",               "global " + d_name + " AUROC",
                                           "best (metric, K)",   "best AUROC"};
  std::vector<std::vector<std::string>> rows;
  bool any_single = false;
  for (const auto& row : table.rows) {
    if (row.skipped) {
      rows.push_back({row.task_type, std::to_string(row.n), std::to_string(row.n_zero_variance),
                      "---", "---", "---"});
      continue;
    }
    const std::string star = row.single_observation ? "*" : "";
    any_single = any_single || row.single_observation;
    rows.push_back({row.task_type, std::to_string(row.n), std::to_string(row.n_zero_variance),
                    opt_fixed(row.auroc_at_k, 2) + star,
                    "(" + row.best_metric + ", " + std::to_string(row.best_k) + ")",
                    opt_fixed(row.best_auroc, 2) + star});
  }
  rows.push_back({"median", "---", "---", opt_fixed(table.median_auroc_at_k, 2), "---",
                  opt_fixed(table.median_best_auroc, 2)});

  std::string out = "per-task-type zero-variance classification at K=" + std::to_string(k) + "\n\n";
  out += render_table(header, rows);
  for (const auto& row : table.rows)
    if (row.skipped) out += "\n" + row.task_type + ": " + row.note;
  if (any_single) out += "\n* n_zv <= 2, single-observation regime; read as not-failed.\n";
  return out;
}

std::string arms_text(std::span<const gate::ArmRow> rows) {
  const std::vector<std::string> header = {"arm",       "cut",           "TP",
                                           "FP",        "precision",     "rollout-saved%",
                                           "L2-preserved%"};
  std::vector<std::vector<std::string>> cells;
  for (const auto& row : rows)
    cells.push_back({row.arm, std::to_string(row.cut), std::to_string(row.tp),
                     std::to_string(row.fp), opt_fixed(row.precision, 2),
                     fixed(row.rollout_saved_actual_pct, 1), fixed(row.l2_preserved_pct, 1)});
  std::string out = "cut-policy comparison on one labeled corpus\n\n";
  out += render_table(header, cells);
  out += "\nrollout-saved uses actual emitted steps; the horizon-normalized variant is in the"
         " CSV.\npost-hoc filtering saves training items, never rollout steps.\n";
  return out;
}

std::string ab_text(const AbSummary& ab) {
  const std::vector<std::string> header = {"", "baseline", "gated", "delta"};
  const double delta_pct = -ab.saving_pct;
  std::vector<std::vector<std::string>> rows = {
      {"total step-tokens", group_count(ab.step_tokens_baseline),
       group_count(ab.step_tokens_gated), signed_fixed(delta_pct, 2) + "%"},
      {"mean per-task", fixed(ab.mean_per_task_baseline, 1), fixed(ab.mean_per_task_gated, 1),
       signed_fixed(delta_pct, 2) + "%"},
      {"groups cut (of " + std::to_string(ab.n_groups) + ")", "0", std::to_string(ab.groups_cut),
       "+" + std::to_string(ab.groups_cut)}};

  std::string out = "paired rollout A/B, same tasks and seeds, gate on vs off\n\n";
  out += render_table(header, rows);
  out += "\nof the " + std::to_string(ab.groups_cut) + " groups cut in the gated arm, " +
         std::to_string(ab.tp) + " were zero-variance once the matched baseline arm completed";
  if (ab.precision) out += " (precision " + fixed(*ab.precision, 2) + ")";
  out += ".\nbootstrap " + fixed(100.0 * ab.saving_ci.level, 0) +
         "% CI on the step-token saving, resampling tasks " +
         std::to_string(ab.saving_ci.resamples) + " times: [" + fixed(ab.saving_ci.ci_low, 2) +
         ", " + fixed(ab.saving_ci.ci_high, 2) + "]%.\n";
  out += "divergence AUROC at K=" + std::to_string(ab.k) +
         " against the baseline arm's zero-variance split: " + opt_fixed(ab.d_k_auroc, 3) + ".\n";
  return out;
}

std::string tier2_text(const toytrain::Tier2Result& result, std::optional<int> position_cap) {
  long long items_base = 0;
  long long items_gated = 0;
  int sampled = 0;
  int cut = 0;
  for (const auto& row : result.rows) {
    if (row.arm == "baseline") {
      items_base += row.items;
      sampled += row.groups_sampled;
    } else {
      items_gated += row.items;
      cut += row.cut_count;
    }
  }
  const std::vector<std::string> header = {"", "baseline", "gated", "delta"};
  std::string items_label = "total train items";
  if (position_cap) items_label += " (cap " + std::to_string(*position_cap) + ")";
  const double cut_rate = sampled > 0 ? 100.0 * cut / sampled : 0.0;
  std::vector<std::vector<std::string>> rows = {
      {items_label, group_count(items_base), group_count(items_gated),
       signed_fixed(pct_delta(static_cast<double>(items_base), static_cast<double>(items_gated)),
                    1) +
           "%"},
      {"groups cut (of " + std::to_string(sampled) + ")", "0", std::to_string(cut),
       "cut rate " + fixed(cut_rate, 1) + "%"},
      {"gradient L2-norm mean", fixed(result.mean_grad_baseline, 4),
       fixed(result.mean_grad_gated, 4),
       signed_fixed(pct_delta(result.mean_grad_baseline, result.mean_grad_gated), 1) + "%"}};

  std::string out = "frozen-buffer training replay, matched step sampling\n\n";
  out += render_table(header, rows);
  out += "\ntrain items are the step-token proxy for training compute; gradients always use"
         " every step.\n";
  return out;
}

std::string tier3_text(const toytrain::Tier3Result& result) {
  // Per-seed per-arm aggregates.
  std::map<std::pair<std::uint64_t, std::string>, const toytrain::ArmSummary*> summary;
  std::vector<std::uint64_t> seeds;
  for (const auto& s : result.summaries) {
    summary[{s.seed, s.arm}] = &s;
    if (std::find(seeds.begin(), seeds.end(), s.seed) == seeds.end()) seeds.push_back(s.seed);
  }
  std::map<std::pair<std::uint64_t, std::string>, double> eval0;
  int max_iteration = 0;
  for (const auto& row : result.rows) {
    max_iteration = std::max(max_iteration, row.iteration);
    if (row.iteration == 0 && row.heldout_success) eval0[{row.seed, row.arm}] = *row.heldout_success;
  }

  std::vector<double> tokens_base, tokens_gated, tokens_delta;
  std::vector<double> cuts_gated;
  std::vector<double> grad_base, grad_gated, grad_ratio;
  std::vector<double> ev0_base, ev0_gated;
  std::vector<double> evf_base, evf_gated, evf_delta;
  for (const std::uint64_t seed : seeds) {
    const auto* b = summary.at({seed, "baseline"});
    const auto* g = summary.at({seed, "gated"});
    tokens_base.push_back(static_cast<double>(b->step_tokens_total));
    tokens_gated.push_back(static_cast<double>(g->step_tokens_total));
    tokens_delta.push_back(pct_delta(static_cast<double>(b->step_tokens_total),
                                     static_cast<double>(g->step_tokens_total)));
    cuts_gated.push_back(static_cast<double>(g->cut_total));
    grad_base.push_back(b->mean_gradient_l2);
    grad_gated.push_back(g->mean_gradient_l2);
    grad_ratio.push_back(g->mean_gradient_l2 / b->mean_gradient_l2);
    if (eval0.count({seed, "baseline"})) ev0_base.push_back(100.0 * eval0.at({seed, "baseline"}));
    if (eval0.count({seed, "gated"})) ev0_gated.push_back(100.0 * eval0.at({seed, "gated"}));
    evf_base.push_back(100.0 * b->final_heldout_success);
    evf_gated.push_back(100.0 * g->final_heldout_success);
    evf_delta.push_back(100.0 * (g->final_heldout_success - b->final_heldout_success));
  }

  const int iterations = max_iteration + 1;
  const std::vector<std::string> header = {"", "baseline", "gated", "delta"};
  std::vector<std::vector<std::string>> rows = {
      {"total step-tokens", ms(mean_std(tokens_base), 0), ms(mean_std(tokens_gated), 0),
       ms(mean_std(tokens_delta), 1, "%")},
      {"groups cut by gate", "0", ms(mean_std(cuts_gated), 1),
       "+" + fixed(mean_std(cuts_gated).mean, 1)},
      {"gradient L2-norm mean", ms(mean_std(grad_base), 4), ms(mean_std(grad_gated), 4),
       ms(mean_std(grad_ratio), 2, "x")},
      {"held-out eval, iter 0", ms(mean_std(ev0_base), 1, "%"), ms(mean_std(ev0_gated), 1, "%"),
       "0"},
      {"held-out eval, final", ms(mean_std(evf_base), 1, "%"), ms(mean_std(evf_gated), 1, "%"),
       ms(mean_std(evf_delta), 1, " pp")}};

  std::string out = "live training loop, paired arms over " + std::to_string(seeds.size()) +
                    " seeds x " + std::to_string(iterations) + " iterations\n\n";
  out += render_table(header, rows);
  const auto& d = result.dilution;
  const double gap = 100.0 * (d.measured_ratio / d.predicted_ratio - 1.0);
  out += "\ndilution consistency: zero-advantage fractions " + fixed(d.z_base, 3) +
         " (baseline) vs " + fixed(d.z_gated, 3) + " (gated) predict a gradient-norm ratio of " +
         fixed(d.predicted_ratio, 3) + "; measured " + fixed(d.measured_ratio, 3) + " (gap " +
         fixed(gap, 1) + "%).\n";
  return out;
}

std::string mirror_text(std::span<const gate::MirrorSweepPoint> points, double floor) {
  const gate::MirrorSweepPoint* best = nullptr;
  int with_cuts = 0;
  for (const auto& point : points) {
    if (!point.precision) continue;
    with_cuts++;
    if (!best || *point.precision > *best->precision) best = &point;
  }
  std::string out = "low-tau mirror rule sweep (cut when d_K < d_L or tau_K <= t_L)\n\n";
  out += std::to_string(points.size()) + " grid points, " + std::to_string(with_cuts) +
         " with at least one cut.\n";
  if (best) {
    out += "best precision " + fixed(*best->precision, 3) + " at (K=" + std::to_string(best->k) +
           ", d_L=" + fixed(best->d_l, 2) + ", t_L=" + fixed(best->t_l, 2) + "), floor " +
           fixed(floor, 2) + ".\n";
  }
  if (!gate::any_point_clears_floor(points, floor)) {
    out += "NEGATIVE RESULT: no operating point reaches the " + fixed(floor, 2) +
           " precision floor; early low termination is shared by mixed groups, so the"
           " clause cannot be made precise.\n";
  } else {
    out += "the mirror rule clears the floor at one or more grid points.\n";
  }
  return out;
}

// --- manifest ----------------------------------------------------------------

std::string file_fnv1a64(const std::string& path) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(config::fnv1a64(read_file(path))));
  return buf;
}

void write_manifest(const std::string& path, const FileStamp& stamp,
                    std::span<const ManifestEntry> entries) {
  json files = json::array();
  for (const auto& entry : entries)
    files.push_back({{"path", entry.path},
                     {"role", entry.role},
                     {"bytes", entry.bytes},
                     {"fnv1a64", entry.fnv1a64}});
  const json manifest = {{"schema", "rollgate/manifest/v1"},
                         {"config_hash", stamp.config_hash},
                         {"seed", stamp.seed},
                         {"files", files}};
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << manifest.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

// --- bundle assembly ----------------------------------------------------------

namespace {

std::vector<std::string> split_csv_row(const std::string& row) {
  std::vector<std::string> fields;
  std::stringstream ss(row);
  std::string item;
  while (std::getline(ss, item, ',')) fields.push_back(item);
  return fields;
}

toytrain::Tier2Result tier2_from_csv(const CsvFile& file) {
  toytrain::Tier2Result result;
  for (const auto& line : file.rows) {
    const auto f = split_csv_row(line);
    if (f.size() != 9) throw ValidationError("tier2 row has " + std::to_string(f.size()) +
                                             " fields, expected 9: " + line);
    toytrain::Tier2StepRow row;
    row.step = std::stoi(f[0]);
    row.arm = f[1];
    row.groups_sampled = std::stoi(f[2]);
    row.groups_trained = std::stoi(f[3]);
    row.cut_count = std::stoi(f[4]);
    row.items = std::stoll(f[5]);
    row.loss = std::stod(f[6]);
    row.gradient_l2 = std::stod(f[7]);
    row.zero_advantage_fraction = std::stod(f[8]);
    result.rows.push_back(std::move(row));
  }
  double sum_base = 0.0;
  double sum_gated = 0.0;
  int n_base = 0;
  int n_gated = 0;
  for (const auto& row : result.rows) {
    if (row.groups_trained == 0) continue;
    if (row.arm == "baseline") {
      sum_base += row.gradient_l2;
      n_base++;
    } else {
      sum_gated += row.gradient_l2;
      n_gated++;
    }
  }
  if (n_base > 0) result.mean_grad_baseline = sum_base / n_base;
  if (n_gated > 0) result.mean_grad_gated = sum_gated / n_gated;
  if (result.mean_grad_baseline > 0.0)
    result.grad_ratio = result.mean_grad_gated / result.mean_grad_baseline;
  return result;
}

toytrain::Tier3Result tier3_from_files(const TelemetryFile& telemetry, const CsvFile& summary) {
  toytrain::Tier3Result result;
  result.rows = telemetry.rows;
  for (const auto& line : summary.rows) {
    const auto f = split_csv_row(line);
    if (f.size() != 6) throw ValidationError("tier3 summary row has " + std::to_string(f.size()) +
                                             " fields, expected 6: " + line);
    toytrain::ArmSummary s;
    s.seed = std::stoull(f[0]);
    s.arm = f[1];
    s.step_tokens_total = std::stoll(f[2]);
    s.cut_total = std::stoi(f[3]);
    s.final_heldout_success = std::stod(f[4]);
    s.mean_gradient_l2 = std::stod(f[5]);
    result.summaries.push_back(std::move(s));
  }
  for (const auto& comment : summary.comments) {
    double zb = 0.0, zg = 0.0, pred = 0.0, meas = 0.0;
    if (std::sscanf(comment.c_str(), "# dilution z_base=%lf z_gated=%lf predicted=%lf measured=%lf",
                    &zb, &zg, &pred, &meas) == 4) {
      result.dilution = {zb, zg, pred, meas};
      break;
    }
  }
  return result;
}

void require_same_stamp(std::vector<std::pair<std::string, FileStamp>>& stamps) {
  for (std::size_t i = 1; i < stamps.size(); ++i) {
    if (stamps[i].second.config_hash != stamps[0].second.config_hash)
      throw ValidationError("run directory mixes config hashes: " + stamps[0].first + " has " +
                            stamps[0].second.config_hash + ", " + stamps[i].first + " has " +
                            stamps[i].second.config_hash);
  }
}

}  // namespace

BundleResult assemble(const RunPaths& paths, const BundleOptions& options) {
  std::vector<std::pair<std::string, FileStamp>> stamps;
  std::vector<ManifestEntry> entries;
  auto track_input = [&](const std::string& path, const std::optional<FileStamp>& stamp) {
    if (stamp) stamps.emplace_back(path, *stamp);
    entries.push_back({std::filesystem::path(path).filename().string(), "input",
                       static_cast<std::uint64_t>(std::filesystem::file_size(path)),
                       file_fnv1a64(path)});
  };

  BundleResult result;
  std::string text = "selective-rollout gating report\n";

  // Corpus-derived sections.
  std::optional<core::Corpus> corpus;
  if (file_exists(paths.corpus())) {
    corpus = core::read_corpus(paths.corpus());
    if (corpus->header) track_input(paths.corpus(), FileStamp{corpus->header->config_hash,
                                                              corpus->header->seed});
    else track_input(paths.corpus(), std::nullopt);
  }

  // Stamped artifacts produced by other subcommands: carried into the
  // manifest and checked for hash agreement, not re-rendered.
  for (const std::string& path :
       {paths.sweep_csv(), paths.heatmap_csv(), paths.per_type_csv(), paths.arms_csv(),
        paths.mirror_csv(), paths.abtest_csv(), paths.bootstrap_csv()}) {
    if (!file_exists(path)) continue;
    track_input(path, read_csv(path).stamp);
  }

  std::optional<core::Corpus> ab_base;
  std::optional<core::Corpus> ab_gated;
  if (file_exists(paths.abtest_baseline()) && file_exists(paths.abtest_gated())) {
    ab_base = core::read_corpus(paths.abtest_baseline());
    ab_gated = core::read_corpus(paths.abtest_gated());
    track_input(paths.abtest_baseline(),
                ab_base->header ? std::optional<FileStamp>(FileStamp{ab_base->header->config_hash,
                                                                     ab_base->header->seed})
                                : std::nullopt);
    track_input(paths.abtest_gated(),
                ab_gated->header ? std::optional<FileStamp>(FileStamp{ab_gated->header->config_hash,
                                                                      ab_gated->header->seed})
                                 : std::nullopt);
  }

  std::optional<toytrain::Tier2Result> tier2;
  if (file_exists(paths.tier2_csv())) {
    const CsvFile file = read_csv(paths.tier2_csv());
    track_input(paths.tier2_csv(), file.stamp);
    tier2 = tier2_from_csv(file);
  }

  std::optional<toytrain::Tier3Result> tier3;
  if (file_exists(paths.tier3_telemetry()) && file_exists(paths.tier3_summary_csv())) {
    const TelemetryFile telemetry = read_telemetry(paths.tier3_telemetry());
    const CsvFile summary = read_csv(paths.tier3_summary_csv());
    track_input(paths.tier3_telemetry(), telemetry.stamp);
    track_input(paths.tier3_summary_csv(), summary.stamp);
    tier3 = tier3_from_files(telemetry, summary);
  }

  if (entries.empty())
    throw IoError("no artifacts found in run directory: " + paths.dir);
  require_same_stamp(stamps);

  const FileStamp stamp = stamps.empty() ? FileStamp{"unstamped", options.seed} : stamps[0].second;
  text += "config_hash: " + stamp.config_hash + "\n";
  text += "seed: " + std::to_string(stamp.seed) + "\n";

  auto section = [&](const std::string& name, const std::string& body) {
    text += "\n== " + name + " ==\n\n" + body;
    result.sections.push_back(name);
  };

  if (corpus) {
    auto groups = corpus->groups;
    std::vector<int> k_grid = options.k_grid;
    if (std::find(k_grid.begin(), k_grid.end(), options.k) == k_grid.end())
      k_grid.push_back(options.k);
    std::sort(k_grid.begin(), k_grid.end());
    divergence::annotate_corpus(groups, k_grid);

    std::vector<double> grid = options.sweep_grid;
    if (std::find(grid.begin(), grid.end(), options.chosen_d_l) == grid.end())
      grid.push_back(options.chosen_d_l);
    std::sort(grid.begin(), grid.end());
    const auto sweep_rows = gate::sweep(groups, options.k, grid);
    int n_zv = 0;
    for (const auto& group : groups) n_zv += core::zero_variance(group.label) ? 1 : 0;
    section("gate threshold sweep",
            sweep_text(sweep_rows, options.chosen_d_l, options.precision_floor, options.k,
                       static_cast<int>(groups.size()), n_zv));

    section("signal correlation grid", heatmap_text(stats::heatmap(groups, k_grid), k_grid));

    section("per-task-type breakdown",
            per_type_text(stats::per_type_breakdown(groups, options.k, k_grid), options.k));

    gate::ArmTableConfig arm_cfg;
    arm_cfg.k = options.k;
    arm_cfg.d_l = options.chosen_d_l;
    arm_cfg.tau_h = options.tau_h.value_or(0.90);
    arm_cfg.epsilon = options.epsilon;
    arm_cfg.seed = stamp.seed;
    section("cut-policy comparison", arms_text(gate::arms_table(groups, arm_cfg)));

    std::vector<double> mirror_d = options.mirror_d_l_grid;
    if (mirror_d.empty())
      for (double d = 0.02; d <= 0.30 + 1e-9; d += 0.02) mirror_d.push_back(d);
    const auto mirror_points =
        gate::low_tau_sweep(groups, k_grid, mirror_d, options.mirror_t_l_grid);
    result.mirror_negative_result =
        !gate::any_point_clears_floor(mirror_points, options.precision_floor);
    section("low-tau mirror rule", mirror_text(mirror_points, options.precision_floor));
  }

  if (ab_base && ab_gated) {
    const auto ab =
        ab_summary(ab_base->groups, ab_gated->groups, options.k, 1000, 0.95, stamp.seed);
    section("paired rollout A/B", ab_text(ab));
  }

  if (tier2) section("frozen-buffer training replay", tier2_text(*tier2, std::nullopt));
  if (tier3) section("live training loop", tier3_text(*tier3));

  std::ofstream out(paths.report_txt());
  if (!out) throw IoError("cannot open for writing: " + paths.report_txt());
  out << text;
  out.close();

  entries.push_back({"report.txt", "output",
                     static_cast<std::uint64_t>(std::filesystem::file_size(paths.report_txt())),
                     file_fnv1a64(paths.report_txt())});
  write_manifest(paths.manifest_json(), stamp, entries);

  result.report_path = paths.report_txt();
  result.manifest_path = paths.manifest_json();
  return result;
}

}  // namespace rollgate::report
