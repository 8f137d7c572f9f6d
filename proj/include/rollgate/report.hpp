#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rollgate/core_types.hpp"
#include "rollgate/gate.hpp"
#include "rollgate/stats.hpp"
#include "rollgate/toytrain.hpp"

// Run-directory plumbing and table rendering: stamped CSV and telemetry
// files, the paired rollout A/B summary, aligned-text tables for every
// analysis, and the bundle assembly that ties a run directory together
// under one manifest.
namespace rollgate::report {

// Unreadable or missing artifact.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Artifacts that exist but cannot be combined (foremost: stamps from
// different generating configurations in one run directory).
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// --- provenance stamps ------------------------------------------------------

// Every artifact opens with the hash of the configuration that generated
// its data plus the master seed, so any table is traceable to its inputs.
struct FileStamp {
  std::string config_hash;
  std::uint64_t seed = 0;
};

std::string stamp_line(const FileStamp& stamp);
std::optional<FileStamp> parse_stamp_line(const std::string& line);

// Stamp line, then a header row, then data rows.
void write_csv(const std::string& path, const FileStamp& stamp, const std::string& header,
               std::span<const std::string> rows);

struct CsvFile {
  FileStamp stamp;
  std::vector<std::string> comments;  // '#' lines after the stamp
  std::string header;
  std::vector<std::string> rows;
};
CsvFile read_csv(const std::string& path);

void write_telemetry(const std::string& path, const FileStamp& stamp,
                     std::span<const toytrain::TelemetryRow> rows);
struct TelemetryFile {
  FileStamp stamp;
  std::vector<toytrain::TelemetryRow> rows;
};
TelemetryFile read_telemetry(const std::string& path);

// --- run directory layout ---------------------------------------------------

struct RunPaths {
  std::string dir;

  std::string config_resolved() const { return dir + "/config.resolved"; }
  std::string corpus() const { return dir + "/corpus.jsonl"; }
  std::string sweep_csv() const { return dir + "/sweep.csv"; }
  std::string heatmap_csv() const { return dir + "/heatmap.csv"; }
  std::string per_type_csv() const { return dir + "/per_type.csv"; }
  std::string arms_csv() const { return dir + "/arms.csv"; }
  std::string mirror_csv() const { return dir + "/mirror_sweep.csv"; }
  std::string abtest_baseline() const { return dir + "/abtest_baseline.jsonl"; }
  std::string abtest_gated() const { return dir + "/abtest_gated.jsonl"; }
  std::string abtest_csv() const { return dir + "/abtest.csv"; }
  std::string bootstrap_csv() const { return dir + "/bootstrap.csv"; }
  std::string tier2_csv() const { return dir + "/tier2_steps.csv"; }
  std::string tier3_telemetry() const { return dir + "/tier3_telemetry.jsonl"; }
  std::string tier3_summary_csv() const { return dir + "/tier3_summary.csv"; }
  std::string report_txt() const { return dir + "/report.txt"; }
  std::string manifest_json() const { return dir + "/manifest.json"; }
};

bool file_exists(const std::string& path);

// --- paired rollout A/B -----------------------------------------------------

struct AbSummary {
  int n_groups = 0;
  long long step_tokens_baseline = 0;
  long long step_tokens_gated = 0;
  double saving_pct = 0.0;  // 100 * (1 - gated/baseline)
  double mean_per_task_baseline = 0.0;
  double mean_per_task_gated = 0.0;
  int groups_cut = 0;
  int tp = 0;  // cut groups the matched baseline arm found zero-variance
  int fp = 0;
  std::optional<double> precision;
  std::optional<double> d_k_auroc;  // divergence signal at the gate step, baseline arm
  int k = 0;
  stats::BootstrapResult saving_ci;  // resamples whole tasks
};

// Scores a gated arm against its matched baseline: the two corpora must be
// the same tasks in the same order, differing only in gate truncation.
// Ground truth for cut decisions is the baseline arm's label.
AbSummary ab_summary(std::span<const core::GroupRecord> baseline,
                     std::span<const core::GroupRecord> gated, int k, int bootstrap_resamples,
                     double level, std::uint64_t bootstrap_seed);

// --- aligned-text tables -----------------------------------------------------

// Generic renderer: one space-padded column per header entry, numeric-looking
// cells right-aligned. Wide content is the caller's problem.
std::string render_table(std::span<const std::string> header,
                         std::span<const std::vector<std::string>> rows);

std::string fixed(double value, int decimals);
std::string opt_fixed(const std::optional<double>& value, int decimals,
                      const std::string& placeholder = "---");

// Threshold-sweep table with the chosen row marked and each row checked
// against the precision floor.
std::string sweep_text(std::span<const gate::SweepRow> rows, double chosen_d_l,
                       double precision_floor, int k, int n_groups, int n_zero_variance);

// Signal-by-K correlation grid; cells at or above the bold threshold are
// marked with '*'. Undefined cells print as "---".
std::string heatmap_text(std::span<const stats::CorrelationCell> cells,
                         std::span<const int> k_grid, double bold_threshold = 0.40);

std::string per_type_text(const stats::PerTypeTable& table, int k);

std::string arms_text(std::span<const gate::ArmRow> rows);

std::string ab_text(const AbSummary& ab);

std::string tier2_text(const toytrain::Tier2Result& result,
                       std::optional<int> position_cap = std::nullopt);

std::string tier3_text(const toytrain::Tier3Result& result);

// Mirror-rule verdict: states the best operating point and flags the
// negative result when nothing reaches the floor.
std::string mirror_text(std::span<const gate::MirrorSweepPoint> points, double floor);

// --- manifest ----------------------------------------------------------------

struct ManifestEntry {
  std::string path;  // relative to the run directory
  std::string role;  // "input" or "output"
  std::uint64_t bytes = 0;
  std::string fnv1a64;
};

std::string file_fnv1a64(const std::string& path);

void write_manifest(const std::string& path, const FileStamp& stamp,
                    std::span<const ManifestEntry> entries);

// --- bundle assembly ----------------------------------------------------------

struct BundleOptions {
  int k = 10;                    // gate evaluation step
  double chosen_d_l = 0.12;      // row to mark in the sweep table
  std::optional<double> tau_h;   // or-rule arm threshold in the arms table
  double epsilon = 1e-4;
  double precision_floor = 0.80;
  std::uint64_t seed = 42;       // stamp fallback when the directory has no corpus
  std::vector<int> k_grid{5, 10, 15, 20};
  std::vector<double> sweep_grid{0.05, 0.08, 0.10, 0.12, 0.14, 0.18};
  std::vector<double> mirror_d_l_grid;  // [0.02, 0.30] step 0.02 when empty
  std::vector<double> mirror_t_l_grid{0.0, 0.05, 0.10, 0.15};
};

struct BundleResult {
  std::string report_path;
  std::string manifest_path;
  std::vector<std::string> sections;
  bool mirror_negative_result = false;
};

// Reads every artifact the run directory holds, refuses mixed config
// stamps, renders all tables the available data supports into report.txt
// and records inputs and outputs in manifest.json.
BundleResult assemble(const RunPaths& paths, const BundleOptions& options);

}  // namespace rollgate::report
