#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rollgate/config.hpp"
#include "rollgate/report.hpp"
#include "rollgate/toytrain.hpp"

// Command-line front end. Every subcommand is a plain function over a
// resolved configuration and a run directory, so tests drive them
// in-process; run() adds flag parsing and exit-code mapping on top.
namespace rollgate::cli {

inline constexpr int kOk = 0;
inline constexpr int kUsageError = 1;      // unknown flags or subcommands
inline constexpr int kConfigError = 2;     // bad values in config file or flags
inline constexpr int kIoError = 3;         // missing or unreadable files, locks
inline constexpr int kValidationError = 4; // inconsistent inputs
inline constexpr int kInternalError = 5;

// Per-flag overrides on top of defaults and the config file: only fields
// the user actually passed are set. Precedence is defaults < file < flags.
struct FlagOverrides {
  std::optional<int> n_groups;
  std::optional<int> g;
  std::optional<int> t_max;
  std::optional<int> k;
  std::optional<double> d_l;
  std::optional<double> tau_h;
  std::optional<double> epsilon;
  std::optional<std::uint64_t> seed;
  std::optional<std::vector<std::uint64_t>> seeds;
};

// defaults -> optional config file -> flag overrides, then validation.
config::AppConfig resolve_config(const std::optional<std::string>& config_path,
                                 const FlagOverrides& overrides);

// Subcommand bodies. All of them create the run directory, hold its lock
// for the duration, and throw on failure (config::ConfigError,
// report::IoError, report::ValidationError, std::invalid_argument).

// Generates the labeled synthetic corpus into corpus.jsonl.
void cmd_rollout(const config::AppConfig& cfg, const std::string& out_dir);

// Annotates corpus.jsonl with divergence signals at every k in the grid.
void cmd_signals(const std::vector<int>& k_grid, const std::string& out_dir);

// Threshold sweep, cut-policy arms and the low-tau mirror grid; writes
// sweep.csv, arms.csv and mirror_sweep.csv.
struct SweepOptions {
  std::vector<int> k_grid;       // empty: the configured gate k
  std::vector<double> d_l_grid;  // empty: the standard ladder
  double precision_floor = 0.80;
};
void cmd_sweep(const config::AppConfig& cfg, const SweepOptions& options,
               const std::string& out_dir);

// Signal-quality grid and per-type breakdown; writes heatmap.csv and
// per_type.csv.
struct CorrelateOptions {
  std::vector<int> k_grid{5, 10, 15, 20};
  bool flip_auroc = false;
};
void cmd_correlate(const config::AppConfig& cfg, const CorrelateOptions& options,
                   const std::string& out_dir);

// Paired gate-on/gate-off rollout of the configured corpus; writes both
// arms' corpora and abtest.csv.
struct AbOptions {
  int bootstrap_resamples = 1000;
  double level = 0.95;
};
void cmd_abtest(const config::AppConfig& cfg, const AbOptions& options,
                const std::string& out_dir);

// tier 2 replays corpus.jsonl; tier 3 runs the live paired loop.
struct TrainOptions {
  int tier = 3;
  toytrain::ArmSelect arms = toytrain::ArmSelect::both;
};
void cmd_train(const config::AppConfig& cfg, const TrainOptions& options,
               const std::string& out_dir);

// Recomputes the step-token-saving confidence interval from the stored
// A/B corpora; writes bootstrap.csv.
struct BootstrapOptions {
  int resamples = 1000;
  double level = 0.95;
};
void cmd_bootstrap(const config::AppConfig& cfg, const BootstrapOptions& options,
                   const std::string& out_dir);

// Assembles report.txt and manifest.json from whatever the run directory
// holds; refuses mixed config stamps.
report::BundleResult cmd_report(const config::AppConfig& cfg, const std::string& out_dir);

// Full argv interface: parses flags, dispatches, maps failures to exit
// codes and prints diagnostics to stderr. args excludes the program name.
int run(std::vector<std::string> args);
int run(int argc, char** argv);

}  // namespace rollgate::cli
