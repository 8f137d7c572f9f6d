#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rollgate/core_types.hpp"

// Run configuration: defaults, flat key=value config files, flag overrides,
// and the canonical hash every output file embeds so any table can be traced
// back to the exact configuration that produced it.
namespace rollgate::config {

// Anything wrong with configuration input, distinct from IO and usage
// errors so the CLI can map it to its own exit code.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct AppConfig {
  core::RunConfig run;  // G, T_max, K, d_L, tau_H, epsilon, seed, N_groups
  double temp_rollout = 0.7;
  double temp_eval = 0.0;
  double learning_rate = 5e-5;
  std::vector<std::uint64_t> seeds{7, 13, 23, 42};
};

// Applies one key=value assignment. Keys use the RunConfig field spellings
// (G, T_max, K, d_L, tau_H, epsilon, seed, N_groups) plus the trainer keys
// temp_rollout, temp_eval, learning_rate and seeds (comma-separated).
// Unknown keys and unparseable values raise ConfigError.
void apply_key(AppConfig& cfg, const std::string& key, const std::string& value);

// Parses flat key=value text ('#' starts a comment). Range violations are
// reported with the offending field's name.
AppConfig parse_config_text(const std::string& text);
AppConfig load_config(const std::string& path);

// Range validation over the whole config (delegates to core::validate for
// the run block). Throws ConfigError naming the field.
void validate(const AppConfig& cfg);

// One line per key, sorted by key, with deterministic number formatting.
// This is the exact byte stream the config hash covers.
std::string canonical_lines(const AppConfig& cfg);

std::uint64_t fnv1a64(std::string_view bytes);

// 16 lowercase hex digits of fnv1a64(canonical_lines).
std::string config_hash(const AppConfig& cfg);

// Writes canonical_lines plus a hash comment, so a run directory records
// the exact resolved configuration it was produced under.
void write_resolved(const std::string& path, const AppConfig& cfg);

// Exclusive-create lockfile protecting a run directory from concurrent
// writers. Construction fails if another holder exists; the destructor
// releases it.
class RunLock {
 public:
  explicit RunLock(const std::string& dir);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

}  // namespace rollgate::config
