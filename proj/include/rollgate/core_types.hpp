#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rollgate::core {

// One environment action. Symbols are opaque ids drawn from a finite
// vocabulary; equality is exact symbol equality, there is no metric on
// symbols themselves.
struct ActionToken {
  std::uint32_t symbol = 0;
  friend constexpr bool operator==(ActionToken, ActionToken) = default;
  friend constexpr auto operator<=>(ActionToken, ActionToken) = default;
};

enum class GroupLabel { all_fail, mixed, all_succeed };

const char* to_string(GroupLabel label);
GroupLabel group_label_from_string(const std::string& s);

// Which condition produced a cut decision. none <=> the group was kept.
enum class GateClause { none, d_clause, tau_clause, low_tau_clause, random_cut, oracle };

const char* to_string(GateClause clause);
GateClause gate_clause_from_string(const std::string& s);

// The seven in-group divergence signals evaluated at step k.
struct DivergenceVector {
  int k = 0;
  double prefix_edit_distance_mean = 0.0;   // mean pairwise normalized edit distance
  double action_bigram_jaccard_mean = 0.0;  // 1 - bigram overlap, mean over pairs
  double unique_prefix_ratio = 0.0;
  double unique_action_ratio = 0.0;         // distinct step-k actions / G
  double action_entropy = 0.0;              // Shannon entropy of step-k actions / log G
  double obs_unique_ratio = 0.0;            // distinct step-k observations / G
  double termination_fraction = 0.0;        // fraction terminated at or before k
};

struct GateDecision {
  bool cut = false;
  GateClause clause = GateClause::none;
  int k = 0;
  double d_k = 0.0;
  double tau_k = 0.0;
  // Ground-truth label of the paired full rollout, when one exists.
  std::optional<GroupLabel> counterfactual_label;
};

// One rollout's history. terminated_at is the 1-based step count at
// termination and equals steps_emitted() when set; a trajectory that ran to
// the horizon leaves it empty. actions and observations always have equal
// length.
struct TrajectoryRecord {
  std::vector<ActionToken> actions;
  std::vector<std::uint32_t> observations;
  std::optional<int> terminated_at;
  double reward = 0.0;

  int steps_emitted() const { return static_cast<int>(actions.size()); }
};

// World parameters the group was generated under, carried in the record so
// downstream consumers (training, reports) can reconstruct task state
// without the generating process.
struct WorldSummary {
  int n_locations = 0;
  int target_location = 0;
  int reveal_step = 0;
  int decoy_prefix_length = 0;
};

// A group of G trajectories rolled out for one prompt, plus everything the
// offline analyses need: rewards, label, per-step divergence signals and the
// gate decision if a supervisor ran. Cut groups keep their truncated rewards
// for logging only; is_cut marks them excluded from training batches.
struct GroupRecord {
  std::uint64_t prompt_id = 0;
  std::string task_type;
  int g = 0;
  int t_max = 0;
  WorldSummary world;
  std::vector<TrajectoryRecord> trajectories;
  std::vector<double> rewards;
  GroupLabel label = GroupLabel::mixed;
  bool is_cut = false;
  std::map<int, DivergenceVector> divergence;
  std::optional<GateDecision> gate;
};

// Three-way outcome label from the multiset of terminal rewards.
// Rewards must be binary {0,1} and the group must have at least two
// members; anything else throws std::invalid_argument.
GroupLabel group_label(std::span<const double> rewards);

// A group has zero reward variance exactly when its label is not mixed.
bool zero_variance(GroupLabel label);
bool zero_variance(std::span<const double> rewards);

// Total environment steps emitted across the group (the compute-cost proxy
// used everywhere in place of wall-clock time).
long long step_tokens(const GroupRecord& group);
long long step_tokens(std::span<const GroupRecord> corpus);

// Shared run parameters. Defaults are the standard operating point.
struct RunConfig {
  int g = 8;
  int t_max = 30;
  int k = 10;
  double d_l = 0.12;
  std::optional<double> tau_h;
  double epsilon = 1e-4;
  std::uint64_t seed = 42;
  int n_groups = 100;
};

// Throws std::invalid_argument naming the offending field.
void validate(const RunConfig& cfg);

// ---------------------------------------------------------------------------
// Corpus serialization: JSONL, one group per line, preceded by one header
// line carrying the schema tag, config hash and master seed.

struct CorpusHeader {
  std::string schema = "rollgate/corpus/v1";
  std::string config_hash;
  std::uint64_t seed = 0;
};

std::string to_jsonl_line(const GroupRecord& group);
GroupRecord group_from_jsonl_line(const std::string& line);

std::string header_jsonl_line(const CorpusHeader& header);

struct Corpus {
  std::optional<CorpusHeader> header;
  std::vector<GroupRecord> groups;
};

void write_corpus(const std::string& path, const CorpusHeader& header,
                  std::span<const GroupRecord> groups);
Corpus read_corpus(const std::string& path);

}  // namespace rollgate::core
