#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "rollgate/core_types.hpp"

// Synthetic multi-step search environment and the scripted policy that rolls
// groups out in it. An episode visits one location per step; the target only
// pays off after its reveal step, so early hits are wasted. Group outcomes
// correlate through a shared plan that most trajectories commit to, which is
// what gives low in-group divergence its predictive power over the final
// reward pattern.
namespace rollgate::simenv {

struct TaskType {
  std::string name;
  int n_locations = 0;
  double weight = 0.0;
};

// The fixed task mix, by layout size. Weights sum to 1.
std::span<const TaskType> task_types();

struct TaskInstance {
  int type_index = 0;
  core::WorldSummary world;
};

// Observation emitted when the target is found; episodes end there.
inline constexpr std::uint32_t kFoundMarker = 255;

// Coarse observation channel: locations collapse into four stable categories
// per task type, so observations carry less information than actions.
std::uint32_t observation_category(int type_index, std::uint32_t location);

// Success rule: visiting the target on a 1-based step past the reveal step.
bool found_at(const core::WorldSummary& world, core::ActionToken action, int step);

// Scripted group policy. skill is the per-step chance a plan step lands on
// the target; commitment is the chance a trajectory replays the shared group
// plan instead of improvising its own; action_noise resamples committed
// non-target steps.
struct SyntheticPolicy {
  double commitment = 0.0;
  double skill = 0.0;
  double action_noise = 0.0;
};

// Operating-point policy: per-step skill chosen so an improvised plan
// succeeds with probability 0.44 within the post-reveal window.
SyntheticPolicy calibrated_policy(int t_max, int reveal_step);

struct CorpusSpec {
  int g = 8;
  int t_max = 30;
  int n_groups = 100;
  std::uint64_t seed = 42;
  int reveal_step = 9;
  // Fraction of groups replaced by decoy groups: identical scripted prefix,
  // then independent continuations. They look consensus-locked at the gate
  // step but usually end mixed.
  double fp_fraction = 0.015;
  int decoy_prefix_length = 10;
  double decoy_success_prob = 0.5;
  std::optional<SyntheticPolicy> policy;  // calibrated_policy when empty
};

// Weighted task-type draw plus a uniform target location.
TaskInstance sample_task(std::mt19937_64& g, int reveal_step);

// One full uncut group under the shared-plan policy. Every random draw for
// trajectory i comes from a stream keyed by (group_index, 1+i), so cutting
// or reordering one trajectory can never shift another's outcome.
core::GroupRecord rollout_group(const TaskInstance& task, const SyntheticPolicy& policy, int g,
                                int t_max, std::uint64_t seed, std::uint64_t group_index);

// Decoy group: a shared noise-free non-target prefix of the given length,
// then per-trajectory independent continuations whose per-step skill is set
// so each trajectory succeeds with success_prob over the remaining horizon.
core::GroupRecord rollout_decoy_group(TaskInstance task, int g, int t_max,
                                      int decoy_prefix_length, double success_prob,
                                      std::uint64_t seed, std::uint64_t group_index);

// Full labeled corpus, uncut, divergence unannotated.
std::vector<core::GroupRecord> generate_corpus(const CorpusSpec& spec);

// Rollout-time supervisor configuration. tau_h empty selects the
// single-axis rule; set, the or-rule.
struct GateSupervisorConfig {
  bool enabled = true;
  int k = 10;
  double d_l = 0.12;
  std::optional<double> tau_h;
};

// Scores the group at step k, records the decision, and on a cut truncates
// every still-running trajectory to k steps, zeroing its reward: the record
// keeps what a real supervisor would have observed. The decision's
// counterfactual_label preserves the full-rollout ground truth so cut
// decisions stay scoreable afterwards. No-op when the supervisor is
// disabled.
void apply_gate(core::GroupRecord& group, const GateSupervisorConfig& cfg);

// rollout_group with the supervisor attached. A disabled supervisor makes
// this bit-identical to rollout_group at the same seed.
core::GroupRecord supervised_rollout(const TaskInstance& task, const SyntheticPolicy& policy,
                                     int g, int t_max, const GateSupervisorConfig& gate_cfg,
                                     std::uint64_t seed, std::uint64_t group_index);

// generate_corpus plus apply_gate on every group.
std::vector<core::GroupRecord> generate_supervised_corpus(const CorpusSpec& spec,
                                                          const GateSupervisorConfig& gate_cfg);

}  // namespace rollgate::simenv
