#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "rollgate/core_types.hpp"
#include "rollgate/simenv.hpp"

// Tabular softmax policy and the training loops that exercise the gate
// inside a live optimization run. The policy is deliberately tiny: one logit
// row per (task type, target) pair, so the exact policy gradient is a few
// lines and every gradient-norm identity is testable to machine precision.
namespace rollgate::toytrain {

inline constexpr int kMaxActions = 20;  // largest layout in the task mix
inline constexpr int kNumStates = 6 * kMaxActions;

// Row index for a task: one state per (type, target) pair.
int state_index(int type_index, int target_location);
int state_index(const core::GroupRecord& group);
int type_index_from_name(const std::string& task_type);

struct TabularPolicy {
  std::vector<double> logits;  // kNumStates x kMaxActions, row-major
  double temperature = 0.7;

  double& logit(int state, int action) { return logits[static_cast<std::size_t>(state) * kMaxActions + static_cast<std::size_t>(action)]; }
  double logit(int state, int action) const { return logits[static_cast<std::size_t>(state) * kMaxActions + static_cast<std::size_t>(action)]; }
};

// Logits drawn iid Normal(0, sigma); sigma controls how peaked (and thus
// how consensus-prone) the initial policy is.
TabularPolicy init_policy(double sigma, std::uint64_t seed);

// Softmax over the first n_actions logits at the policy temperature.
// Temperature zero is greedy: a one-hot on the argmax (lowest index wins
// ties). Probabilities sum to 1 within 1e-9.
std::vector<double> action_probs(const TabularPolicy& policy, int state, int n_actions);
int sample_action(const TabularPolicy& policy, int state, int n_actions, std::mt19937_64& g);
int greedy_action(const TabularPolicy& policy, int state, int n_actions);

// One group rolled out under the tabular policy. Trajectory i draws only
// from a stream keyed by (iter_tag, slot_tag, 1+i), so paired arms at the
// same seed see identical randomness.
core::GroupRecord policy_rollout_group(const TabularPolicy& policy,
                                       const simenv::TaskInstance& task, int g, int t_max,
                                       std::uint64_t seed, std::uint64_t iter_tag,
                                       std::uint64_t slot_tag);

// Loss and its exact gradient over the uncut groups of a batch, without
// touching the policy. Trajectory log-probs are sums over action steps; the
// loss is the mean of -A_i * logp_i over all kept trajectories.
struct LossGrad {
  double loss = 0.0;
  std::vector<double> gradient;  // same shape as the logit table
  int n_trajectories = 0;
  int n_zero_advantage = 0;
  int n_groups_kept = 0;
};
LossGrad batch_loss_gradient(std::span<const core::GroupRecord> batch,
                             const TabularPolicy& policy, double epsilon);

struct BatchStats {
  double loss = 0.0;
  double gradient_l2 = 0.0;
  double zero_advantage_fraction = 0.0;  // of kept trajectories
  int n_trajectories = 0;
  int n_zero_advantage = 0;
  int n_groups_kept = 0;
  bool updated = false;  // false when every group in the batch was cut
};

// One plain gradient-descent step on the batch. A batch that is empty after
// dropping cut groups skips the update and reports updated=false.
BatchStats grpo_step(std::span<const core::GroupRecord> batch, TabularPolicy& policy,
                     double learning_rate, double epsilon);

// Trajectories x counted action positions, capped per trajectory. The cap
// mirrors the training-item accounting of the reference runs; gradients
// always use every action step.
long long train_items(std::span<const core::GroupRecord> batch, int position_cap);

enum class ArmSelect { baseline, gated, both };
ArmSelect arm_select_from_string(const std::string& s);

// --- Tier 2: frozen-buffer replay -----------------------------------------

struct Tier2Config {
  int steps = 20;
  int groups_per_step = 4;
  int k = 10;
  double d_l = 0.12;
  double epsilon = 1e-4;
  double learning_rate = 5e-5;
  double temperature = 0.7;
  double sigma_init = 2.0;
  int position_cap = 8;
  std::uint64_t seed = 42;
};

struct Tier2StepRow {
  int step = 0;
  std::string arm;
  int groups_sampled = 0;
  int groups_trained = 0;
  int cut_count = 0;
  long long items = 0;
  double loss = 0.0;
  double gradient_l2 = 0.0;
  double zero_advantage_fraction = 0.0;
};

struct Tier2Result {
  std::vector<Tier2StepRow> rows;
  double mean_grad_baseline = 0.0;
  double mean_grad_gated = 0.0;
  double grad_ratio = 0.0;  // gated / baseline mean gradient norms
};

// Replays a fixed corpus: each step samples the same groups for both arms;
// the gated arm drops groups whose stored d_K clears the gate before the
// batch forms. The buffer must carry divergence at k and must be uncut.
Tier2Result run_tier2(std::span<const core::GroupRecord> buffer, const Tier2Config& cfg,
                      ArmSelect arms = ArmSelect::both);

// --- Tier 3: live training loop --------------------------------------------

struct Tier3Config {
  int iterations = 60;
  int prompts_per_iter = 10;
  int g = 8;
  int t_max = 30;
  int reveal_step = 9;
  int k = 10;
  double d_l = 0.12;
  std::optional<double> tau_h;  // set: or-rule supervisor
  double epsilon = 1e-4;
  double learning_rate = 5e-5;
  double temp_rollout = 0.7;
  double sigma_init = 2.0;
  int eval_every = 10;
  int heldout_tasks = 50;
  std::vector<std::uint64_t> seeds{7, 13, 23, 42};
};

// One training iteration of one arm at one seed.
struct TelemetryRow {
  std::uint64_t seed = 0;
  std::string arm;
  int iteration = 0;
  int cut_count = 0;
  int zero_variance_count = 0;  // ground truth over the iteration's groups
  double zero_advantage_item_fraction = 0.0;
  double gradient_l2 = 0.0;
  bool updated = false;
  std::optional<double> mean_train_reward_uncut;
  std::optional<double> heldout_success;  // greedy, at eval iterations
  long long step_tokens_cum = 0;
};

struct ArmSummary {
  std::uint64_t seed = 0;
  std::string arm;
  long long step_tokens_total = 0;
  int cut_total = 0;
  double final_heldout_success = 0.0;
  double mean_gradient_l2 = 0.0;
};

// Pooled internal-consistency numbers: the gradient-norm ratio the gate
// actually produced vs the ratio its zero-advantage accounting predicts.
struct DilutionCheck {
  double z_base = 0.0;
  double z_gated = 0.0;
  double predicted_ratio = 0.0;
  double measured_ratio = 0.0;
};

struct Tier3Result {
  std::vector<TelemetryRow> rows;
  std::vector<ArmSummary> summaries;
  DilutionCheck dilution;
};

// Paired baseline/gated runs per seed: identical policy init, identical
// prompt draws, identical per-trajectory streams; the arms differ only in
// whether the supervisor truncates and drops low-divergence groups. Cut
// groups are dropped from the batch without resampling the prompt.
Tier3Result run_tier3(const Tier3Config& cfg);

// Serialization for telemetry rows (JSONL, one row per line).
std::string telemetry_to_jsonl_line(const TelemetryRow& row);
TelemetryRow telemetry_from_jsonl_line(const std::string& line);

}  // namespace rollgate::toytrain
