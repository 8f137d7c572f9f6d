#include "rollgate/simenv.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

#include "rollgate/divergence.hpp"
#include "rollgate/gate.hpp"
#include "rollgate/rng.hpp"

namespace rollgate::simenv {

std::span<const TaskType> task_types() {
  static const std::array<TaskType, 6> kTypes{{
      {"rooms_08", 8, 0.24},
      {"rooms_10", 10, 0.20},
      {"rooms_12", 12, 0.18},
      {"rooms_14", 14, 0.11},
      {"rooms_16", 16, 0.19},
      {"rooms_20", 20, 0.08},
  }};
  return kTypes;
}

std::uint32_t observation_category(int type_index, std::uint32_t location) {
  const std::uint64_t key =
      (static_cast<std::uint64_t>(static_cast<std::uint32_t>(type_index)) << 32) | location;
  return static_cast<std::uint32_t>(rng::splitmix64(key) & 3u);
}

bool found_at(const core::WorldSummary& world, core::ActionToken action, int step) {
  return static_cast<int>(action.symbol) == world.target_location && step > world.reveal_step;
}

SyntheticPolicy calibrated_policy(int t_max, int reveal_step) {
  if (t_max <= reveal_step)
    throw std::invalid_argument("calibrated_policy: horizon ends before the reveal step");
  SyntheticPolicy p;
  p.commitment = 0.78;
  // Per-step hit rate backed out of the target full-plan success rate over
  // the post-reveal window.
  p.skill = 1.0 - std::pow(1.0 - 0.44, 1.0 / static_cast<double>(t_max - reveal_step));
  p.action_noise = 0.02;
  return p;
}

TaskInstance sample_task(std::mt19937_64& g, int reveal_step) {
  const auto types = task_types();
  const double u = rng::uniform_real01(g);
  double acc = 0.0;
  int idx = static_cast<int>(types.size()) - 1;
  for (std::size_t i = 0; i < types.size(); ++i) {
    acc += types[i].weight;
    if (u < acc) {
      idx = static_cast<int>(i);
      break;
    }
  }
  TaskInstance task;
  task.type_index = idx;
  task.world.n_locations = types[idx].n_locations;
  task.world.target_location =
      static_cast<int>(rng::uniform_index(g, static_cast<std::uint64_t>(types[idx].n_locations)));
  task.world.reveal_step = reveal_step;
  task.world.decoy_prefix_length = 0;
  return task;
}

namespace {

std::uint32_t non_target_location(std::mt19937_64& g, int n_locations, int target) {
  const auto u = rng::uniform_index(g, static_cast<std::uint64_t>(n_locations - 1));
  const auto loc = static_cast<std::uint32_t>(u);
  return loc >= static_cast<std::uint32_t>(target) ? loc + 1 : loc;
}

void check_group_args(const TaskInstance& task, int g, int t_max) {
  if (g < 2) throw std::invalid_argument("rollout: G must be >= 2");
  if (t_max < 1) throw std::invalid_argument("rollout: T_max must be >= 1");
  if (task.world.n_locations < 2)
    throw std::invalid_argument("rollout: world needs at least two locations");
  if (task.world.target_location < 0 ||
      task.world.target_location >= task.world.n_locations)
    throw std::invalid_argument("rollout: target location out of range");
  if (task.world.reveal_step < 0 || task.world.reveal_step >= t_max)
    throw std::invalid_argument("rollout: reveal step must lie inside the horizon");
}

void emit_step(core::TrajectoryRecord& traj, const TaskInstance& task, std::uint32_t action,
               int step) {
  traj.actions.push_back({action});
  if (found_at(task.world, {action}, step)) {
    traj.observations.push_back(kFoundMarker);
    traj.terminated_at = step;
    traj.reward = 1.0;
  } else {
    traj.observations.push_back(observation_category(task.type_index, action));
  }
}

core::GroupRecord make_record(const TaskInstance& task, int g, int t_max,
                              std::uint64_t group_index) {
  core::GroupRecord rec;
  rec.prompt_id = group_index;
  rec.task_type = std::string(task_types()[task.type_index].name);
  rec.g = g;
  rec.t_max = t_max;
  rec.world = task.world;
  rec.trajectories.reserve(static_cast<std::size_t>(g));
  rec.rewards.reserve(static_cast<std::size_t>(g));
  return rec;
}

}  // namespace

core::GroupRecord rollout_group(const TaskInstance& task, const SyntheticPolicy& policy, int g,
                                int t_max, std::uint64_t seed, std::uint64_t group_index) {
  check_group_args(task, g, t_max);
  if (policy.commitment < 0.0 || policy.commitment > 1.0 || policy.skill < 0.0 ||
      policy.skill > 1.0 || policy.action_noise < 0.0 || policy.action_noise > 1.0)
    throw std::invalid_argument("rollout: policy parameters must be probabilities");

  const int n = task.world.n_locations;
  const int target = task.world.target_location;

  auto group_stream = rng::derive_stream(seed, {group_index, 0});
  std::vector<std::uint32_t> plan(static_cast<std::size_t>(t_max));
  for (auto& a : plan)
    a = rng::bernoulli(group_stream, policy.skill) ? static_cast<std::uint32_t>(target)
                                                   : non_target_location(group_stream, n, target);

  auto rec = make_record(task, g, t_max, group_index);
  for (int i = 0; i < g; ++i) {
    auto ts = rng::derive_stream(seed, {group_index, static_cast<std::uint64_t>(1 + i)});
    const bool committed = rng::bernoulli(ts, policy.commitment);
    core::TrajectoryRecord traj;
    for (int step = 1; step <= t_max; ++step) {
      std::uint32_t a;
      if (committed) {
        a = plan[static_cast<std::size_t>(step - 1)];
        // Noise only resamples non-target steps, so replay never creates or
        // destroys a hit; committed outcomes stay tied to the plan's.
        if (a != static_cast<std::uint32_t>(target) && rng::bernoulli(ts, policy.action_noise))
          a = non_target_location(ts, n, target);
      } else {
        a = rng::bernoulli(ts, policy.skill) ? static_cast<std::uint32_t>(target)
                                             : non_target_location(ts, n, target);
      }
      emit_step(traj, task, a, step);
      if (traj.terminated_at) break;
    }
    rec.rewards.push_back(traj.reward);
    rec.trajectories.push_back(std::move(traj));
  }
  rec.label = core::group_label(rec.rewards);
  return rec;
}

core::GroupRecord rollout_decoy_group(TaskInstance task, int g, int t_max,
                                      int decoy_prefix_length, double success_prob,
                                      std::uint64_t seed, std::uint64_t group_index) {
  check_group_args(task, g, t_max);
  if (decoy_prefix_length < 1 || decoy_prefix_length >= t_max)
    throw std::invalid_argument("decoy rollout: prefix length must lie inside the horizon");
  if (success_prob <= 0.0 || success_prob >= 1.0)
    throw std::invalid_argument("decoy rollout: success probability must lie in (0,1)");
  task.world.decoy_prefix_length = decoy_prefix_length;

  const int n = task.world.n_locations;
  const int target = task.world.target_location;

  auto group_stream = rng::derive_stream(seed, {group_index, 0});
  std::vector<std::uint32_t> prefix(static_cast<std::size_t>(decoy_prefix_length));
  for (auto& a : prefix) a = non_target_location(group_stream, n, target);

  const double skill_post =
      1.0 - std::pow(1.0 - success_prob, 1.0 / static_cast<double>(t_max - decoy_prefix_length));

  auto rec = make_record(task, g, t_max, group_index);
  for (int i = 0; i < g; ++i) {
    auto ts = rng::derive_stream(seed, {group_index, static_cast<std::uint64_t>(1 + i)});
    core::TrajectoryRecord traj;
    for (int step = 1; step <= decoy_prefix_length; ++step)
      emit_step(traj, task, prefix[static_cast<std::size_t>(step - 1)], step);
    for (int step = decoy_prefix_length + 1; step <= t_max; ++step) {
      const std::uint32_t a = rng::bernoulli(ts, skill_post)
                                  ? static_cast<std::uint32_t>(target)
                                  : non_target_location(ts, n, target);
      emit_step(traj, task, a, step);
      if (traj.terminated_at) break;
    }
    rec.rewards.push_back(traj.reward);
    rec.trajectories.push_back(std::move(traj));
  }
  rec.label = core::group_label(rec.rewards);
  return rec;
}

std::vector<core::GroupRecord> generate_corpus(const CorpusSpec& spec) {
  if (spec.n_groups < 1) throw std::invalid_argument("generate_corpus: need at least one group");
  if (spec.fp_fraction < 0.0 || spec.fp_fraction > 1.0)
    throw std::invalid_argument("generate_corpus: fp_fraction must lie in [0,1]");
  const SyntheticPolicy policy =
      spec.policy ? *spec.policy : calibrated_policy(spec.t_max, spec.reveal_step);

  std::vector<core::GroupRecord> corpus;
  corpus.reserve(static_cast<std::size_t>(spec.n_groups));
  for (int gi = 0; gi < spec.n_groups; ++gi) {
    const auto group_index = static_cast<std::uint64_t>(gi);
    // Task assignment lives on its own tag so it never shares draws with the
    // plan stream.
    auto assign = rng::derive_stream(spec.seed, {group_index, 0xA});
    TaskInstance task = sample_task(assign, spec.reveal_step);
    const bool decoy = rng::bernoulli(assign, spec.fp_fraction);
    corpus.push_back(decoy ? rollout_decoy_group(task, spec.g, spec.t_max,
                                                 spec.decoy_prefix_length,
                                                 spec.decoy_success_prob, spec.seed, group_index)
                           : rollout_group(task, policy, spec.g, spec.t_max, spec.seed,
                                           group_index));
  }
  return corpus;
}

void apply_gate(core::GroupRecord& group, const GateSupervisorConfig& cfg) {
  if (!cfg.enabled) return;
  if (group.is_cut) throw std::invalid_argument("apply_gate: group is already cut");
  const auto sig = divergence::compute_signals(group, cfg.k);
  group.divergence[cfg.k] = sig;

  core::GateDecision decision;
  decision.k = cfg.k;
  decision.d_k = sig.prefix_edit_distance_mean;
  decision.tau_k = sig.termination_fraction;
  if (cfg.tau_h) {
    const auto r = gate::or_rule_gate(decision.d_k, decision.tau_k, cfg.d_l, *cfg.tau_h);
    decision.cut = r.cut;
    decision.clause = r.clause;
  } else {
    decision.cut = gate::single_axis_gate(decision.d_k, cfg.d_l);
    decision.clause = decision.cut ? core::GateClause::d_clause : core::GateClause::none;
  }

  if (decision.cut) {
    decision.counterfactual_label = group.label;
    group.is_cut = true;
    // Trajectories record what was actually observed: a truncated trajectory
    // never finished, so its reward is 0; only the full-rollout label inside
    // the decision keeps the counterfactual ground truth.
    for (std::size_t i = 0; i < group.trajectories.size(); ++i) {
      auto& traj = group.trajectories[i];
      if (traj.terminated_at && *traj.terminated_at <= cfg.k) continue;
      if (traj.steps_emitted() > cfg.k) {
        traj.actions.resize(static_cast<std::size_t>(cfg.k));
        traj.observations.resize(static_cast<std::size_t>(cfg.k));
      }
      traj.terminated_at.reset();
      traj.reward = 0.0;
      group.rewards[i] = 0.0;
    }
    group.label = core::group_label(group.rewards);
  }
  group.gate = decision;
}

core::GroupRecord supervised_rollout(const TaskInstance& task, const SyntheticPolicy& policy,
                                     int g, int t_max, const GateSupervisorConfig& gate_cfg,
                                     std::uint64_t seed, std::uint64_t group_index) {
  auto group = rollout_group(task, policy, g, t_max, seed, group_index);
  apply_gate(group, gate_cfg);
  return group;
}

std::vector<core::GroupRecord> generate_supervised_corpus(const CorpusSpec& spec,
                                                          const GateSupervisorConfig& gate_cfg) {
  auto corpus = generate_corpus(spec);
  for (auto& group : corpus) apply_gate(group, gate_cfg);
  return corpus;
}

}  // namespace rollgate::simenv
