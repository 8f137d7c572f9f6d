#include "rollgate/toytrain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "json.hpp"
#include "rollgate/divergence.hpp"
#include "rollgate/gate.hpp"
#include "rollgate/grpo_math.hpp"
#include "rollgate/rng.hpp"

namespace rollgate::toytrain {

using nlohmann::json;

int state_index(int type_index, int target_location) {
  if (type_index < 0 || type_index >= static_cast<int>(simenv::task_types().size()))
    throw std::invalid_argument("state_index: unknown task type index");
  if (target_location < 0 || target_location >= kMaxActions)
    throw std::invalid_argument("state_index: target location out of range");
  return type_index * kMaxActions + target_location;
}

int type_index_from_name(const std::string& task_type) {
  const auto types = simenv::task_types();
  for (std::size_t i = 0; i < types.size(); ++i)
    if (types[i].name == task_type) return static_cast<int>(i);
  throw std::invalid_argument("unknown task type: " + task_type);
}

int state_index(const core::GroupRecord& group) {
  return state_index(type_index_from_name(group.task_type), group.world.target_location);
}

TabularPolicy init_policy(double sigma, std::uint64_t seed) {
  if (sigma < 0.0) throw std::invalid_argument("init_policy: sigma must be >= 0");
  TabularPolicy policy;
  policy.logits.resize(static_cast<std::size_t>(kNumStates) * kMaxActions);
  auto g = rng::derive_stream(seed, {0x101});
  for (auto& z : policy.logits) z = rng::normal(g, 0.0, sigma);
  return policy;
}

std::vector<double> action_probs(const TabularPolicy& policy, int state, int n_actions) {
  if (state < 0 || state >= kNumStates) throw std::invalid_argument("action_probs: bad state");
  if (n_actions < 1 || n_actions > kMaxActions)
    throw std::invalid_argument("action_probs: bad action count");
  std::vector<double> p(static_cast<std::size_t>(n_actions), 0.0);
  if (policy.temperature == 0.0) {
    p[static_cast<std::size_t>(greedy_action(policy, state, n_actions))] = 1.0;
    return p;
  }
  double zmax = policy.logit(state, 0);
  for (int a = 1; a < n_actions; ++a) zmax = std::max(zmax, policy.logit(state, a));
  double total = 0.0;
  for (int a = 0; a < n_actions; ++a) {
    p[static_cast<std::size_t>(a)] =
        std::exp((policy.logit(state, a) - zmax) / policy.temperature);
    total += p[static_cast<std::size_t>(a)];
  }
  for (auto& v : p) v /= total;
  return p;
}

int greedy_action(const TabularPolicy& policy, int state, int n_actions) {
  if (state < 0 || state >= kNumStates) throw std::invalid_argument("greedy_action: bad state");
  if (n_actions < 1 || n_actions > kMaxActions)
    throw std::invalid_argument("greedy_action: bad action count");
  int best = 0;
  for (int a = 1; a < n_actions; ++a)
    if (policy.logit(state, a) > policy.logit(state, best)) best = a;
  return best;
}

int sample_action(const TabularPolicy& policy, int state, int n_actions, std::mt19937_64& g) {
  if (policy.temperature == 0.0) return greedy_action(policy, state, n_actions);
  const auto p = action_probs(policy, state, n_actions);
  const double u = rng::uniform_real01(g);
  double acc = 0.0;
  for (int a = 0; a < n_actions; ++a) {
    acc += p[static_cast<std::size_t>(a)];
    if (u < acc) return a;
  }
  return n_actions - 1;
}

core::GroupRecord policy_rollout_group(const TabularPolicy& policy,
                                       const simenv::TaskInstance& task, int g, int t_max,
                                       std::uint64_t seed, std::uint64_t iter_tag,
                                       std::uint64_t slot_tag) {
  if (g < 2) throw std::invalid_argument("policy rollout: G must be >= 2");
  if (t_max < 1) throw std::invalid_argument("policy rollout: T_max must be >= 1");
  const int s = state_index(task.type_index, task.world.target_location);
  const int n = task.world.n_locations;

  core::GroupRecord rec;
  rec.prompt_id = (iter_tag << 16) | slot_tag;
  rec.task_type = simenv::task_types()[static_cast<std::size_t>(task.type_index)].name;
  rec.g = g;
  rec.t_max = t_max;
  rec.world = task.world;
  for (int i = 0; i < g; ++i) {
    auto ts = rng::derive_stream(seed, {0x7b, iter_tag, slot_tag,
                                        static_cast<std::uint64_t>(1 + i)});
    core::TrajectoryRecord traj;
    for (int step = 1; step <= t_max; ++step) {
      const auto a = static_cast<std::uint32_t>(sample_action(policy, s, n, ts));
      traj.actions.push_back({a});
      if (simenv::found_at(task.world, {a}, step)) {
        traj.observations.push_back(simenv::kFoundMarker);
        traj.terminated_at = step;
        traj.reward = 1.0;
        break;
      }
      traj.observations.push_back(simenv::observation_category(task.type_index, a));
    }
    rec.rewards.push_back(traj.reward);
    rec.trajectories.push_back(std::move(traj));
  }
  rec.label = core::group_label(rec.rewards);
  return rec;
}

LossGrad batch_loss_gradient(std::span<const core::GroupRecord> batch,
                             const TabularPolicy& policy, double epsilon) {
  if (policy.temperature <= 0.0)
    throw std::invalid_argument("batch gradient: needs a positive sampling temperature");
  LossGrad out;
  out.gradient.assign(policy.logits.size(), 0.0);

  int n_total = 0;
  for (const auto& group : batch) {
    if (group.is_cut) continue;
    n_total += static_cast<int>(group.trajectories.size());
    out.n_groups_kept++;
  }
  out.n_trajectories = n_total;
  if (n_total == 0) return out;

  const double inv_n = 1.0 / static_cast<double>(n_total);
  for (const auto& group : batch) {
    if (group.is_cut) continue;
    const int s = state_index(group);
    const int n_actions = group.world.n_locations;
    const auto probs = action_probs(policy, s, n_actions);
    const auto adv = grpo::advantages(group.rewards, epsilon);
    for (std::size_t i = 0; i < group.trajectories.size(); ++i) {
      const double a_i = adv.values[i];
      if (a_i == 0.0) out.n_zero_advantage++;
      const auto& traj = group.trajectories[i];
      double logp = 0.0;
      std::vector<int> counts(static_cast<std::size_t>(n_actions), 0);
      for (const auto& act : traj.actions) {
        counts[act.symbol]++;
        logp += std::log(probs[act.symbol]);
      }
      out.loss += -inv_n * a_i * logp;
      if (a_i == 0.0) continue;
      // d logp / d z_b = (count_b - T * pi_b) / temperature, summed over the
      // trajectory's action steps.
      const double t_steps = static_cast<double>(traj.actions.size());
      const double scale = -inv_n * a_i / policy.temperature;
      for (int b = 0; b < n_actions; ++b) {
        const double dlogp = static_cast<double>(counts[static_cast<std::size_t>(b)]) -
                             t_steps * probs[static_cast<std::size_t>(b)];
        out.gradient[static_cast<std::size_t>(s) * kMaxActions + static_cast<std::size_t>(b)] +=
            scale * dlogp;
      }
    }
  }
  return out;
}

namespace {

double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

BatchStats grpo_step(std::span<const core::GroupRecord> batch, TabularPolicy& policy,
                     double learning_rate, double epsilon) {
  const auto lg = batch_loss_gradient(batch, policy, epsilon);
  BatchStats stats;
  stats.loss = lg.loss;
  stats.n_trajectories = lg.n_trajectories;
  stats.n_zero_advantage = lg.n_zero_advantage;
  stats.n_groups_kept = lg.n_groups_kept;
  if (lg.n_trajectories == 0) return stats;  // everything was cut; skip the update
  stats.zero_advantage_fraction =
      static_cast<double>(lg.n_zero_advantage) / static_cast<double>(lg.n_trajectories);
  stats.gradient_l2 = l2_norm(lg.gradient);
  for (std::size_t i = 0; i < policy.logits.size(); ++i)
    policy.logits[i] -= learning_rate * lg.gradient[i];
  stats.updated = true;
  return stats;
}

long long train_items(std::span<const core::GroupRecord> batch, int position_cap) {
  if (position_cap < 1) throw std::invalid_argument("train_items: cap must be >= 1");
  long long items = 0;
  for (const auto& group : batch) {
    if (group.is_cut) continue;
    for (const auto& traj : group.trajectories)
      items += std::min(traj.steps_emitted(), position_cap);
  }
  return items;
}

ArmSelect arm_select_from_string(const std::string& s) {
  if (s == "baseline") return ArmSelect::baseline;
  if (s == "gated") return ArmSelect::gated;
  if (s == "both") return ArmSelect::both;
  throw std::invalid_argument("unknown arm: " + s + " (expected baseline, gated or both)");
}

Tier2Result run_tier2(std::span<const core::GroupRecord> buffer, const Tier2Config& cfg,
                      ArmSelect arms) {
  if (buffer.empty()) throw std::invalid_argument("tier2: empty buffer");
  if (cfg.groups_per_step < 1 ||
      static_cast<std::size_t>(cfg.groups_per_step) > buffer.size())
    throw std::invalid_argument("tier2: groups_per_step must fit the buffer");
  if (cfg.steps < 1) throw std::invalid_argument("tier2: steps must be >= 1");
  std::vector<double> d_k(buffer.size());
  for (std::size_t i = 0; i < buffer.size(); ++i) {
    if (buffer[i].is_cut) throw std::invalid_argument("tier2: buffer contains cut groups");
    const auto it = buffer[i].divergence.find(cfg.k);
    if (it == buffer[i].divergence.end())
      throw std::invalid_argument("tier2: buffer lacks divergence at k=" +
                                  std::to_string(cfg.k));
    d_k[i] = it->second.prefix_edit_distance_mean;
  }

  const bool run_base = arms != ArmSelect::gated;
  const bool run_gated = arms != ArmSelect::baseline;
  TabularPolicy pol_base = init_policy(cfg.sigma_init, cfg.seed);
  pol_base.temperature = cfg.temperature;
  TabularPolicy pol_gated = pol_base;

  Tier2Result result;
  double sum_base = 0.0, sum_gated = 0.0;
  int n_base = 0, n_gated = 0;
  for (int step = 1; step <= cfg.steps; ++step) {
    auto pick = rng::derive_stream(cfg.seed, {0x72, static_cast<std::uint64_t>(step)});
    std::vector<std::size_t> idx(buffer.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (int j = 0; j < cfg.groups_per_step; ++j) {
      const std::size_t swap_with =
          static_cast<std::size_t>(j) + rng::uniform_index(pick, idx.size() - static_cast<std::size_t>(j));
      std::swap(idx[static_cast<std::size_t>(j)], idx[swap_with]);
    }

    std::vector<core::GroupRecord> batch_full;
    std::vector<core::GroupRecord> batch_kept;
    int cut_count = 0;
    for (int j = 0; j < cfg.groups_per_step; ++j) {
      const auto& group = buffer[idx[static_cast<std::size_t>(j)]];
      batch_full.push_back(group);
      if (gate::single_axis_gate(d_k[idx[static_cast<std::size_t>(j)]], cfg.d_l))
        cut_count++;
      else
        batch_kept.push_back(group);
    }

    if (run_base) {
      const auto stats = grpo_step(batch_full, pol_base, cfg.learning_rate, cfg.epsilon);
      Tier2StepRow row;
      row.step = step;
      row.arm = "baseline";
      row.groups_sampled = cfg.groups_per_step;
      row.groups_trained = stats.n_groups_kept;
      row.cut_count = 0;
      row.items = train_items(batch_full, cfg.position_cap);
      row.loss = stats.loss;
      row.gradient_l2 = stats.gradient_l2;
      row.zero_advantage_fraction = stats.zero_advantage_fraction;
      result.rows.push_back(std::move(row));
      if (stats.updated) {
        sum_base += stats.gradient_l2;
        n_base++;
      }
    }
    if (run_gated) {
      const auto stats = grpo_step(batch_kept, pol_gated, cfg.learning_rate, cfg.epsilon);
      Tier2StepRow row;
      row.step = step;
      row.arm = "gated";
      row.groups_sampled = cfg.groups_per_step;
      row.groups_trained = stats.n_groups_kept;
      row.cut_count = cut_count;
      row.items = train_items(batch_kept, cfg.position_cap);
      row.loss = stats.loss;
      row.gradient_l2 = stats.gradient_l2;
      row.zero_advantage_fraction = stats.zero_advantage_fraction;
      result.rows.push_back(std::move(row));
      if (stats.updated) {
        sum_gated += stats.gradient_l2;
        n_gated++;
      }
    }
  }
  if (n_base > 0) result.mean_grad_baseline = sum_base / n_base;
  if (n_gated > 0) result.mean_grad_gated = sum_gated / n_gated;
  if (result.mean_grad_baseline > 0.0)
    result.grad_ratio = result.mean_grad_gated / result.mean_grad_baseline;
  return result;
}

namespace {

double heldout_success_rate(const TabularPolicy& policy,
                            std::span<const simenv::TaskInstance> tasks, int t_max) {
  if (tasks.empty()) return 0.0;
  TabularPolicy greedy = policy;
  greedy.temperature = 0.0;
  int successes = 0;
  for (const auto& task : tasks) {
    const int s = state_index(task.type_index, task.world.target_location);
    bool found = false;
    for (int step = 1; step <= t_max && !found; ++step) {
      const auto a =
          static_cast<std::uint32_t>(greedy_action(greedy, s, task.world.n_locations));
      found = simenv::found_at(task.world, {a}, step);
    }
    if (found) successes++;
  }
  return static_cast<double>(successes) / static_cast<double>(tasks.size());
}

double mean_reward_uncut(std::span<const core::GroupRecord> groups) {
  double total = 0.0;
  int n = 0;
  for (const auto& g : groups) {
    if (g.is_cut) continue;
    for (double r : g.rewards) {
      total += r;
      n++;
    }
  }
  return n > 0 ? total / n : 0.0;
}

}  // namespace

Tier3Result run_tier3(const Tier3Config& cfg) {
  if (cfg.iterations < 1 || cfg.prompts_per_iter < 1)
    throw std::invalid_argument("tier3: iterations and prompts_per_iter must be >= 1");
  if (cfg.seeds.empty()) throw std::invalid_argument("tier3: needs at least one seed");
  if (cfg.eval_every < 1) throw std::invalid_argument("tier3: eval_every must be >= 1");

  Tier3Result result;
  double grad_sum_base = 0.0, grad_sum_gated = 0.0;
  long long grad_n_base = 0, grad_n_gated = 0;
  long long zero_base = 0, traj_base = 0, zero_gated = 0, traj_gated = 0;

  simenv::GateSupervisorConfig supervisor;
  supervisor.enabled = true;
  supervisor.k = cfg.k;
  supervisor.d_l = cfg.d_l;
  supervisor.tau_h = cfg.tau_h;

  for (const auto seed : cfg.seeds) {
    TabularPolicy pol_base = init_policy(cfg.sigma_init, seed);
    pol_base.temperature = cfg.temp_rollout;
    TabularPolicy pol_gated = pol_base;

    std::vector<simenv::TaskInstance> heldout;
    auto eval_stream = rng::derive_stream(seed, {0xe7a1});
    for (int j = 0; j < cfg.heldout_tasks; ++j)
      heldout.push_back(simenv::sample_task(eval_stream, cfg.reveal_step));

    long long tokens_base = 0, tokens_gated = 0;
    int cuts_total = 0;
    double grad_acc_base = 0.0, grad_acc_gated = 0.0;
    int upd_base = 0, upd_gated = 0;

    for (int iter = 0; iter < cfg.iterations; ++iter) {
      std::vector<simenv::TaskInstance> prompts;
      for (int slot = 0; slot < cfg.prompts_per_iter; ++slot) {
        auto ps = rng::derive_stream(seed, {0x731, static_cast<std::uint64_t>(iter),
                                            static_cast<std::uint64_t>(slot)});
        prompts.push_back(simenv::sample_task(ps, cfg.reveal_step));
      }

      const bool eval_point = (iter % cfg.eval_every) == 0;
      const std::optional<double> eval_base =
          eval_point ? std::optional<double>(heldout_success_rate(pol_base, heldout, cfg.t_max))
                     : std::nullopt;
      const std::optional<double> eval_gated =
          eval_point ? std::optional<double>(heldout_success_rate(pol_gated, heldout, cfg.t_max))
                     : std::nullopt;

      std::vector<core::GroupRecord> groups_base, groups_gated;
      int zv_base = 0, zv_gated = 0, cut_count = 0;
      for (int slot = 0; slot < cfg.prompts_per_iter; ++slot) {
        auto gb = policy_rollout_group(pol_base, prompts[static_cast<std::size_t>(slot)],
                                       cfg.g, cfg.t_max, seed,
                                       static_cast<std::uint64_t>(iter),
                                       static_cast<std::uint64_t>(slot));
        zv_base += core::zero_variance(gb.label);
        groups_base.push_back(std::move(gb));

        auto gg = policy_rollout_group(pol_gated, prompts[static_cast<std::size_t>(slot)],
                                       cfg.g, cfg.t_max, seed,
                                       static_cast<std::uint64_t>(iter),
                                       static_cast<std::uint64_t>(slot));
        zv_gated += core::zero_variance(gg.label);
        simenv::apply_gate(gg, supervisor);
        if (gg.is_cut) cut_count++;
        groups_gated.push_back(std::move(gg));
      }
      cuts_total += cut_count;
      tokens_base += core::step_tokens(groups_base);
      tokens_gated += core::step_tokens(groups_gated);

      const auto stats_base = grpo_step(groups_base, pol_base, cfg.learning_rate, cfg.epsilon);
      const auto stats_gated =
          grpo_step(groups_gated, pol_gated, cfg.learning_rate, cfg.epsilon);

      TelemetryRow row_base;
      row_base.seed = seed;
      row_base.arm = "baseline";
      row_base.iteration = iter;
      row_base.cut_count = 0;
      row_base.zero_variance_count = zv_base;
      row_base.zero_advantage_item_fraction = stats_base.zero_advantage_fraction;
      row_base.gradient_l2 = stats_base.gradient_l2;
      row_base.updated = stats_base.updated;
      row_base.mean_train_reward_uncut = mean_reward_uncut(groups_base);
      row_base.heldout_success = eval_base;
      row_base.step_tokens_cum = tokens_base;
      result.rows.push_back(row_base);

      TelemetryRow row_gated;
      row_gated.seed = seed;
      row_gated.arm = "gated";
      row_gated.iteration = iter;
      row_gated.cut_count = cut_count;
      row_gated.zero_variance_count = zv_gated;
      row_gated.zero_advantage_item_fraction = stats_gated.zero_advantage_fraction;
      row_gated.gradient_l2 = stats_gated.gradient_l2;
      row_gated.updated = stats_gated.updated;
      row_gated.mean_train_reward_uncut =
          stats_gated.n_trajectories > 0 ? std::optional<double>(mean_reward_uncut(groups_gated))
                                         : std::nullopt;
      row_gated.heldout_success = eval_gated;
      row_gated.step_tokens_cum = tokens_gated;
      result.rows.push_back(row_gated);

      if (stats_base.updated) {
        grad_sum_base += stats_base.gradient_l2;
        grad_n_base++;
        grad_acc_base += stats_base.gradient_l2;
        upd_base++;
        zero_base += stats_base.n_zero_advantage;
        traj_base += stats_base.n_trajectories;
      }
      if (stats_gated.updated) {
        grad_sum_gated += stats_gated.gradient_l2;
        grad_n_gated++;
        grad_acc_gated += stats_gated.gradient_l2;
        upd_gated++;
        zero_gated += stats_gated.n_zero_advantage;
        traj_gated += stats_gated.n_trajectories;
      }
    }

    ArmSummary sum_base;
    sum_base.seed = seed;
    sum_base.arm = "baseline";
    sum_base.step_tokens_total = tokens_base;
    sum_base.cut_total = 0;
    sum_base.final_heldout_success = heldout_success_rate(pol_base, heldout, cfg.t_max);
    sum_base.mean_gradient_l2 = upd_base > 0 ? grad_acc_base / upd_base : 0.0;
    result.summaries.push_back(sum_base);

    ArmSummary sum_gated;
    sum_gated.seed = seed;
    sum_gated.arm = "gated";
    sum_gated.step_tokens_total = tokens_gated;
    sum_gated.cut_total = cuts_total;
    sum_gated.final_heldout_success = heldout_success_rate(pol_gated, heldout, cfg.t_max);
    sum_gated.mean_gradient_l2 = upd_gated > 0 ? grad_acc_gated / upd_gated : 0.0;
    result.summaries.push_back(sum_gated);
  }

  if (traj_base > 0) result.dilution.z_base =
      static_cast<double>(zero_base) / static_cast<double>(traj_base);
  if (traj_gated > 0) result.dilution.z_gated =
      static_cast<double>(zero_gated) / static_cast<double>(traj_gated);
  if (result.dilution.z_base < 1.0 && result.dilution.z_gated < 1.0)
    result.dilution.predicted_ratio =
        grpo::dilution_ratio(result.dilution.z_base, result.dilution.z_gated);
  if (grad_n_base > 0 && grad_n_gated > 0 && grad_sum_base > 0.0)
    result.dilution.measured_ratio =
        (grad_sum_gated / static_cast<double>(grad_n_gated)) /
        (grad_sum_base / static_cast<double>(grad_n_base));
  return result;
}

std::string telemetry_to_jsonl_line(const TelemetryRow& row) {
  json j{{"seed", row.seed},
         {"arm", row.arm},
         {"iteration", row.iteration},
         {"cut_count", row.cut_count},
         {"zero_variance_count", row.zero_variance_count},
         {"zero_advantage_item_fraction", row.zero_advantage_item_fraction},
         {"gradient_l2", row.gradient_l2},
         {"updated", row.updated},
         {"step_tokens_cum", row.step_tokens_cum}};
  if (row.mean_train_reward_uncut) j["mean_train_reward_uncut"] = *row.mean_train_reward_uncut;
  else j["mean_train_reward_uncut"] = nullptr;
  if (row.heldout_success) j["heldout_success"] = *row.heldout_success;
  else j["heldout_success"] = nullptr;
  return j.dump();
}

TelemetryRow telemetry_from_jsonl_line(const std::string& line) {
  const json j = json::parse(line);
  TelemetryRow row;
  row.seed = j.at("seed").get<std::uint64_t>();
  row.arm = j.at("arm").get<std::string>();
  row.iteration = j.at("iteration").get<int>();
  row.cut_count = j.at("cut_count").get<int>();
  row.zero_variance_count = j.at("zero_variance_count").get<int>();
  row.zero_advantage_item_fraction = j.at("zero_advantage_item_fraction").get<double>();
  row.gradient_l2 = j.at("gradient_l2").get<double>();
  row.updated = j.at("updated").get<bool>();
  row.step_tokens_cum = j.at("step_tokens_cum").get<long long>();
  if (!j.at("mean_train_reward_uncut").is_null())
    row.mean_train_reward_uncut = j.at("mean_train_reward_uncut").get<double>();
  if (!j.at("heldout_success").is_null())
    row.heldout_success = j.at("heldout_success").get<double>();
  return row;
}

}  // namespace rollgate::toytrain
