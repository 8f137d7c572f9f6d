#include "rollgate/core_types.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace rollgate::core {

using nlohmann::json;

const char* to_string(GroupLabel label) {
  switch (label) {
    case GroupLabel::all_fail: return "all_fail";
    case GroupLabel::mixed: return "mixed";
    case GroupLabel::all_succeed: return "all_succeed";
  }
  throw std::logic_error("unreachable group label");
}

GroupLabel group_label_from_string(const std::string& s) {
  if (s == "all_fail") return GroupLabel::all_fail;
  if (s == "mixed") return GroupLabel::mixed;
  if (s == "all_succeed") return GroupLabel::all_succeed;
  throw std::invalid_argument("unknown group label: " + s);
}

const char* to_string(GateClause clause) {
  switch (clause) {
    case GateClause::none: return "none";
    case GateClause::d_clause: return "d_clause";
    case GateClause::tau_clause: return "tau_clause";
    case GateClause::low_tau_clause: return "low_tau_clause";
    case GateClause::random_cut: return "random_cut";
    case GateClause::oracle: return "oracle";
  }
  throw std::logic_error("unreachable gate clause");
}

GateClause gate_clause_from_string(const std::string& s) {
  if (s == "none") return GateClause::none;
  if (s == "d_clause") return GateClause::d_clause;
  if (s == "tau_clause") return GateClause::tau_clause;
  if (s == "low_tau_clause") return GateClause::low_tau_clause;
  if (s == "random_cut") return GateClause::random_cut;
  if (s == "oracle") return GateClause::oracle;
  throw std::invalid_argument("unknown gate clause: " + s);
}

GroupLabel group_label(std::span<const double> rewards) {
  if (rewards.size() < 2)
    throw std::invalid_argument("group_label: need at least two rewards");
  bool any_one = false, any_zero = false;
  for (double r : rewards) {
    if (r == 0.0) any_zero = true;
    else if (r == 1.0) any_one = true;
    else throw std::invalid_argument("group_label: rewards must be binary {0,1}");
  }
  if (!any_zero) return GroupLabel::all_succeed;
  if (!any_one) return GroupLabel::all_fail;
  return GroupLabel::mixed;
}

bool zero_variance(GroupLabel label) { return label != GroupLabel::mixed; }

bool zero_variance(std::span<const double> rewards) {
  return zero_variance(group_label(rewards));
}

long long step_tokens(const GroupRecord& group) {
  long long total = 0;
  for (const auto& t : group.trajectories) total += t.steps_emitted();
  return total;
}

long long step_tokens(std::span<const GroupRecord> corpus) {
  long long total = 0;
  for (const auto& g : corpus) total += step_tokens(g);
  return total;
}

void validate(const RunConfig& cfg) {
  if (cfg.g < 2) throw std::invalid_argument("config field G: must be >= 2");
  if (cfg.t_max < 1) throw std::invalid_argument("config field T_max: must be >= 1");
  if (cfg.k < 1 || cfg.k >= cfg.t_max)
    throw std::invalid_argument("config field K: must satisfy 1 <= K < T_max");
  if (cfg.d_l < 0.0 || cfg.d_l > 1.0)
    throw std::invalid_argument("config field d_L: must be in [0,1]");
  if (cfg.tau_h && (*cfg.tau_h < 0.0 || *cfg.tau_h > 1.0))
    throw std::invalid_argument("config field tau_H: must be in [0,1]");
  if (cfg.epsilon < 0.0)
    throw std::invalid_argument("config field epsilon: must be >= 0");
  if (cfg.n_groups < 1)
    throw std::invalid_argument("config field N_groups: must be >= 1");
}

// --- JSON mapping -----------------------------------------------------------

namespace {

json divergence_to_json(const DivergenceVector& d) {
  return json{{"k", d.k},
              {"prefix_edit_distance_mean", d.prefix_edit_distance_mean},
              {"action_bigram_jaccard_mean", d.action_bigram_jaccard_mean},
              {"unique_prefix_ratio", d.unique_prefix_ratio},
              {"unique_action_ratio", d.unique_action_ratio},
              {"action_entropy", d.action_entropy},
              {"obs_unique_ratio", d.obs_unique_ratio},
              {"termination_fraction", d.termination_fraction}};
}

DivergenceVector divergence_from_json(const json& j) {
  DivergenceVector d;
  d.k = j.at("k").get<int>();
  d.prefix_edit_distance_mean = j.at("prefix_edit_distance_mean").get<double>();
  d.action_bigram_jaccard_mean = j.at("action_bigram_jaccard_mean").get<double>();
  d.unique_prefix_ratio = j.at("unique_prefix_ratio").get<double>();
  d.unique_action_ratio = j.at("unique_action_ratio").get<double>();
  d.action_entropy = j.at("action_entropy").get<double>();
  d.obs_unique_ratio = j.at("obs_unique_ratio").get<double>();
  d.termination_fraction = j.at("termination_fraction").get<double>();
  return d;
}

json gate_to_json(const GateDecision& g) {
  json j{{"cut", g.cut},
         {"clause", to_string(g.clause)},
         {"k", g.k},
         {"d_k", g.d_k},
         {"tau_k", g.tau_k}};
  if (g.counterfactual_label) j["counterfactual_label"] = to_string(*g.counterfactual_label);
  else j["counterfactual_label"] = nullptr;
  return j;
}

GateDecision gate_from_json(const json& j) {
  GateDecision g;
  g.cut = j.at("cut").get<bool>();
  g.clause = gate_clause_from_string(j.at("clause").get<std::string>());
  g.k = j.at("k").get<int>();
  g.d_k = j.at("d_k").get<double>();
  g.tau_k = j.at("tau_k").get<double>();
  if (j.contains("counterfactual_label") && !j.at("counterfactual_label").is_null())
    g.counterfactual_label = group_label_from_string(j.at("counterfactual_label").get<std::string>());
  return g;
}

void validate_record(const GroupRecord& g) {
  if (g.g < 2) throw std::invalid_argument("group record: G must be >= 2");
  if (static_cast<int>(g.trajectories.size()) != g.g)
    throw std::invalid_argument("group record: trajectory count does not match G");
  if (static_cast<int>(g.rewards.size()) != g.g)
    throw std::invalid_argument("group record: reward count does not match G");
  for (const auto& t : g.trajectories) {
    if (t.actions.size() != t.observations.size())
      throw std::invalid_argument("group record: action/observation length mismatch");
    if (t.steps_emitted() > g.t_max)
      throw std::invalid_argument("group record: trajectory longer than T_max");
    if (t.terminated_at && *t.terminated_at != t.steps_emitted())
      throw std::invalid_argument("group record: terminated_at does not match steps emitted");
  }
  if (group_label(g.rewards) != g.label)
    throw std::invalid_argument("group record: stored label does not match rewards");
  if (g.gate && g.is_cut != g.gate->cut)
    throw std::invalid_argument("group record: is_cut does not match gate decision");
  if (g.is_cut && !g.gate)
    throw std::invalid_argument("group record: cut group missing gate decision");
}

}  // namespace

std::string to_jsonl_line(const GroupRecord& group) {
  json trajs = json::array();
  for (const auto& t : group.trajectories) {
    json actions = json::array();
    for (auto a : t.actions) actions.push_back(a.symbol);
    json j{{"actions", std::move(actions)},
           {"observations", t.observations},
           {"steps_emitted", t.steps_emitted()},
           {"reward", t.reward}};
    if (t.terminated_at) j["terminated_at"] = *t.terminated_at;
    else j["terminated_at"] = nullptr;
    trajs.push_back(std::move(j));
  }
  json div = json::object();
  for (const auto& [k, d] : group.divergence) div[std::to_string(k)] = divergence_to_json(d);
  json j{{"prompt_id", group.prompt_id},
         {"task_type", group.task_type},
         {"G", group.g},
         {"T_max", group.t_max},
         {"world",
          {{"n_locations", group.world.n_locations},
           {"target_location", group.world.target_location},
           {"reveal_step", group.world.reveal_step},
           {"decoy_prefix_length", group.world.decoy_prefix_length}}},
         {"rewards", group.rewards},
         {"label", to_string(group.label)},
         {"is_cut", group.is_cut},
         {"trajectories", std::move(trajs)},
         {"divergence", std::move(div)}};
  if (group.gate) j["gate"] = gate_to_json(*group.gate);
  else j["gate"] = nullptr;
  return j.dump();
}

GroupRecord group_from_jsonl_line(const std::string& line) {
  json j = json::parse(line);
  GroupRecord g;
  g.prompt_id = j.at("prompt_id").get<std::uint64_t>();
  g.task_type = j.at("task_type").get<std::string>();
  g.g = j.at("G").get<int>();
  g.t_max = j.at("T_max").get<int>();
  const json& w = j.at("world");
  g.world.n_locations = w.at("n_locations").get<int>();
  g.world.target_location = w.at("target_location").get<int>();
  g.world.reveal_step = w.at("reveal_step").get<int>();
  g.world.decoy_prefix_length = w.at("decoy_prefix_length").get<int>();
  g.rewards = j.at("rewards").get<std::vector<double>>();
  g.label = group_label_from_string(j.at("label").get<std::string>());
  g.is_cut = j.at("is_cut").get<bool>();
  for (const auto& tj : j.at("trajectories")) {
    TrajectoryRecord t;
    for (const auto& a : tj.at("actions")) t.actions.push_back({a.get<std::uint32_t>()});
    t.observations = tj.at("observations").get<std::vector<std::uint32_t>>();
    t.reward = tj.at("reward").get<double>();
    if (!tj.at("terminated_at").is_null()) t.terminated_at = tj.at("terminated_at").get<int>();
    if (tj.at("steps_emitted").get<int>() != t.steps_emitted())
      throw std::invalid_argument("group record: steps_emitted does not match action count");
    g.trajectories.push_back(std::move(t));
  }
  for (const auto& [key, dj] : j.at("divergence").items())
    g.divergence[std::stoi(key)] = divergence_from_json(dj);
  if (j.contains("gate") && !j.at("gate").is_null()) g.gate = gate_from_json(j.at("gate"));
  validate_record(g);
  return g;
}

std::string header_jsonl_line(const CorpusHeader& header) {
  return json{{"schema", header.schema},
              {"config_hash", header.config_hash},
              {"seed", header.seed}}
      .dump();
}

void write_corpus(const std::string& path, const CorpusHeader& header,
                  std::span<const GroupRecord> groups) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << header_jsonl_line(header) << '\n';
  for (const auto& g : groups) out << to_jsonl_line(g) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

Corpus read_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus: " + path);
  Corpus corpus;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (first) {
      first = false;
      json j = json::parse(line);
      if (j.is_object() && j.contains("schema")) {
        CorpusHeader h;
        h.schema = j.at("schema").get<std::string>();
        h.config_hash = j.at("config_hash").get<std::string>();
        h.seed = j.at("seed").get<std::uint64_t>();
        corpus.header = std::move(h);
        continue;
      }
    }
    corpus.groups.push_back(group_from_jsonl_line(line));
  }
  return corpus;
}

}  // namespace rollgate::core
