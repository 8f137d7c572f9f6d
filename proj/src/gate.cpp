#include "rollgate/gate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "rollgate/grpo_math.hpp"
#include "rollgate/rng.hpp"

namespace rollgate::gate {

bool single_axis_gate(double d_k, double d_l) { return d_k < d_l; }

RuleDecision or_rule_gate(double d_k, double tau_k, double d_l, double tau_h) {
  if (d_k < d_l) return {true, core::GateClause::d_clause};
  if (tau_k >= tau_h) return {true, core::GateClause::tau_clause};
  return {false, core::GateClause::none};
}

RuleDecision low_tau_mirror_gate(double d_k, double tau_k, double d_l, double t_l) {
  if (d_k < d_l) return {true, core::GateClause::d_clause};
  if (tau_k <= t_l) return {true, core::GateClause::low_tau_clause};
  return {false, core::GateClause::none};
}

std::vector<char> random_cut_mask(std::size_t n, std::size_t budget, std::uint64_t seed) {
  if (budget > n) throw std::invalid_argument("random_cut_mask: budget exceeds corpus size");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  auto rng = rng::derive_stream(seed, {0xc0700u});
  // Partial Fisher-Yates: the first `budget` entries are a uniform sample
  // without replacement.
  for (std::size_t i = 0; i < budget; ++i) {
    const std::size_t j = i + rng::uniform_index(rng, n - i);
    std::swap(idx[i], idx[j]);
  }
  std::vector<char> mask(n, 0);
  for (std::size_t i = 0; i < budget; ++i) mask[idx[i]] = 1;
  return mask;
}

std::vector<char> oracle_mask(std::span<const core::GroupRecord> corpus) {
  std::vector<char> mask;
  mask.reserve(corpus.size());
  for (const auto& g : corpus) mask.push_back(core::zero_variance(g.label) ? 1 : 0);
  return mask;
}

SweepRow sweep_row_from_counts(double d_l, int tp, int fp, int n_zero_variance, int n_groups,
                               int k, int t_max) {
  if (tp < 0 || fp < 0) throw std::invalid_argument("sweep row: negative counts");
  if (n_zero_variance <= 0)
    throw std::invalid_argument("sweep row: corpus has no zero-variance groups");
  if (n_groups <= 0) throw std::invalid_argument("sweep row: empty corpus");
  if (k < 1 || k >= t_max) throw std::invalid_argument("sweep row: k must be in [1, T_max)");
  SweepRow row;
  row.d_l = d_l;
  row.tp = tp;
  row.fp = fp;
  row.cut = tp + fp;
  if (row.cut > 0) row.precision = static_cast<double>(tp) / static_cast<double>(row.cut);
  row.recall = static_cast<double>(tp) / static_cast<double>(n_zero_variance);
  const double frac = static_cast<double>(t_max - k) /
                      (static_cast<double>(n_groups) * static_cast<double>(t_max));
  row.safe_pct = 100.0 * static_cast<double>(tp) * frac;
  row.raw_pct = 100.0 * static_cast<double>(row.cut) * frac;
  return row;
}

namespace {

struct Signals {
  double d = 0.0;
  double tau = 0.0;
};

// Pulls (d, tau) at k for every group; refuses already-cut groups since the
// sweeps need ground-truth final labels.
std::vector<Signals> signals_at(std::span<const core::GroupRecord> corpus, int k) {
  std::vector<Signals> out;
  out.reserve(corpus.size());
  for (const auto& g : corpus) {
    if (g.is_cut)
      throw std::invalid_argument("sweep: corpus contains cut groups; labels are counterfactual");
    const auto it = g.divergence.find(k);
    if (it == g.divergence.end())
      throw std::runtime_error("sweep: corpus missing divergence at k=" + std::to_string(k));
    out.push_back({it->second.prefix_edit_distance_mean, it->second.termination_fraction});
  }
  return out;
}

int count_zero_variance(std::span<const core::GroupRecord> corpus) {
  int n = 0;
  for (const auto& g : corpus) n += core::zero_variance(g.label);
  return n;
}

}  // namespace

std::vector<SweepRow> sweep(std::span<const core::GroupRecord> corpus, int k,
                            std::span<const double> d_l_grid) {
  if (corpus.empty()) throw std::invalid_argument("sweep: empty corpus");
  const auto sigs = signals_at(corpus, k);
  const int n_zv = count_zero_variance(corpus);
  if (n_zv == 0) throw std::invalid_argument("sweep: corpus has no zero-variance groups");
  const int t_max = corpus.front().t_max;
  std::vector<SweepRow> rows;
  rows.reserve(d_l_grid.size());
  for (double d_l : d_l_grid) {
    int tp = 0, fp = 0;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      if (!single_axis_gate(sigs[i].d, d_l)) continue;
      (core::zero_variance(corpus[i].label) ? tp : fp)++;
    }
    rows.push_back(sweep_row_from_counts(d_l, tp, fp, n_zv, static_cast<int>(corpus.size()), k,
                                         t_max));
  }
  return rows;
}

double precision_floor(double eta, int n_nonzero, int n_cut) {
  if (eta < 0.0) throw std::invalid_argument("precision_floor: eta must be >= 0");
  if (n_nonzero < 0) throw std::invalid_argument("precision_floor: negative count");
  if (n_cut <= 0) throw std::invalid_argument("precision_floor: no groups cut");
  return std::max(0.0, 1.0 - eta * static_cast<double>(n_nonzero) / static_cast<double>(n_cut));
}

std::vector<MirrorSweepPoint> low_tau_sweep(std::span<const core::GroupRecord> corpus,
                                            std::span<const int> k_grid,
                                            std::span<const double> d_l_grid,
                                            std::span<const double> t_l_grid) {
  if (corpus.empty()) throw std::invalid_argument("low_tau_sweep: empty corpus");
  std::vector<MirrorSweepPoint> points;
  for (int k : k_grid) {
    const auto sigs = signals_at(corpus, k);
    for (double d_l : d_l_grid) {
      for (double t_l : t_l_grid) {
        MirrorSweepPoint p;
        p.k = k;
        p.d_l = d_l;
        p.t_l = t_l;
        for (std::size_t i = 0; i < corpus.size(); ++i) {
          if (!low_tau_mirror_gate(sigs[i].d, sigs[i].tau, d_l, t_l).cut) continue;
          (core::zero_variance(corpus[i].label) ? p.tp : p.fp)++;
        }
        p.cut = p.tp + p.fp;
        if (p.cut > 0) p.precision = static_cast<double>(p.tp) / static_cast<double>(p.cut);
        points.push_back(p);
      }
    }
  }
  return points;
}

bool any_point_clears_floor(std::span<const MirrorSweepPoint> points, double floor) {
  for (const auto& p : points)
    if (p.precision && *p.precision >= floor) return true;
  return false;
}

namespace {

struct ArmScore {
  int tp = 0, fp = 0;
  long long saved_steps = 0;  // post-k steps the cut groups would have run
};

ArmScore score_mask(std::span<const core::GroupRecord> corpus, std::span<const char> mask,
                    int k) {
  ArmScore s;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (!mask[i]) continue;
    (core::zero_variance(corpus[i].label) ? s.tp : s.fp)++;
    for (const auto& t : corpus[i].trajectories)
      s.saved_steps += std::max(0, t.steps_emitted() - k);
  }
  return s;
}

}  // namespace

std::vector<ArmRow> arms_table(std::span<const core::GroupRecord> corpus,
                               const ArmTableConfig& cfg) {
  if (corpus.empty()) throw std::invalid_argument("arms_table: empty corpus");
  const auto sigs = signals_at(corpus, cfg.k);
  const std::size_t n = corpus.size();
  const int t_max = corpus.front().t_max;
  const long long total_steps = core::step_tokens(corpus);

  // Flat advantage vector and per-trajectory group ids for the mass metric.
  std::vector<double> adv;
  std::vector<std::size_t> owner;
  for (std::size_t i = 0; i < n; ++i) {
    const auto a = grpo::advantages(corpus[i].rewards, cfg.epsilon);
    for (double v : a.values) {
      adv.push_back(v);
      owner.push_back(i);
    }
  }

  std::vector<char> ours(n, 0), tau_only(n, 0), or_rule(n, 0), none(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    ours[i] = single_axis_gate(sigs[i].d, cfg.d_l);
    tau_only[i] = sigs[i].tau >= cfg.tau_h;
    or_rule[i] = or_rule_gate(sigs[i].d, sigs[i].tau, cfg.d_l, cfg.tau_h).cut;
  }
  const auto oracle = oracle_mask(corpus);
  const std::size_t budget = static_cast<std::size_t>(
      std::count(ours.begin(), ours.end(), char(1)));
  const auto random_mask = random_cut_mask(n, budget, cfg.seed);

  auto build = [&](const std::string& name, std::span<const char> cut_mask,
                   bool batch_filter_zv) {
    ArmRow row;
    row.arm = name;
    const auto s = score_mask(corpus, cut_mask, cfg.k);
    row.tp = s.tp;
    row.fp = s.fp;
    row.cut = s.tp + s.fp;
    if (row.cut > 0) row.precision = static_cast<double>(s.tp) / static_cast<double>(row.cut);
    row.rollout_saved_actual_pct =
        100.0 * static_cast<double>(s.saved_steps) / static_cast<double>(total_steps);
    row.rollout_saved_tmax_pct = 100.0 * static_cast<double>(row.cut) *
                                 static_cast<double>(t_max - cfg.k) /
                                 (static_cast<double>(n) * static_cast<double>(t_max));
    std::vector<char> kept(adv.size(), 1);
    for (std::size_t i = 0; i < adv.size(); ++i) {
      if (cut_mask[owner[i]]) kept[i] = 0;
      if (batch_filter_zv && core::zero_variance(corpus[owner[i]].label)) kept[i] = 0;
    }
    const auto l2 = grpo::l2_preservation(adv, kept);
    row.l2_preserved_pct = l2 ? 100.0 * *l2 : 100.0;
    return row;
  };

  std::vector<ArmRow> rows;
  rows.push_back(build("no_gate", none, false));
  rows.push_back(build("random_cut_matched", random_mask, false));
  rows.push_back(build("oracle", oracle, false));
  rows.push_back(build("posthoc_filter_oracle", none, true));
  rows.push_back(build("single_axis_d", ours, false));
  rows.push_back(build("tau_only", tau_only, false));
  rows.push_back(build("or_rule", or_rule, false));
  rows.push_back(build("single_axis_d_plus_filter", ours, true));
  return rows;
}

}  // namespace rollgate::gate
