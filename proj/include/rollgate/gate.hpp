#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rollgate/core_types.hpp"

// Cut rules, threshold sweeps and the reference cut policies they are
// compared against. All rules look only at step-k signals; ground-truth
// labels enter only when scoring decisions after the fact.
namespace rollgate::gate {

// Single-axis rule: cut when the divergence signal is strictly below the
// threshold. Ties keep the group.
bool single_axis_gate(double d_k, double d_l);

struct RuleDecision {
  bool cut = false;
  core::GateClause clause = core::GateClause::none;
};

// Cut when d_k < d_l or tau_k >= tau_h; the divergence clause is checked
// first, so it wins attribution when both fire.
RuleDecision or_rule_gate(double d_k, double tau_k, double d_l, double tau_h);

// Mirror rule: cut when d_k < d_l or tau_k <= t_l (few early terminations
// read as a stuck group). Ties on tau cut.
RuleDecision low_tau_mirror_gate(double d_k, double tau_k, double d_l, double t_l);

// Budget-matched random baseline: exactly `budget` distinct groups cut,
// chosen uniformly from the seeded stream.
std::vector<char> random_cut_mask(std::size_t n, std::size_t budget, std::uint64_t seed);

// Hindsight oracle: cut exactly the zero-variance groups.
std::vector<char> oracle_mask(std::span<const core::GroupRecord> corpus);

struct SweepRow {
  double d_l = 0.0;
  int cut = 0;  // TP + FP
  int tp = 0;
  int fp = 0;
  std::optional<double> precision;  // undefined when nothing was cut
  double recall = 0.0;
  double safe_pct = 0.0;  // TP * (T_max - K) / (N * T_max), as a percentage
  double raw_pct = 0.0;   // cut * (T_max - K) / (N * T_max)
};

// Table row from decision counts alone. n_zero_variance must be positive.
SweepRow sweep_row_from_counts(double d_l, int tp, int fp, int n_zero_variance, int n_groups,
                               int k, int t_max);

// Threshold sweep of the single-axis rule over a labeled, uncut corpus whose
// divergence at k is precomputed.
std::vector<SweepRow> sweep(std::span<const core::GroupRecord> corpus, int k,
                            std::span<const double> d_l_grid);

// Lowest acceptable precision for a gate to not destroy more gradient
// signal than tolerated: 1 - eta * n_nonzero / n_cut, clamped at zero.
double precision_floor(double eta, int n_nonzero, int n_cut);

struct MirrorSweepPoint {
  int k = 0;
  double d_l = 0.0;
  double t_l = 0.0;
  int cut = 0;
  int tp = 0;
  int fp = 0;
  std::optional<double> precision;
};

// Full operating grid of the low-tau mirror rule.
std::vector<MirrorSweepPoint> low_tau_sweep(std::span<const core::GroupRecord> corpus,
                                            std::span<const int> k_grid,
                                            std::span<const double> d_l_grid,
                                            std::span<const double> t_l_grid);

// True when some grid point with at least one cut reaches the floor.
bool any_point_clears_floor(std::span<const MirrorSweepPoint> points, double floor);

// --- reference-arm comparison ----------------------------------------------

struct ArmRow {
  std::string arm;
  int cut = 0;
  int tp = 0;
  int fp = 0;
  std::optional<double> precision;
  double rollout_saved_actual_pct = 0.0;  // saved post-k steps / total steps
  double rollout_saved_tmax_pct = 0.0;    // horizon-normalized variant
  double l2_preserved_pct = 0.0;          // advantage mass surviving the batch
};

struct ArmTableConfig {
  int k = 10;
  double d_l = 0.12;
  double tau_h = 0.90;
  double epsilon = 1e-4;
  std::uint64_t seed = 42;
};

// Scores the cut policies side by side on one labeled corpus: no gate,
// budget-matched random, hindsight oracle, post-hoc batch filtering (zero
// rollout savings by construction), the single-axis rule, the tau-only rule,
// the or-rule, and the single-axis rule combined with batch filtering.
std::vector<ArmRow> arms_table(std::span<const core::GroupRecord> corpus,
                               const ArmTableConfig& cfg);

}  // namespace rollgate::gate
