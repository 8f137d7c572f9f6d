#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>
#include <vector>

#include "rollgate/core_types.hpp"
#include "rollgate/gate.hpp"

using namespace rollgate;

namespace {

// Labeled group with pinned divergence signals at k=10; trajectory content
// only matters through its step count.
core::GroupRecord scored_group(bool degenerate, double d10, double tau10, int traj_len = 30) {
  core::GroupRecord g;
  g.g = 4;
  g.t_max = 30;
  g.rewards = degenerate ? std::vector<double>{0, 0, 0, 0} : std::vector<double>{1, 0, 0, 0};
  g.label = core::group_label(g.rewards);
  for (int i = 0; i < 4; ++i) {
    core::TrajectoryRecord t;
    t.actions.assign(static_cast<std::size_t>(traj_len), {1});
    t.observations.assign(static_cast<std::size_t>(traj_len), 0);
    t.reward = g.rewards[static_cast<std::size_t>(i)];
    g.trajectories.push_back(std::move(t));
  }
  core::DivergenceVector d;
  d.k = 10;
  d.prefix_edit_distance_mean = d10;
  d.termination_fraction = tau10;
  g.divergence[10] = d;
  return g;
}

// Ten groups spanning the threshold ladder: five degenerate, five live.
std::vector<core::GroupRecord> crafted_corpus() {
  std::vector<core::GroupRecord> out;
  out.push_back(scored_group(true, 0.05, 0.00));
  out.push_back(scored_group(true, 0.08, 0.00));
  out.push_back(scored_group(true, 0.10, 0.00));
  out.push_back(scored_group(false, 0.12, 0.05));
  out.push_back(scored_group(true, 0.15, 0.00));
  out.push_back(scored_group(false, 0.20, 0.00));
  out.push_back(scored_group(false, 0.25, 0.05));
  out.push_back(scored_group(true, 0.30, 0.00));
  out.push_back(scored_group(false, 0.40, 0.00));
  out.push_back(scored_group(false, 0.50, 0.95));
  return out;
}

}  // namespace

TEST_CASE("single-axis rule cuts strictly below the threshold") {
  CHECK(gate::single_axis_gate(0.05, 0.12));
  CHECK(!gate::single_axis_gate(0.12, 0.12));
  CHECK(!gate::single_axis_gate(0.50, 0.12));
  CHECK(gate::single_axis_gate(0.1199999999, 0.12));
}

TEST_CASE("or-rule attributes the divergence clause first") {
  auto r = gate::or_rule_gate(0.50, 0.95, 0.12, 0.90);
  CHECK(r.cut);
  CHECK(r.clause == core::GateClause::tau_clause);

  r = gate::or_rule_gate(0.05, 0.00, 0.12, 0.90);
  CHECK(r.cut);
  CHECK(r.clause == core::GateClause::d_clause);

  r = gate::or_rule_gate(0.05, 0.95, 0.12, 0.90);
  CHECK(r.cut);
  CHECK(r.clause == core::GateClause::d_clause);

  r = gate::or_rule_gate(0.50, 0.89, 0.12, 0.90);
  CHECK(!r.cut);
  CHECK(r.clause == core::GateClause::none);

  // Ties: the termination clause fires at equality, divergence does not.
  CHECK(gate::or_rule_gate(0.50, 0.90, 0.12, 0.90).cut);
  CHECK(!gate::or_rule_gate(0.12, 0.50, 0.12, 0.90).cut);
}

TEST_CASE("low-tau mirror cuts few-termination groups, ties included") {
  auto r = gate::low_tau_mirror_gate(0.05, 0.90, 0.12, 0.10);
  CHECK(r.cut);
  CHECK(r.clause == core::GateClause::d_clause);

  r = gate::low_tau_mirror_gate(0.50, 0.10, 0.12, 0.10);
  CHECK(r.cut);
  CHECK(r.clause == core::GateClause::low_tau_clause);

  CHECK(!gate::low_tau_mirror_gate(0.50, 0.101, 0.12, 0.10).cut);
  CHECK(!gate::low_tau_mirror_gate(0.12, 0.50, 0.12, 0.10).cut);
}

TEST_CASE("random cut mask spends its exact budget, deterministically per seed") {
  const auto mask = gate::random_cut_mask(50, 7, 42);
  CHECK(std::count(mask.begin(), mask.end(), char(1)) == 7);
  CHECK(gate::random_cut_mask(50, 7, 42) == mask);

  bool any_differs = false;
  for (std::uint64_t seed : {1ull, 2ull, 3ull, 4ull})
    if (gate::random_cut_mask(50, 7, seed) != mask) any_differs = true;
  CHECK(any_differs);

  const auto all = gate::random_cut_mask(5, 5, 1);
  CHECK(std::count(all.begin(), all.end(), char(1)) == 5);
  const auto nothing = gate::random_cut_mask(5, 0, 1);
  CHECK(std::count(nothing.begin(), nothing.end(), char(1)) == 0);
  CHECK_THROWS_AS(gate::random_cut_mask(5, 6, 1), std::invalid_argument);
}

TEST_CASE("oracle mask marks exactly the degenerate groups") {
  const auto corpus = crafted_corpus();
  const auto mask = gate::oracle_mask(corpus);
  REQUIRE(mask.size() == corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i)
    CHECK(static_cast<bool>(mask[i]) == core::zero_variance(corpus[i].label));
}

TEST_CASE("sweep row arithmetic from raw counts") {
  const auto row = gate::sweep_row_from_counts(0.10, 17, 4, 39, 100, 10, 30);
  CHECK(row.cut == 21);
  REQUIRE(row.precision.has_value());
  CHECK(*row.precision == doctest::Approx(17.0 / 21.0).epsilon(1e-12));
  CHECK(row.recall == doctest::Approx(17.0 / 39.0).epsilon(1e-12));
  CHECK(row.safe_pct == doctest::Approx(100.0 * 17.0 * 20.0 / 3000.0).epsilon(1e-12));
  CHECK(row.raw_pct == doctest::Approx(14.0).epsilon(1e-12));
  // The raw/safe gap is exactly the false-positive share of the window.
  CHECK(row.raw_pct - row.safe_pct ==
        doctest::Approx(100.0 * 4.0 * 20.0 / 3000.0).epsilon(1e-12));

  const auto none = gate::sweep_row_from_counts(0.02, 0, 0, 39, 100, 10, 30);
  CHECK(none.cut == 0);
  CHECK(!none.precision.has_value());
  CHECK(none.recall == 0.0);
  CHECK(none.raw_pct == 0.0);

  CHECK_THROWS_AS(gate::sweep_row_from_counts(0.1, -1, 0, 39, 100, 10, 30),
                  std::invalid_argument);
  CHECK_THROWS_AS(gate::sweep_row_from_counts(0.1, 1, 0, 0, 100, 10, 30), std::invalid_argument);
  CHECK_THROWS_AS(gate::sweep_row_from_counts(0.1, 1, 0, 39, 0, 10, 30), std::invalid_argument);
  CHECK_THROWS_AS(gate::sweep_row_from_counts(0.1, 1, 0, 39, 100, 30, 30),
                  std::invalid_argument);
}

TEST_CASE("threshold sweep counts cuts against ground-truth labels") {
  const auto corpus = crafted_corpus();
  const std::vector<double> grid{0.04, 0.12, 0.18, 0.60};
  const auto rows = gate::sweep(corpus, 10, grid);
  REQUIRE(rows.size() == 4);

  CHECK(rows[0].cut == 0);
  CHECK(!rows[0].precision.has_value());

  CHECK(rows[1].cut == 3);
  CHECK(rows[1].tp == 3);
  CHECK(rows[1].fp == 0);
  CHECK(*rows[1].precision == 1.0);
  CHECK(rows[1].recall == doctest::Approx(3.0 / 5.0).epsilon(1e-12));
  CHECK(rows[1].safe_pct == doctest::Approx(100.0 * 3.0 * 20.0 / 300.0).epsilon(1e-12));

  CHECK(rows[2].cut == 5);
  CHECK(rows[2].tp == 4);
  CHECK(rows[2].fp == 1);

  CHECK(rows[3].cut == 10);
  CHECK(rows[3].recall == 1.0);
}

TEST_CASE("sweep cut counts grow monotonically with the threshold") {
  std::mt19937_64 rnd(11);
  std::uniform_real_distribution<double> d_dist(0.0, 1.0);
  std::bernoulli_distribution zv_dist(0.4);
  std::vector<core::GroupRecord> corpus;
  corpus.push_back(scored_group(true, 0.01, 0.0));  // at least one degenerate group
  for (int i = 0; i < 49; ++i) corpus.push_back(scored_group(zv_dist(rnd), d_dist(rnd), 0.0));
  std::vector<double> grid;
  for (int i = 0; i <= 20; ++i) grid.push_back(i * 0.05);
  const auto rows = gate::sweep(corpus, 10, grid);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    REQUIRE(rows[i].cut >= rows[i - 1].cut);
    REQUIRE(rows[i].recall >= rows[i - 1].recall);
    REQUIRE(rows[i].safe_pct >= rows[i - 1].safe_pct);
  }
}

TEST_CASE("sweep refuses corpora it cannot score truthfully") {
  auto corpus = crafted_corpus();
  const std::vector<double> grid{0.12};
  CHECK_THROWS_AS(gate::sweep(std::vector<core::GroupRecord>{}, 10, grid),
                  std::invalid_argument);
  CHECK_THROWS(gate::sweep(corpus, 5, grid));  // no signals stored at k=5

  auto cut_corpus = crafted_corpus();
  cut_corpus[0].is_cut = true;
  cut_corpus[0].gate = core::GateDecision{true, core::GateClause::d_clause, 10, 0.05, 0.0, {}};
  CHECK_THROWS_AS(gate::sweep(cut_corpus, 10, grid), std::invalid_argument);

  std::vector<core::GroupRecord> live_only;
  for (int i = 0; i < 4; ++i) live_only.push_back(scored_group(false, 0.2, 0.0));
  CHECK_THROWS_AS(gate::sweep(live_only, 10, grid), std::invalid_argument);
}

TEST_CASE("precision floor ground cases") {
  CHECK(gate::precision_floor(0.10, 61, 21) == doctest::Approx(0.7095238095238096).epsilon(1e-12));
  CHECK(gate::precision_floor(0.10, 61, 21) >= 0.705);
  CHECK(gate::precision_floor(0.10, 61, 21) <= 0.715);
  CHECK(gate::precision_floor(0.0, 61, 21) == 1.0);
  CHECK(gate::precision_floor(0.05, 61, 21) == doctest::Approx(0.8547619047619047).epsilon(1e-12));
  CHECK(gate::precision_floor(2.0, 100, 10) == 0.0);
  CHECK_THROWS_AS(gate::precision_floor(0.1, 61, 0), std::invalid_argument);
  CHECK_THROWS_AS(gate::precision_floor(-0.1, 61, 21), std::invalid_argument);
  CHECK_THROWS_AS(gate::precision_floor(0.1, -1, 21), std::invalid_argument);
}

TEST_CASE("low-tau mirror sweep enumerates the full grid with honest counts") {
  auto corpus = crafted_corpus();
  // Spread tau so the mirror clause has something to bite on.
  corpus[3].divergence[10].termination_fraction = 0.05;
  corpus[4].divergence[10].termination_fraction = 0.00;
  corpus[6].divergence[10].termination_fraction = 0.05;

  const std::vector<int> k_grid{10};
  const std::vector<double> d_grid{0.12};
  const std::vector<double> t_grid{0.0, 0.05};
  const auto points = gate::low_tau_sweep(corpus, k_grid, d_grid, t_grid);
  REQUIRE(points.size() == 2);

  // t_L = 0: the three d-cuts plus every never-terminating group.
  CHECK(points[0].cut == 7);
  CHECK(points[0].tp == 5);
  CHECK(points[0].fp == 2);
  // t_L = 0.05 additionally pulls in the tau == 0.05 ties.
  CHECK(points[1].cut == 9);
  CHECK(points[1].tp == 5);
  CHECK(points[1].fp == 4);
  CHECK(*points[1].precision == doctest::Approx(5.0 / 9.0).epsilon(1e-12));
}

TEST_CASE("floor clearance scans precision across grid points") {
  std::vector<gate::MirrorSweepPoint> points(3);
  points[0].cut = 10;
  points[0].precision = 0.70;
  points[1].cut = 0;  // no cuts, no precision
  points[2].cut = 4;
  points[2].precision = 0.79;
  CHECK(!gate::any_point_clears_floor(points, 0.80));
  points[2].precision = 0.80;
  CHECK(gate::any_point_clears_floor(points, 0.80));
}

TEST_CASE("policy arms score side by side on one corpus") {
  const auto corpus = crafted_corpus();
  gate::ArmTableConfig cfg;
  cfg.k = 10;
  cfg.d_l = 0.12;
  cfg.tau_h = 0.90;
  cfg.seed = 42;
  const auto rows = gate::arms_table(corpus, cfg);
  REQUIRE(rows.size() == 8);

  auto row = [&](const std::string& name) {
    for (const auto& r : rows)
      if (r.arm == name) return r;
    FAIL("missing arm ", name);
    return rows.front();
  };

  const auto none = row("no_gate");
  CHECK(none.cut == 0);
  CHECK(!none.precision.has_value());
  CHECK(none.rollout_saved_actual_pct == 0.0);
  CHECK(none.l2_preserved_pct == 100.0);

  const auto oracle = row("oracle");
  CHECK(oracle.cut == 5);
  CHECK(oracle.tp == 5);
  CHECK(*oracle.precision == 1.0);
  // All trajectories run 30 steps here, so both savings views agree.
  CHECK(oracle.rollout_saved_actual_pct ==
        doctest::Approx(100.0 * 5.0 * 4.0 * 20.0 / 1200.0).epsilon(1e-12));
  CHECK(oracle.rollout_saved_tmax_pct == doctest::Approx(oracle.rollout_saved_actual_pct).epsilon(1e-12));
  // Degenerate groups carry zero advantage, so cutting them keeps all mass.
  CHECK(oracle.l2_preserved_pct == doctest::Approx(100.0).epsilon(1e-12));

  const auto posthoc = row("posthoc_filter_oracle");
  CHECK(posthoc.cut == 0);
  CHECK(posthoc.rollout_saved_actual_pct == 0.0);
  CHECK(posthoc.l2_preserved_pct == doctest::Approx(100.0).epsilon(1e-12));

  const auto ours = row("single_axis_d");
  CHECK(ours.cut == 3);
  CHECK(ours.tp == 3);
  CHECK(*ours.precision == 1.0);
  CHECK(ours.rollout_saved_actual_pct == doctest::Approx(100.0 * 240.0 / 1200.0).epsilon(1e-12));

  const auto random = row("random_cut_matched");
  CHECK(random.cut == ours.cut);
  CHECK(random.tp + random.fp == random.cut);
  CHECK(random.tp <= 5);

  const auto tau = row("tau_only");
  CHECK(tau.cut == 1);
  CHECK(tau.fp == 1);
  CHECK(*tau.precision == 0.0);
  // Cutting a live group throws away real advantage mass.
  CHECK(tau.l2_preserved_pct < 100.0);

  const auto orr = row("or_rule");
  CHECK(orr.cut == 4);
  CHECK(orr.tp == 3);
  CHECK(orr.fp == 1);

  const auto combo = row("single_axis_d_plus_filter");
  CHECK(combo.cut == ours.cut);
  CHECK(combo.rollout_saved_actual_pct == ours.rollout_saved_actual_pct);
}
