#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "rollgate/core_types.hpp"
#include "rollgate/divergence.hpp"

using namespace rollgate;
using core::ActionToken;

// Independent full-matrix edit distance, kept deliberately naive so the
// production implementation is checked against a different shape of code.
namespace reference {

int edit_distance(const std::vector<ActionToken>& a, const std::vector<ActionToken>& b) {
  const std::size_t m = a.size(), n = b.size();
  std::vector<std::vector<int>> dp(m + 1, std::vector<int>(n + 1, 0));
  for (std::size_t i = 0; i <= m; ++i) dp[i][0] = static_cast<int>(i);
  for (std::size_t j = 0; j <= n; ++j) dp[0][j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= m; ++i)
    for (std::size_t j = 1; j <= n; ++j)
      dp[i][j] = std::min({dp[i - 1][j] + 1, dp[i][j - 1] + 1,
                           dp[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
  return dp[m][n];
}

}  // namespace reference

namespace {

std::vector<ActionToken> tokens(const std::string& s) {
  std::vector<ActionToken> out;
  for (char c : s) out.push_back({static_cast<std::uint32_t>(c)});
  return out;
}

std::vector<ActionToken> random_sequence(std::mt19937_64& g, int max_len, int vocab) {
  std::uniform_int_distribution<int> len_dist(0, max_len);
  std::uniform_int_distribution<std::uint32_t> sym_dist(0, static_cast<std::uint32_t>(vocab - 1));
  std::vector<ActionToken> out(static_cast<std::size_t>(len_dist(g)));
  for (auto& a : out) a = {sym_dist(g)};
  return out;
}

core::TrajectoryRecord traj(const std::vector<std::uint32_t>& actions,
                            const std::vector<std::uint32_t>& observations,
                            std::optional<int> terminated_at = std::nullopt) {
  core::TrajectoryRecord t;
  for (auto a : actions) t.actions.push_back({a});
  t.observations = observations;
  t.terminated_at = terminated_at;
  return t;
}

core::GroupRecord group_of(std::vector<core::TrajectoryRecord> trajectories, int t_max = 30) {
  core::GroupRecord g;
  g.g = static_cast<int>(trajectories.size());
  g.t_max = t_max;
  g.trajectories = std::move(trajectories);
  g.rewards.assign(static_cast<std::size_t>(g.g), 0.0);
  g.label = core::GroupLabel::all_fail;
  return g;
}

}  // namespace

TEST_CASE("edit distance matches the full-matrix oracle on random pairs") {
  std::mt19937_64 g(20260816);
  for (int trial = 0; trial < 10000; ++trial) {
    const auto a = random_sequence(g, 12, 5);
    const auto b = random_sequence(g, 12, 5);
    REQUIRE(divergence::levenshtein(a, b) == reference::edit_distance(a, b));
  }
}

TEST_CASE("edit distance ground cases") {
  CHECK(divergence::levenshtein(tokens("kitten"), tokens("sitting")) == 3);
  CHECK(divergence::levenshtein(tokens(""), tokens("abcde")) == 5);
  CHECK(divergence::levenshtein(tokens("abcde"), tokens("")) == 5);
  CHECK(divergence::levenshtein(tokens(""), tokens("")) == 0);
  for (const char* s : {"a", "abc", "zzzzzzzzzz"})
    CHECK(divergence::levenshtein(tokens(s), tokens(s)) == 0);
}

TEST_CASE("edit distance is symmetric and satisfies the triangle inequality") {
  std::mt19937_64 g(99);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto a = random_sequence(g, 10, 4);
    const auto b = random_sequence(g, 10, 4);
    const auto c = random_sequence(g, 10, 4);
    const int ab = divergence::levenshtein(a, b);
    const int bc = divergence::levenshtein(b, c);
    const int ac = divergence::levenshtein(a, c);
    REQUIRE(ab == divergence::levenshtein(b, a));
    REQUIRE(ac <= ab + bc);
    REQUIRE(ab >= 0);
  }
}

TEST_CASE("prefix edit distance mean ground cases") {
  using Prefixes = std::vector<std::vector<ActionToken>>;

  Prefixes identical{tokens("abcab"), tokens("abcab"), tokens("abcab")};
  CHECK(divergence::prefix_edit_distance_mean(identical) == 0.0);

  Prefixes disjoint{tokens("a"), tokens("b")};
  CHECK(divergence::prefix_edit_distance_mean(disjoint) == 1.0);

  // Three 2-token prefixes, one differing in its last token: the only
  // nonzero pair distances are 1/2 against each twin, over three pairs.
  Prefixes one_off{tokens("xy"), tokens("xy"), tokens("xz")};
  CHECK(divergence::prefix_edit_distance_mean(one_off) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  Prefixes both_empty{{}, {}};
  CHECK(divergence::prefix_edit_distance_mean(both_empty) == 0.0);

  Prefixes one_empty{{}, tokens("q")};
  CHECK(divergence::prefix_edit_distance_mean(one_empty) == 1.0);

  CHECK_THROWS_AS(divergence::prefix_edit_distance_mean(Prefixes{tokens("a")}),
                  std::invalid_argument);
}

TEST_CASE("prefix edit distance mean is permutation invariant") {
  std::mt19937_64 g(7);
  std::vector<std::vector<ActionToken>> prefixes;
  for (int i = 0; i < 6; ++i) prefixes.push_back(random_sequence(g, 8, 3));
  const double base = divergence::prefix_edit_distance_mean(prefixes);
  for (int trial = 0; trial < 20; ++trial) {
    std::shuffle(prefixes.begin(), prefixes.end(), g);
    REQUIRE(divergence::prefix_edit_distance_mean(prefixes) == doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("prefixes stop at k or at early termination, whichever is first") {
  auto g = group_of({traj({1, 2, 3, 4, 5, 6}, {0, 0, 0, 0, 0, 0}),
                     traj({1, 2}, {0, 0}, 2)});
  auto p10 = divergence::prefixes_at(g, 10);
  REQUIRE(p10.size() == 2);
  CHECK(p10[0].size() == 6);
  CHECK(p10[1].size() == 2);
  auto p3 = divergence::prefixes_at(g, 3);
  CHECK(p3[0].size() == 3);
  CHECK(p3[1].size() == 2);
  CHECK(p3[0] == std::vector<ActionToken>{{1}, {2}, {3}});
}

TEST_CASE("auxiliary signals at a hand-computed group") {
  // Two twins, one early-terminated near-twin, one stranger; k = 3.
  auto g = group_of({traj({1, 2, 3, 4, 5, 6}, {10, 11, 12, 13, 14, 15}),
                     traj({1, 2, 3, 4}, {10, 11, 12, 13}),
                     traj({1, 2}, {10, 11}, 2),
                     traj({7, 8, 9}, {20, 21, 22}, 3)});
  const auto d = divergence::compute_signals(g, 3);
  CHECK(d.k == 3);
  CHECK(d.unique_prefix_ratio == doctest::Approx(3.0 / 4.0).epsilon(1e-12));
  CHECK(d.unique_action_ratio == doctest::Approx(3.0 / 4.0).epsilon(1e-12));
  CHECK(d.obs_unique_ratio == doctest::Approx(3.0 / 4.0).epsilon(1e-12));
  // Step actions {3, 3, 2, 9}: p = {1/2, 1/4, 1/4} over log 4.
  const double h = -(0.5 * std::log(0.5) + 0.5 * std::log(0.25)) / std::log(4.0);
  CHECK(d.action_entropy == doctest::Approx(h).epsilon(1e-12));
  CHECK(d.termination_fraction == doctest::Approx(0.5).epsilon(1e-12));
  // Pairwise bigram Jaccard distances: 0, 1/2, 1, 1/2, 1, 1 over six pairs.
  CHECK(d.action_bigram_jaccard_mean == doctest::Approx(4.0 / 6.0).epsilon(1e-12));
  // Pairwise normalized edit distances: 0, 1/3, 1, 1/3, 1, 1 over six pairs.
  CHECK(d.prefix_edit_distance_mean == doctest::Approx((2.0 / 3.0 + 3.0) / 6.0).epsilon(1e-12));
}

TEST_CASE("consensus groups sit at the zero end of every signal") {
  auto g = group_of({traj({4, 4, 4, 4}, {1, 1, 1, 1}), traj({4, 4, 4, 4}, {1, 1, 1, 1}),
                     traj({4, 4, 4, 4}, {1, 1, 1, 1})});
  const auto d = divergence::compute_signals(g, 4);
  CHECK(d.prefix_edit_distance_mean == 0.0);
  CHECK(d.action_bigram_jaccard_mean == 0.0);
  CHECK(d.unique_prefix_ratio == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(d.unique_action_ratio == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(d.action_entropy == 0.0);
  CHECK(d.obs_unique_ratio == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(d.termination_fraction == 0.0);
}

TEST_CASE("identical prefixes stay identical when extended identically") {
  std::vector<core::TrajectoryRecord> ts;
  for (int i = 0; i < 4; ++i) ts.push_back(traj({9, 9, 9}, {0, 0, 0}));
  auto g = group_of(ts);
  CHECK(divergence::compute_signals(g, 2).prefix_edit_distance_mean == 0.0);
  for (auto& t : g.trajectories) {
    t.actions.push_back({9});
    t.observations.push_back(0);
  }
  CHECK(divergence::compute_signals(g, 4).prefix_edit_distance_mean == 0.0);
}

TEST_CASE("entropy and termination hit their boundary values") {
  auto same = group_of({traj({1, 5}, {0, 0}), traj({2, 5}, {0, 0}), traj({3, 5}, {0, 0}),
                        traj({4, 5}, {0, 0})});
  CHECK(divergence::auxiliary_signals(same, 2).action_entropy == 0.0);

  auto distinct = group_of({traj({1, 1}, {0, 0}), traj({2, 2}, {0, 0}), traj({3, 3}, {0, 0}),
                            traj({4, 4}, {0, 0})});
  CHECK(divergence::auxiliary_signals(distinct, 2).action_entropy ==
        doctest::Approx(1.0).epsilon(1e-12));

  auto all_done = group_of({traj({1}, {0}, 1), traj({2}, {0}, 1)});
  CHECK(divergence::auxiliary_signals(all_done, 1).termination_fraction == 1.0);
  auto none_done = group_of({traj({1, 1}, {0, 0}), traj({2, 2}, {0, 0})});
  CHECK(divergence::auxiliary_signals(none_done, 2).termination_fraction == 0.0);
}

TEST_CASE("every signal stays inside the unit interval on random groups") {
  std::mt19937_64 rnd(31337);
  std::uniform_int_distribution<int> g_dist(2, 6);
  std::uniform_int_distribution<int> len_dist(1, 8);
  std::uniform_int_distribution<std::uint32_t> sym_dist(0, 5);
  std::uniform_int_distribution<int> k_dist(1, 8);
  std::bernoulli_distribution term_dist(0.3);
  for (int trial = 0; trial < 10000; ++trial) {
    std::vector<core::TrajectoryRecord> ts;
    const int members = g_dist(rnd);
    for (int i = 0; i < members; ++i) {
      const int len = len_dist(rnd);
      core::TrajectoryRecord t;
      for (int s = 0; s < len; ++s) {
        t.actions.push_back({sym_dist(rnd)});
        t.observations.push_back(sym_dist(rnd));
      }
      if (len < 8 && term_dist(rnd)) t.terminated_at = len;
      ts.push_back(std::move(t));
    }
    auto grp = group_of(std::move(ts), 8);
    const auto d = divergence::compute_signals(grp, k_dist(rnd));
    for (double v : {d.prefix_edit_distance_mean, d.action_bigram_jaccard_mean,
                     d.unique_prefix_ratio, d.unique_action_ratio, d.action_entropy,
                     d.obs_unique_ratio, d.termination_fraction}) {
      REQUIRE(v >= 0.0);
      REQUIRE(v <= 1.0);
    }
  }
}

TEST_CASE("signal evaluation rejects out-of-range steps and tiny groups") {
  auto g = group_of({traj({1, 2}, {0, 0}), traj({3, 4}, {0, 0})});
  CHECK_THROWS_AS(divergence::compute_signals(g, 0), std::invalid_argument);
  CHECK_THROWS_AS(divergence::compute_signals(g, 31), std::invalid_argument);
  auto solo = group_of({traj({1, 2}, {0, 0})});
  solo.g = 1;
  CHECK_THROWS_AS(divergence::compute_signals(solo, 1), std::invalid_argument);
}

TEST_CASE("corpus annotation stores the full grid on every group") {
  std::vector<core::GroupRecord> corpus;
  corpus.push_back(group_of({traj({1, 2, 3, 4, 5}, {0, 1, 2, 3, 4}),
                             traj({1, 2, 9, 9, 9}, {0, 1, 5, 5, 5})}));
  corpus.push_back(group_of({traj({7, 7}, {0, 0}, 2), traj({7, 8, 9}, {0, 0, 0})}));
  const std::vector<int> grid{2, 5};
  divergence::annotate_corpus(corpus, grid);
  for (const auto& grp : corpus) {
    REQUIRE(grp.divergence.size() == 2);
    for (int k : grid) {
      const auto expect = divergence::compute_signals(grp, k);
      const auto& got = grp.divergence.at(k);
      CHECK(got.prefix_edit_distance_mean == expect.prefix_edit_distance_mean);
      CHECK(got.action_entropy == expect.action_entropy);
      CHECK(got.termination_fraction == expect.termination_fraction);
    }
  }
}
