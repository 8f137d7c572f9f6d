#include "rollgate/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>
#include <utility>

namespace rollgate::divergence {

namespace {

// Sentinel step symbol for a trajectory that emitted no steps at all.
constexpr std::uint32_t kEmptySymbol = 0xffffffffu;

void check_k(const core::GroupRecord& group, int k) {
  if (k < 1 || k > group.t_max)
    throw std::invalid_argument("divergence: k must be in [1, T_max]");
  if (group.g < 2)
    throw std::invalid_argument("divergence: group must have at least two trajectories");
}

// Symbol at the point-in-time step: the k-th action if the trajectory got
// that far, otherwise its last emitted symbol.
std::uint32_t step_symbol(const std::vector<std::uint32_t>& symbols, int k) {
  if (symbols.empty()) return kEmptySymbol;
  const int idx = std::min<int>(k, static_cast<int>(symbols.size())) - 1;
  return symbols[static_cast<std::size_t>(idx)];
}

double unique_ratio(const std::vector<std::uint32_t>& symbols) {
  std::set<std::uint32_t> distinct(symbols.begin(), symbols.end());
  return static_cast<double>(distinct.size()) / static_cast<double>(symbols.size());
}

// Shannon entropy of the empirical step-symbol distribution, normalized by
// log G so the value is comparable across group sizes.
double normalized_entropy(const std::vector<std::uint32_t>& symbols) {
  const double g = static_cast<double>(symbols.size());
  std::map<std::uint32_t, int> counts;
  for (auto s : symbols) ++counts[s];
  double h = 0.0;
  for (const auto& [sym, c] : counts) {
    const double p = static_cast<double>(c) / g;
    h -= p * std::log(p);
  }
  // An all-distinct group can land an ulp above log g; the ratio is a
  // fraction by definition, so pin it inside [0, 1].
  return std::min(1.0, h / std::log(g));
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> bigrams(
    std::span<const core::ActionToken> prefix) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
  for (std::size_t i = 0; i + 1 < prefix.size(); ++i)
    out.emplace_back(prefix[i].symbol, prefix[i + 1].symbol);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// Jaccard distance between two bigram sets. Two empty sets are identical
// (distance 0); one empty against one non-empty is maximally distant.
double bigram_distance(const std::vector<std::pair<std::uint32_t, std::uint32_t>>& a,
                       const std::vector<std::pair<std::uint32_t, std::uint32_t>>& b) {
  if (a.empty() && b.empty()) return 0.0;
  std::size_t inter = 0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) { ++inter; ++i; ++j; }
    else if (a[i] < b[j]) ++i;
    else ++j;
  }
  const std::size_t uni = a.size() + b.size() - inter;
  return 1.0 - static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace

int levenshtein(std::span<const core::ActionToken> a, std::span<const core::ActionToken> b) {
  const std::size_t m = a.size(), n = b.size();
  if (m == 0) return static_cast<int>(n);
  if (n == 0) return static_cast<int>(m);
  std::vector<int> prev(n + 1), cur(n + 1);
  for (std::size_t j = 0; j <= n; ++j) prev[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= m; ++i) {
    cur[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= n; ++j) {
      const int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[n];
}

double prefix_edit_distance_mean(std::span<const std::vector<core::ActionToken>> prefixes) {
  const std::size_t g = prefixes.size();
  if (g < 2)
    throw std::invalid_argument("prefix_edit_distance_mean: need at least two prefixes");
  double total = 0.0;
  for (std::size_t i = 0; i < g; ++i) {
    for (std::size_t j = i + 1; j < g; ++j) {
      const std::size_t longer = std::max(prefixes[i].size(), prefixes[j].size());
      if (longer == 0) continue;  // two empty prefixes are identical
      total += static_cast<double>(levenshtein(prefixes[i], prefixes[j])) /
               static_cast<double>(longer);
    }
  }
  const double pairs = static_cast<double>(g) * static_cast<double>(g - 1) / 2.0;
  return total / pairs;
}

std::vector<std::vector<core::ActionToken>> prefixes_at(const core::GroupRecord& group, int k) {
  std::vector<std::vector<core::ActionToken>> out;
  out.reserve(group.trajectories.size());
  for (const auto& t : group.trajectories) {
    const int len = std::min<int>(k, t.steps_emitted());
    out.emplace_back(t.actions.begin(), t.actions.begin() + len);
  }
  return out;
}

core::DivergenceVector auxiliary_signals(const core::GroupRecord& group, int k) {
  check_k(group, k);
  core::DivergenceVector d;
  d.k = k;

  const auto prefixes = prefixes_at(group, k);

  // Bigram Jaccard distance, mean over pairs.
  std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> sets;
  sets.reserve(prefixes.size());
  for (const auto& p : prefixes) sets.push_back(bigrams(p));
  double big = 0.0;
  for (std::size_t i = 0; i < sets.size(); ++i)
    for (std::size_t j = i + 1; j < sets.size(); ++j) big += bigram_distance(sets[i], sets[j]);
  const double pairs =
      static_cast<double>(sets.size()) * static_cast<double>(sets.size() - 1) / 2.0;
  d.action_bigram_jaccard_mean = big / pairs;

  // Distinct whole prefixes.
  {
    std::set<std::vector<core::ActionToken>> distinct(prefixes.begin(), prefixes.end());
    d.unique_prefix_ratio =
        static_cast<double>(distinct.size()) / static_cast<double>(prefixes.size());
  }

  // Point-in-time symbols at step k.
  std::vector<std::uint32_t> step_actions, step_obs;
  for (const auto& t : group.trajectories) {
    std::vector<std::uint32_t> acts;
    acts.reserve(t.actions.size());
    for (auto a : t.actions) acts.push_back(a.symbol);
    step_actions.push_back(step_symbol(acts, k));
    step_obs.push_back(step_symbol(t.observations, k));
  }
  d.unique_action_ratio = unique_ratio(step_actions);
  d.obs_unique_ratio = unique_ratio(step_obs);
  d.action_entropy = normalized_entropy(step_actions);

  int terminated = 0;
  for (const auto& t : group.trajectories)
    if (t.terminated_at && *t.terminated_at <= k) ++terminated;
  d.termination_fraction =
      static_cast<double>(terminated) / static_cast<double>(group.trajectories.size());
  return d;
}

core::DivergenceVector compute_signals(const core::GroupRecord& group, int k) {
  core::DivergenceVector d = auxiliary_signals(group, k);
  const auto prefixes = prefixes_at(group, k);
  d.prefix_edit_distance_mean = prefix_edit_distance_mean(prefixes);
  return d;
}

void annotate_corpus(std::span<core::GroupRecord> corpus, std::span<const int> k_grid) {
  for (auto& group : corpus)
    for (int k : k_grid) group.divergence[k] = compute_signals(group, k);
}

}  // namespace rollgate::divergence
