#include "rollgate/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

#include "rollgate/rng.hpp"

namespace rollgate::stats {

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double shared = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = shared;
    i = j + 1;
  }
  return ranks;
}

namespace {

// Pearson correlation; nullopt when either side is constant.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) { mx += x[i]; my += y[i]; }
  mx /= n; my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

// Continued-fraction core of the incomplete beta function (Lentz's method).
double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3.0e-14;
  constexpr double kTiny = 1.0e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return h;
  }
  throw std::runtime_error("incomplete beta: continued fraction did not converge");
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (x < 0.0 || x > 1.0)
    throw std::invalid_argument("incomplete beta: x must be in [0,1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log(1.0 - x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double df) {
  if (df <= 0.0) throw std::invalid_argument("student t: df must be positive");
  if (std::isinf(t)) return 0.0;
  const double x = df / (df + t * t);
  return regularized_incomplete_beta(df / 2.0, 0.5, x);
}

double spearman_p_value(double rho, std::size_t n) {
  if (n < 3) throw std::invalid_argument("spearman p: need n >= 3");
  const double r2 = rho * rho;
  if (r2 >= 1.0) return 0.0;
  const double t = rho * std::sqrt((static_cast<double>(n) - 2.0) / (1.0 - r2));
  return student_t_two_sided_p(std::fabs(t), static_cast<double>(n) - 2.0);
}

std::optional<SpearmanResult> spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("spearman: length mismatch");
  if (x.size() < 3) throw std::invalid_argument("spearman: need at least three pairs");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const auto rho = pearson(rx, ry);
  if (!rho) return std::nullopt;
  return SpearmanResult{*rho, spearman_p_value(*rho, x.size())};
}

double auroc(std::span<const double> scores, std::span<const char> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("auroc: length mismatch");
  std::size_t n_pos = 0;
  for (char l : labels) n_pos += (l != 0);
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw std::invalid_argument("auroc: labels contain a single class");
  // Rank-sum form: ranks are integers or exact halves, so the numerator is
  // exact and equals pairwise win-plus-half-tie counting.
  const auto ranks = average_ranks(scores);
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i]) rank_sum += ranks[i];
  const double u = rank_sum - static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

BootstrapResult bootstrap_ci_indexed(std::size_t n, const IndexStatistic& statistic,
                                     int resamples, double level, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("bootstrap: empty sample");
  if (resamples < 1) throw std::invalid_argument("bootstrap: need at least one resample");
  auto rng = rng::derive_stream(seed, {0xb007u});
  std::vector<std::size_t> draw(n), identity(n);
  std::iota(identity.begin(), identity.end(), std::size_t{0});
  std::vector<double> stats_out;
  stats_out.reserve(static_cast<std::size_t>(resamples));
  for (int b = 0; b < resamples; ++b) {
    for (std::size_t i = 0; i < n; ++i) draw[i] = rng::uniform_index(rng, n);
    stats_out.push_back(statistic(draw));
  }
  BootstrapResult out;
  out.point_estimate = statistic(identity);
  std::tie(out.ci_low, out.ci_high) = percentile_interval(std::move(stats_out), level);
  out.resamples = resamples;
  out.level = level;
  out.seed = seed;
  return out;
}

std::pair<double, double> percentile_interval(std::vector<double> resample_values, double level) {
  if (resample_values.empty())
    throw std::invalid_argument("percentile interval: no resample values");
  if (level <= 0.0 || level >= 1.0)
    throw std::invalid_argument("percentile interval: level must be in (0,1)");
  std::sort(resample_values.begin(), resample_values.end());
  const double b = static_cast<double>(resample_values.size());
  const double alpha = 1.0 - level;
  auto nearest_rank = [&](double q) {
    const auto idx = static_cast<std::size_t>(
        std::clamp(std::ceil(q * b) - 1.0, 0.0, b - 1.0));
    return resample_values[idx];
  };
  return {nearest_rank(alpha / 2.0), nearest_rank(1.0 - alpha / 2.0)};
}

BootstrapResult bootstrap_ci(std::span<const double> values, const Statistic& statistic,
                             int resamples, double level, std::uint64_t seed) {
  if (values.empty()) throw std::invalid_argument("bootstrap: empty values");
  if (resamples < 1) throw std::invalid_argument("bootstrap: need at least one resample");
  auto rng = rng::derive_stream(seed, {0xb007u});
  const std::size_t n = values.size();
  std::vector<double> draw(n), stats_out;
  stats_out.reserve(static_cast<std::size_t>(resamples));
  for (int b = 0; b < resamples; ++b) {
    for (std::size_t i = 0; i < n; ++i) draw[i] = values[rng::uniform_index(rng, n)];
    stats_out.push_back(statistic(draw));
  }
  BootstrapResult out;
  out.point_estimate = statistic(values);
  std::tie(out.ci_low, out.ci_high) = percentile_interval(std::move(stats_out), level);
  out.resamples = resamples;
  out.level = level;
  out.seed = seed;
  return out;
}

BootstrapResult bootstrap_ci_exhaustive(std::span<const double> values,
                                        const Statistic& statistic, double level) {
  const std::size_t n = values.size();
  if (n == 0) throw std::invalid_argument("bootstrap: empty values");
  if (n > 8) throw std::invalid_argument("exhaustive bootstrap: n too large");
  std::size_t total = 1;
  for (std::size_t i = 0; i < n; ++i) total *= n;
  std::vector<double> draw(n), stats_out;
  stats_out.reserve(total);
  std::vector<std::size_t> odo(n, 0);
  for (std::size_t r = 0; r < total; ++r) {
    for (std::size_t i = 0; i < n; ++i) draw[i] = values[odo[i]];
    stats_out.push_back(statistic(draw));
    for (std::size_t i = 0; i < n; ++i) {
      if (++odo[i] < n) break;
      odo[i] = 0;
    }
  }
  BootstrapResult out;
  out.point_estimate = statistic(values);
  std::tie(out.ci_low, out.ci_high) = percentile_interval(std::move(stats_out), level);
  out.resamples = static_cast<int>(total);
  out.level = level;
  out.seed = 0;
  return out;
}

// --- corpus-level tables ----------------------------------------------------

const std::vector<std::string>& signal_names() {
  static const std::vector<std::string> names = {
      "prefix_edit_distance_mean", "action_bigram_jaccard_mean", "unique_prefix_ratio",
      "unique_action_ratio",       "action_entropy",             "obs_unique_ratio",
      "termination_fraction"};
  return names;
}

double signal_value(const core::DivergenceVector& d, const std::string& metric) {
  if (metric == "prefix_edit_distance_mean") return d.prefix_edit_distance_mean;
  if (metric == "action_bigram_jaccard_mean") return d.action_bigram_jaccard_mean;
  if (metric == "unique_prefix_ratio") return d.unique_prefix_ratio;
  if (metric == "unique_action_ratio") return d.unique_action_ratio;
  if (metric == "action_entropy") return d.action_entropy;
  if (metric == "obs_unique_ratio") return d.obs_unique_ratio;
  if (metric == "termination_fraction") return d.termination_fraction;
  throw std::invalid_argument("unknown signal: " + metric);
}

namespace {

const core::DivergenceVector& divergence_at(const core::GroupRecord& g, int k) {
  const auto it = g.divergence.find(k);
  if (it == g.divergence.end())
    throw std::runtime_error("corpus is missing divergence signals at k=" + std::to_string(k));
  return it->second;
}

double reward_variance(const core::GroupRecord& g) {
  double mean = 0.0;
  for (double r : g.rewards) mean += r;
  mean /= static_cast<double>(g.rewards.size());
  double var = 0.0;
  for (double r : g.rewards) var += (r - mean) * (r - mean);
  return var / static_cast<double>(g.rewards.size());
}

std::optional<double> auroc_or_nullopt(std::span<const double> scores,
                                       std::span<const char> labels) {
  bool has_pos = false, has_neg = false;
  for (char l : labels) (l ? has_pos : has_neg) = true;
  if (!has_pos || !has_neg) return std::nullopt;
  return auroc(scores, labels);
}

}  // namespace

std::optional<double> median_of(std::vector<double> values) {
  if (values.empty()) return std::nullopt;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return (values[n / 2 - 1] + values[n / 2]) / 2.0;
}

std::vector<CorrelationCell> heatmap(std::span<const core::GroupRecord> corpus,
                                     std::span<const int> k_grid, bool flip_auroc) {
  if (corpus.empty()) throw std::invalid_argument("heatmap: empty corpus");
  std::vector<double> variances;
  std::vector<char> live;  // 1 = non-zero-variance (mixed)
  variances.reserve(corpus.size());
  for (const auto& g : corpus) {
    variances.push_back(reward_variance(g));
    live.push_back(core::zero_variance(g.label) ? 0 : 1);
  }
  std::vector<CorrelationCell> cells;
  for (const auto& metric : signal_names()) {
    for (int k : k_grid) {
      CorrelationCell cell;
      cell.metric = metric;
      cell.k = k;
      cell.n = static_cast<int>(corpus.size());
      std::vector<double> values;
      values.reserve(corpus.size());
      for (const auto& g : corpus) values.push_back(signal_value(divergence_at(g, k), metric));
      if (const auto sp = spearman(values, variances)) {
        cell.spearman_rho = sp->rho;
        cell.p_value = sp->p_value;
      }
      if (auto a = auroc_or_nullopt(values, live))
        cell.auroc = flip_auroc ? 1.0 - *a : *a;
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

PerTypeTable per_type_breakdown(std::span<const core::GroupRecord> corpus, int k,
                                std::span<const int> k_grid, bool flip_auroc) {
  if (corpus.empty()) throw std::invalid_argument("per_type_breakdown: empty corpus");
  std::map<std::string, std::vector<const core::GroupRecord*>> by_type;
  for (const auto& g : corpus) by_type[g.task_type].push_back(&g);

  PerTypeTable table;
  std::vector<double> medians_at_k, medians_best;
  for (const auto& [type, groups] : by_type) {
    TypeRow row;
    row.task_type = type;
    row.n = static_cast<int>(groups.size());
    std::vector<char> live;
    for (const auto* g : groups) {
      const bool zv = core::zero_variance(g->label);
      row.n_zero_variance += zv;
      live.push_back(zv ? 0 : 1);
    }
    row.single_observation = row.n_zero_variance <= 2;
    if (row.n_zero_variance == 0 || row.n_zero_variance == row.n) {
      row.skipped = true;
      row.note = "single class; no separability defined";
      table.rows.push_back(std::move(row));
      continue;
    }
    auto scored = [&](const std::string& metric, int kk) -> std::optional<double> {
      std::vector<double> values;
      values.reserve(groups.size());
      for (const auto* g : groups) values.push_back(signal_value(divergence_at(*g, kk), metric));
      auto a = auroc_or_nullopt(values, live);
      if (a && flip_auroc) return 1.0 - *a;
      return a;
    };
    row.auroc_at_k = scored("prefix_edit_distance_mean", k);
    for (const auto& metric : signal_names()) {
      for (int kk : k_grid) {
        const auto a = scored(metric, kk);
        if (a && (!row.best_auroc || *a > *row.best_auroc)) {
          row.best_auroc = *a;
          row.best_metric = metric;
          row.best_k = kk;
        }
      }
    }
    if (row.single_observation)
      row.note = "n_zv <= 2: single-observation regime, not meaningful alone";
    if (row.auroc_at_k) medians_at_k.push_back(*row.auroc_at_k);
    if (row.best_auroc) medians_best.push_back(*row.best_auroc);
    table.rows.push_back(std::move(row));
  }
  table.median_auroc_at_k = median_of(std::move(medians_at_k));
  table.median_best_auroc = median_of(std::move(medians_best));
  return table;
}

}  // namespace rollgate::stats
