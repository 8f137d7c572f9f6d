#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rollgate/core_types.hpp"

namespace rollgate::stats {

// Average (midrank) ranks, 1-based; tied values share the mean of the ranks
// they would occupy.
std::vector<double> average_ranks(std::span<const double> values);

struct SpearmanResult {
  double rho = 0.0;
  double p_value = 1.0;  // two-sided, via the t approximation
};

// Rank correlation: Pearson correlation of average-ranked data. Inputs must
// have equal length >= 3. Returns nullopt when either input is constant
// (rho is undefined there).
std::optional<SpearmanResult> spearman(std::span<const double> x, std::span<const double> y);

// Two-sided p for a rank correlation of rho at sample size n, using
// t = rho * sqrt((n-2)/(1-rho^2)) against the t distribution with n-2
// degrees of freedom.
double spearman_p_value(double rho, std::size_t n);

// Survival-function machinery behind the p-value, exposed for verification.
double regularized_incomplete_beta(double a, double b, double x);
double student_t_two_sided_p(double t, double df);

// Rank-sum AUROC with ties counted as half. labels are binary with 1 the
// positive class; a single-class input has no defined AUROC and is rejected
// with std::invalid_argument.
double auroc(std::span<const double> scores, std::span<const char> labels);

struct BootstrapResult {
  double point_estimate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  int resamples = 0;
  double level = 0.0;
  std::uint64_t seed = 0;
};

using Statistic = std::function<double(std::span<const double>)>;

// Percentile bootstrap: B seeded resamples with replacement; interval
// endpoints are nearest-rank order statistics of the resample values.
BootstrapResult bootstrap_ci(std::span<const double> values, const Statistic& statistic,
                             int resamples, double level, std::uint64_t seed);

// Same percentile machinery over every one of the n^n possible resamples,
// for verifying the endpoint selection exactly at tiny n.
BootstrapResult bootstrap_ci_exhaustive(std::span<const double> values,
                                        const Statistic& statistic, double level);

using IndexStatistic = std::function<double(std::span<const std::size_t>)>;

// Index-resampling variant for paired or multi-column data: the statistic
// sees a resampled list of row indices in [0, n). The point estimate uses
// the identity index list.
BootstrapResult bootstrap_ci_indexed(std::size_t n, const IndexStatistic& statistic,
                                     int resamples, double level, std::uint64_t seed);

// Nearest-rank percentile endpoints over a set of resample statistics.
std::pair<double, double> percentile_interval(std::vector<double> resample_values, double level);

// Median of a sample; nullopt when empty. Even sizes average the middle two.
std::optional<double> median_of(std::vector<double> values);

// --- signal quality over a corpus ------------------------------------------

struct CorrelationCell {
  std::string metric;
  int k = 0;
  std::optional<double> spearman_rho;  // vs group reward variance
  std::optional<double> p_value;
  std::optional<double> auroc;  // vs the binary non-zero-variance label
  int n = 0;
};

const std::vector<std::string>& signal_names();
double signal_value(const core::DivergenceVector& d, const std::string& metric);

// One cell per (signal, k). Spearman target is the group reward variance;
// AUROC scores the non-zero-variance class with the signal value (higher
// divergence predicts a live group). flip_auroc reverses the class
// convention, reporting 1 - AUROC.
std::vector<CorrelationCell> heatmap(std::span<const core::GroupRecord> corpus,
                                     std::span<const int> k_grid, bool flip_auroc = false);

struct TypeRow {
  std::string task_type;
  int n = 0;
  int n_zero_variance = 0;
  std::optional<double> auroc_at_k;  // prefix edit distance at the gate k
  std::string best_metric;
  int best_k = 0;
  std::optional<double> best_auroc;
  bool single_observation = false;  // n_zero_variance <= 2: one effective observation
  bool skipped = false;             // only one class present, no AUROC defined
  std::string note;
};

struct PerTypeTable {
  std::vector<TypeRow> rows;
  std::optional<double> median_auroc_at_k;
  std::optional<double> median_best_auroc;
};

// Stratifies the corpus by task type: per-type AUROC of the edit-distance
// signal at the gate k, plus the best (signal, k) pair over the grid.
PerTypeTable per_type_breakdown(std::span<const core::GroupRecord> corpus, int k,
                                std::span<const int> k_grid, bool flip_auroc = false);

}  // namespace rollgate::stats
