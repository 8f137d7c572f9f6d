#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

// Group-relative advantage normalization and the REINFORCE-style batch loss,
// plus the two scalar diagnostics built on them: gradient dilution and
// advantage-mass preservation.
namespace rollgate::grpo {

struct AdvantageVector {
  std::vector<double> values;
  double group_mean = 0.0;
  double group_std = 0.0;  // population standard deviation
  double epsilon = 0.0;
};

// A_i = (r_i - mean) / (std + epsilon), with the zero-variance group
// special-cased to all-zero advantages rather than 0/epsilon noise.
// Requires at least two rewards.
AdvantageVector advantages(std::span<const double> rewards, double epsilon);

struct BatchLoss {
  double loss = 0.0;
  double effective_scale = 0.0;  // n_nonzero / n
  int n_nonzero = 0;
  int n = 0;
};

// loss = -(1/N) sum_i A_i * logprob_i over (advantage, logprob) items.
// Zero-advantage items occupy denominator slots without contributing signal;
// effective_scale is the shrink factor that dilution applies to the
// non-zero subset mean.
BatchLoss batch_loss(std::span<const std::pair<double, double>> items);

// Predicted gradient-norm ratio between a gated batch with zero-advantage
// fraction z_gated and a baseline batch with z_base: (1-z_gated)/(1-z_base).
// Both fractions must lie in [0,1); an all-zero batch has no defined ratio.
double dilution_ratio(double z_base, double z_gated);

// ||A_kept||_2 / ||A_full||_2 for a keep mask over a flat advantage vector.
// Undefined when the full vector has zero norm.
std::optional<double> l2_preservation(std::span<const double> advantage_values,
                                      std::span<const char> kept);

}  // namespace rollgate::grpo
