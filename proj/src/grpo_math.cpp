#include "rollgate/grpo_math.hpp"

#include <cmath>
#include <stdexcept>

namespace rollgate::grpo {

AdvantageVector advantages(std::span<const double> rewards, double epsilon) {
  const std::size_t n = rewards.size();
  if (n < 2) throw std::invalid_argument("advantages: need at least two rewards");
  if (epsilon < 0.0) throw std::invalid_argument("advantages: epsilon must be >= 0");

  AdvantageVector out;
  out.epsilon = epsilon;
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= static_cast<double>(n);
  out.group_mean = mean;
  out.group_std = std::sqrt(var);

  out.values.resize(n, 0.0);
  if (out.group_std == 0.0) return out;  // degenerate group carries no signal
  for (std::size_t i = 0; i < n; ++i)
    out.values[i] = (rewards[i] - mean) / (out.group_std + epsilon);
  return out;
}

BatchLoss batch_loss(std::span<const std::pair<double, double>> items) {
  if (items.empty()) throw std::invalid_argument("batch_loss: empty batch");
  BatchLoss out;
  out.n = static_cast<int>(items.size());
  double total = 0.0;
  for (const auto& [advantage, logprob] : items) {
    total += advantage * logprob;
    if (advantage != 0.0) ++out.n_nonzero;
  }
  out.loss = -total / static_cast<double>(out.n);
  out.effective_scale = static_cast<double>(out.n_nonzero) / static_cast<double>(out.n);
  return out;
}

double dilution_ratio(double z_base, double z_gated) {
  if (z_base < 0.0 || z_base >= 1.0)
    throw std::invalid_argument("dilution_ratio: z_base must be in [0,1)");
  if (z_gated < 0.0 || z_gated >= 1.0)
    throw std::invalid_argument("dilution_ratio: z_gated must be in [0,1)");
  return (1.0 - z_gated) / (1.0 - z_base);
}

std::optional<double> l2_preservation(std::span<const double> advantage_values,
                                      std::span<const char> kept) {
  if (advantage_values.size() != kept.size())
    throw std::invalid_argument("l2_preservation: mask length mismatch");
  double full = 0.0, part = 0.0;
  for (std::size_t i = 0; i < advantage_values.size(); ++i) {
    const double sq = advantage_values[i] * advantage_values[i];
    full += sq;
    if (kept[i]) part += sq;
  }
  if (full == 0.0) return std::nullopt;
  return std::sqrt(part) / std::sqrt(full);
}

}  // namespace rollgate::grpo
