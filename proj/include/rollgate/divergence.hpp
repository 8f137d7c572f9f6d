#pragma once

#include <span>
#include <vector>

#include "rollgate/core_types.hpp"

// Mid-rollout divergence signals. All of them look only at the first k steps
// of each trajectory; a trajectory that terminated before k contributes its
// truncated prefix, and point-in-time signals use its final symbol.
namespace rollgate::divergence {

// Edit distance between two action sequences (insert/delete/substitute,
// unit cost). Distance is over whole action symbols, never their encodings.
int levenshtein(std::span<const core::ActionToken> a, std::span<const core::ActionToken> b);

// Mean pairwise normalized edit distance over all C(G,2) prefix pairs.
// Each pair is normalized by the longer prefix length; two empty prefixes
// are identical and contribute zero. Requires at least two prefixes.
double prefix_edit_distance_mean(std::span<const std::vector<core::ActionToken>> prefixes);

// The action prefixes the signals are computed over: first min(k, steps)
// actions of each trajectory.
std::vector<std::vector<core::ActionToken>> prefixes_at(const core::GroupRecord& group, int k);

// The six signals other than the edit-distance mean. k must be in [1, T_max].
core::DivergenceVector auxiliary_signals(const core::GroupRecord& group, int k);

// All seven signals at step k.
core::DivergenceVector compute_signals(const core::GroupRecord& group, int k);

// Computes and stores signals at every k in the grid, on every group.
void annotate_corpus(std::span<core::GroupRecord> corpus, std::span<const int> k_grid);

}  // namespace rollgate::divergence
