#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "attnshap/game.hpp"

namespace attnshap {

enum class SampleMode { Exact, MonteCarlo, Kernel };

std::string to_string(SampleMode mode);
SampleMode sample_mode_from_string(const std::string& name);

struct SamplingScheme {
  SampleMode mode = SampleMode::Exact;
  int n_samples = 100;
  std::uint64_t seed = 0;
  // Keeping duplicates reflects the true sampling distribution; dedup mode
  // replaces repeats with fresh draws and reduces to full enumeration once
  // every coalition has been seen.
  bool dedup = false;
};

struct AttributionResult {
  std::string method;
  int class_k = 0;
  std::uint64_t seed = 0;
  int n_samples = 0;
  std::vector<int> player_indices;
  std::vector<double> scores;
  double wall_time_ms = 0.0;
  // Model output on the fully masked input when the game measures deviation
  // from that baseline (SHAP); zero otherwise.
  double base_value = 0.0;
};

inline constexpr int kDefaultExactLimit = 20;

/// Full enumeration of all coalitions with the positional weights
/// |S|!(N-1-|S|)!/N!. Refuses player sets above exact_limit.
AttributionResult exact_shapley(const CharacteristicSpec& spec,
                                int exact_limit = kDefaultExactLimit);

/// The CLS-sum game gives every player a constant marginal contribution, so
/// its Shapley values are the CLS-row entries themselves.
AttributionResult closed_form_cls(const Matrix& payload,
                                  const std::vector<int>& players, int cls_index);

/// O(N^2) reduction of the mutual-interaction game: the coalition sum splits
/// into the empty, singleton, and larger-coalition cases, each with a closed
/// positional weight.
AttributionResult closed_form_mutual(const Matrix& payload,
                                     const std::vector<int>& players);

/// Coalition-size weight (N-1) / (C(N,s) * s * (N-s)); +infinity at s = 0 and
/// s = N, which marks the empty and grand coalitions as always included.
double kernel_weight(int n_players, int coalition_size);

/// The coalition list a sampled run evaluates. MonteCarlo draws uniformly
/// over all coalitions; Kernel draws sizes proportional to the finite kernel
/// weights (members uniform within a size) and always appends the empty and
/// grand coalitions. Deterministic per (seed, sample index).
std::vector<Coalition> sample_coalitions(const SamplingScheme& scheme,
                                         const std::vector<int>& players);

/// Sampled Shapley estimate over sample_coalitions(). Each player's
/// positional weights are renormalized over its usable samples, stratified by
/// coalition size (every size carries equal total mass under the factorial
/// weights), so exhaustive sampling reproduces exact values.
AttributionResult sampled_shapley(const CharacteristicSpec& spec,
                                  const SamplingScheme& scheme);

/// Column means of the contribution matrix (mean attention-weighted positive
/// gradient received by each token over all query rows).
AttributionResult grad_sam_scores(const Matrix& contribution,
                                  const std::vector<int>& players);

}  // namespace attnshap
