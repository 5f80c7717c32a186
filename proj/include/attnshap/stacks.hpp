#pragma once

#include <cstddef>
#include <vector>

#include "attnshap/matrix.hpp"

namespace attnshap {

/// All per-layer, per-head attention matrices from one forward pass.
/// Construction enforces row-stochasticity: rows whose sum is within 1e-9 of
/// one pass unchanged, deviations up to 1e-6 are renormalized, anything
/// further off is rejected. Entries must lie in [0, 1].
class AttentionStack {
 public:
  static constexpr double kRowSumTolerance = 1e-9;
  static constexpr double kRenormalizeLimit = 1e-6;

  AttentionStack(std::size_t layers, std::size_t heads, std::size_t seq_len,
                 std::vector<Matrix> mats);

  std::size_t layers() const { return layers_; }
  std::size_t heads() const { return heads_; }
  std::size_t seq_len() const { return seq_len_; }

  const Matrix& at(std::size_t layer, std::size_t head) const {
    return mats_[layer * heads_ + head];
  }
  const std::vector<Matrix>& mats() const { return mats_; }

 private:
  std::size_t layers_ = 0, heads_ = 0, seq_len_ = 0;
  std::vector<Matrix> mats_;  // layer-major: index = layer * heads + head
};

/// d(logit_k)/dA for every layer and head. Shape-congruent with the
/// attention stack it was derived from; entries are unconstrained reals.
class GradientStack {
 public:
  GradientStack(std::size_t layers, std::size_t heads, std::size_t seq_len,
                std::vector<Matrix> mats);

  std::size_t layers() const { return layers_; }
  std::size_t heads() const { return heads_; }
  std::size_t seq_len() const { return seq_len_; }

  const Matrix& at(std::size_t layer, std::size_t head) const {
    return mats_[layer * heads_ + head];
  }
  const std::vector<Matrix>& mats() const { return mats_; }

 private:
  std::size_t layers_ = 0, heads_ = 0, seq_len_ = 0;
  std::vector<Matrix> mats_;
};

/// M_k: attention weights gated by the positive part of their logit
/// gradients, averaged over all layers and heads. Entries are non-negative.
struct ContributionMatrix {
  int class_id = 0;
  Matrix mat;
};

ContributionMatrix contribution_matrix(const AttentionStack& attn,
                                       const GradientStack& grads, int class_id);

/// Element-wise mean over all layer/head matrices. Preserves
/// row-stochasticity (convex combination of stochastic matrices).
Matrix average_attention(const AttentionStack& attn);

/// Mean outgoing attention weight of token i over all layers, heads and
/// target positions. Row-stochasticity makes this exactly 1/N for every
/// token; it is kept as the plain-attention baseline and downstream ranking
/// falls back to index order on the resulting ties.
double raw_attention_importance(const AttentionStack& attn, std::size_t token);

}  // namespace attnshap
