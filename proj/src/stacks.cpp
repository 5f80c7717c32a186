#include "attnshap/stacks.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace attnshap {

namespace {

void check_stack_shape(std::size_t layers, std::size_t heads, std::size_t seq_len,
                       const std::vector<Matrix>& mats, const char* what) {
  if (layers == 0 || heads == 0 || seq_len == 0) {
    throw std::invalid_argument(std::string(what) + ": empty dimensions");
  }
  if (mats.size() != layers * heads) {
    throw std::invalid_argument(std::string(what) + ": expected " +
                                std::to_string(layers * heads) + " matrices, got " +
                                std::to_string(mats.size()));
  }
  for (const Matrix& m : mats) {
    if (m.rows() != seq_len || m.cols() != seq_len) {
      throw std::invalid_argument(std::string(what) + ": matrix shape mismatch");
    }
    m.check_finite(what);
  }
}

}  // namespace

AttentionStack::AttentionStack(std::size_t layers, std::size_t heads,
                               std::size_t seq_len, std::vector<Matrix> mats)
    : layers_(layers), heads_(heads), seq_len_(seq_len), mats_(std::move(mats)) {
  check_stack_shape(layers_, heads_, seq_len_, mats_, "AttentionStack");
  for (Matrix& m : mats_) {
    for (double v : m.data()) {
      if (v < -kRowSumTolerance || v > 1.0 + kRowSumTolerance) {
        throw std::invalid_argument("AttentionStack: entry outside [0, 1]");
      }
    }
    for (std::size_t i = 0; i < seq_len_; ++i) {
      double sum = 0.0;
      for (std::size_t j = 0; j < seq_len_; ++j) sum += m(i, j);
      double dev = std::fabs(sum - 1.0);
      if (dev <= kRowSumTolerance) continue;
      if (dev <= kRenormalizeLimit) {
        for (std::size_t j = 0; j < seq_len_; ++j) m(i, j) /= sum;
      } else {
        throw std::invalid_argument(
            "AttentionStack: row sum deviates by " + std::to_string(dev) +
            " (pre-softmax scores are not attention weights)");
      }
    }
  }
}

GradientStack::GradientStack(std::size_t layers, std::size_t heads,
                             std::size_t seq_len, std::vector<Matrix> mats)
    : layers_(layers), heads_(heads), seq_len_(seq_len), mats_(std::move(mats)) {
  check_stack_shape(layers_, heads_, seq_len_, mats_, "GradientStack");
}

ContributionMatrix contribution_matrix(const AttentionStack& attn,
                                       const GradientStack& grads, int class_id) {
  if (attn.layers() != grads.layers() || attn.heads() != grads.heads() ||
      attn.seq_len() != grads.seq_len()) {
    throw std::invalid_argument("contribution_matrix: stacks are not congruent");
  }
  const std::size_t n = attn.seq_len();
  Matrix acc(n, n);
  for (std::size_t l = 0; l < attn.layers(); ++l) {
    for (std::size_t h = 0; h < attn.heads(); ++h) {
      const Matrix& a = attn.at(l, h);
      const Matrix& g = grads.at(l, h);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          double gp = g(i, j);
          if (gp > 0.0) acc(i, j) += a(i, j) * gp;
        }
      }
    }
  }
  scale_inplace(acc, 1.0 / static_cast<double>(attn.layers() * attn.heads()));
  return ContributionMatrix{class_id, std::move(acc)};
}

Matrix average_attention(const AttentionStack& attn) {
  const std::size_t n = attn.seq_len();
  Matrix acc(n, n);
  for (const Matrix& m : attn.mats()) add_inplace(acc, m);
  scale_inplace(acc, 1.0 / static_cast<double>(attn.mats().size()));
  return acc;
}

double raw_attention_importance(const AttentionStack& attn, std::size_t token) {
  if (token >= attn.seq_len()) {
    throw std::invalid_argument("raw_attention_importance: token index out of range");
  }
  double sum = 0.0;
  for (const Matrix& m : attn.mats()) {
    for (std::size_t j = 0; j < attn.seq_len(); ++j) sum += m(token, j);
  }
  return sum / static_cast<double>(attn.layers() * attn.heads() * attn.seq_len());
}

}  // namespace attnshap
