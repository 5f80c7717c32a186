#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "attnshap/matrix.hpp"
#include "attnshap/stacks.hpp"

namespace attnshap {

struct ModelConfig {
  int layers = 2;
  int heads = 2;
  int d_model = 16;
  int d_k = 8;
  int d_v = 8;
  int d_ff = 32;
  int vocab_size = 16;
  int max_len = 32;
  int n_classes = 2;
  std::uint64_t seed = 1;
  // Fixed sinusoidal position signal; turn off for permutation-symmetry
  // experiments.
  bool sinusoidal_positions = true;
  // Default places layer normalization after each sub-layer; pre-norm is
  // available for gradient-stability comparisons.
  bool pre_norm = false;
  int cls_id = 0;
  int mask_id = 1;

  void validate() const;
};

/// Token-id sequence. Position 0 always holds the classification token;
/// original_indices() lists the non-special positions that attribution and
/// masking operate on.
struct SequenceInput {
  std::vector<int> token_ids;
  std::vector<int> special_positions;  // sorted, always contains 0
  int mask_id = 1;

  std::vector<int> original_indices() const;
  bool is_special(int pos) const;
};

SequenceInput make_sequence(std::vector<int> token_ids, int mask_id = 1,
                            std::vector<int> extra_special_positions = {});

/// Replaces every original token outside `keep` with the mask token. Special
/// positions are never touched; `keep` must be a subset of the original
/// indices.
SequenceInput mask_tokens(const SequenceInput& x, const std::vector<int>& keep);

struct ImageInput {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 1;
  std::size_t patch = 1;
  std::vector<double> pixels;  // [row][col][channel]

  void validate() const;
  std::size_t patch_rows() const { return height / patch; }
  std::size_t patch_cols() const { return width / patch; }
};

/// Raster-order non-overlapping patches, each flattened to patch*patch*C
/// values (pixels in raster order, channels innermost). Lossless.
std::vector<std::vector<double>> patchify(const ImageInput& img);
ImageInput unpatchify(const std::vector<std::vector<double>>& patches,
                      std::size_t height, std::size_t width,
                      std::size_t channels, std::size_t patch);

struct LayerCache {
  Matrix input;     // Z^{l-1}
  Matrix attn_in;   // what feeds Q/K/V (input, or its normalization in pre-norm)
  std::vector<Matrix> q, k, v, attn;
  Matrix heads_concat;
  Matrix attn_proj;  // heads_concat * W_O + b_O
  Matrix resid1;
  Matrix ff_in;      // what feeds the feed-forward block
  Matrix ff_pre;     // pre-activation
  Matrix ff_act;
  Matrix resid2;     // post-norm only
  Matrix output;     // Z^l
};

struct ForwardTrace {
  SequenceInput input;
  std::vector<Matrix> hidden;  // Z^0 .. Z^L
  std::vector<LayerCache> layers;
  std::vector<double> logits;
  std::vector<double> probs;

  AttentionStack attention_stack() const;
};

struct Prediction {
  std::vector<double> probs;
  int label = 0;
};

struct LayerParams {
  std::vector<Matrix> w_q, w_k, w_v;  // per head
  Matrix w_o;
  std::vector<double> b_o;
  std::vector<double> ln1_gamma, ln1_beta;
  Matrix w_ff1;
  std::vector<double> b_ff1;
  Matrix w_ff2;
  std::vector<double> b_ff2;
  std::vector<double> ln2_gamma, ln2_beta;
};

struct BackwardResult {
  std::vector<Matrix> d_hidden;     // d logit / d Z^l for l = 0..L
  std::vector<Matrix> d_attention;  // layer-major, layers*heads entries
};

/// Gradient buffers aligned one-to-one with TransformerModel::tensors().
struct ParamGradients {
  std::vector<std::vector<double>> grads;
};

struct TensorRef {
  std::string name;
  double* data;
  std::size_t size;
};

/// Deterministic encoder-only transformer: CLS token, multi-head
/// self-attention, feed-forward, residual + layernorm, classification head on
/// the final CLS state. Forward records every attention matrix and hidden
/// state; backward produces exact reverse-mode gradients of any class logit
/// with respect to all of them.
class TransformerModel {
 public:
  explicit TransformerModel(const ModelConfig& cfg);

  const ModelConfig& config() const { return cfg_; }

  ForwardTrace forward(const SequenceInput& x) const;
  Prediction predict(const SequenceInput& x) const;

  /// d(logit_k)/dA for every layer/head, with A treated as a free input to
  /// the downstream computation (the softmax producing it is not re-entered;
  /// the gradient flows through the attention-times-value product, both
  /// residual branches, and everything after).
  GradientStack attention_gradients(const ForwardTrace& trace, int class_k) const;

  /// d(logit_k)/dZ^layer, exact reverse-mode, layer in 1..L.
  Matrix hidden_gradient(const ForwardTrace& trace, int layer, int class_k) const;

  BackwardResult backward(const ForwardTrace& trace,
                          const std::vector<double>& d_logits,
                          ParamGradients* param_grads = nullptr) const;

  /// Recomputes the logits after substituting the hidden state at `layer`
  /// (0..L) and running the remaining layers.
  std::vector<double> logits_from_hidden(int layer, const Matrix& z) const;

  /// Recomputes the logits with attention entry (i, j) of one layer/head
  /// displaced by delta after its softmax; upstream state is untouched.
  std::vector<double> logits_with_attention_bump(const SequenceInput& x, int layer,
                                                 int head, std::size_t i,
                                                 std::size_t j, double delta) const;

  std::vector<TensorRef> tensors();
  std::vector<TensorRef> tensors() const;  // refs are read-only by convention
  std::size_t parameter_count() const;

  Matrix embed(const SequenceInput& x) const;

 private:
  struct AttentionBump {
    int layer = -1;
    int head = -1;
    std::size_t i = 0, j = 0;
    double delta = 0.0;
  };

  Matrix run_layer(const Matrix& z_in, int layer_index, LayerCache* cache,
                   const AttentionBump* bump) const;
  void check_input(const SequenceInput& x) const;

  ModelConfig cfg_;
  Matrix embedding_;   // vocab_size x d_model
  Matrix positional_;  // max_len x d_model (zeros when disabled)
  std::vector<LayerParams> layers_;
  Matrix w_head_;  // d_model x n_classes
  std::vector<double> b_head_;
};

}  // namespace attnshap
