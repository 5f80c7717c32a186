#include "attnshap/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "attnshap/rng.hpp"

namespace attnshap {

namespace {

constexpr double kLayerNormEps = 1e-5;

// y = x W + b, b applied per output column (b may be empty).
Matrix linear(const Matrix& x, const Matrix& w, const std::vector<double>& b) {
  Matrix y = matmul(x, w);
  if (!b.empty()) {
    for (std::size_t i = 0; i < y.rows(); ++i) {
      double* row = y.row_ptr(i);
      for (std::size_t j = 0; j < y.cols(); ++j) row[j] += b[j];
    }
  }
  return y;
}

Matrix layer_norm(const Matrix& x, const std::vector<double>& gamma,
                  const std::vector<double>& beta) {
  Matrix y(x.rows(), x.cols());
  const std::size_t d = x.cols();
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double* in = x.row_ptr(i);
    double* out = y.row_ptr(i);
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += in[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      double c = in[j] - mean;
      var += c * c;
    }
    var /= static_cast<double>(d);
    double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    for (std::size_t j = 0; j < d; ++j) {
      out[j] = gamma[j] * (in[j] - mean) * inv + beta[j];
    }
  }
  return y;
}

// Reverse-mode layernorm. x is the pre-normalization input; dgamma/dbeta may
// be null when parameter gradients are not wanted.
Matrix layer_norm_backward(const Matrix& x, const std::vector<double>& gamma,
                           const Matrix& dy, std::vector<double>* dgamma,
                           std::vector<double>* dbeta) {
  Matrix dx(x.rows(), x.cols());
  const std::size_t d = x.cols();
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double* in = x.row_ptr(i);
    const double* dout = dy.row_ptr(i);
    double* dres = dx.row_ptr(i);
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += in[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      double c = in[j] - mean;
      var += c * c;
    }
    var /= static_cast<double>(d);
    double inv = 1.0 / std::sqrt(var + kLayerNormEps);

    double m1 = 0.0, m2 = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      double xhat = (in[j] - mean) * inv;
      double dxhat = dout[j] * gamma[j];
      m1 += dxhat;
      m2 += dxhat * xhat;
      if (dgamma) (*dgamma)[j] += dout[j] * xhat;
      if (dbeta) (*dbeta)[j] += dout[j];
    }
    m1 /= static_cast<double>(d);
    m2 /= static_cast<double>(d);
    for (std::size_t j = 0; j < d; ++j) {
      double xhat = (in[j] - mean) * inv;
      double dxhat = dout[j] * gamma[j];
      dres[j] = inv * (dxhat - m1 - xhat * m2);
    }
  }
  return dx;
}

// Row-wise softmax Jacobian application: ds = (da - <da, a>) * a.
Matrix softmax_backward(const Matrix& a, const Matrix& da) {
  Matrix ds(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* arow = a.row_ptr(i);
    const double* drow = da.row_ptr(i);
    double* out = ds.row_ptr(i);
    double dot = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) dot += arow[j] * drow[j];
    for (std::size_t j = 0; j < a.cols(); ++j) out[j] = (drow[j] - dot) * arow[j];
  }
  return ds;
}

std::vector<double> column_sums(const Matrix& m) {
  std::vector<double> s(m.cols(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double* row = m.row_ptr(i);
    for (std::size_t j = 0; j < m.cols(); ++j) s[j] += row[j];
  }
  return s;
}

void accumulate(std::vector<double>& dst, const std::vector<double>& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void accumulate(std::vector<double>& dst, const Matrix& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src.data()[i];
}

// Index arithmetic shared by tensors() and backward(); keeps gradient
// buffers aligned with the checkpoint tensor order.
struct ParamLayout {
  int layers;
  int heads;

  std::size_t per_layer() const { return 3 * static_cast<std::size_t>(heads) + 10; }
  std::size_t embedding() const { return 0; }
  std::size_t layer_base(int l) const { return 1 + static_cast<std::size_t>(l) * per_layer(); }
  std::size_t w_q(int l, int h) const { return layer_base(l) + 3 * static_cast<std::size_t>(h); }
  std::size_t w_k(int l, int h) const { return w_q(l, h) + 1; }
  std::size_t w_v(int l, int h) const { return w_q(l, h) + 2; }
  std::size_t w_o(int l) const { return layer_base(l) + 3 * static_cast<std::size_t>(heads); }
  std::size_t b_o(int l) const { return w_o(l) + 1; }
  std::size_t ln1_gamma(int l) const { return w_o(l) + 2; }
  std::size_t ln1_beta(int l) const { return w_o(l) + 3; }
  std::size_t w_ff1(int l) const { return w_o(l) + 4; }
  std::size_t b_ff1(int l) const { return w_o(l) + 5; }
  std::size_t w_ff2(int l) const { return w_o(l) + 6; }
  std::size_t b_ff2(int l) const { return w_o(l) + 7; }
  std::size_t ln2_gamma(int l) const { return w_o(l) + 8; }
  std::size_t ln2_beta(int l) const { return w_o(l) + 9; }
  std::size_t w_head() const { return layer_base(layers); }
  std::size_t b_head() const { return w_head() + 1; }
  std::size_t total() const { return b_head() + 1; }
};

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = stddev * rng.next_gaussian();
  return m;
}

}  // namespace

void ModelConfig::validate() const {
  if (layers < 1 || heads < 1 || d_model < 1 || d_k < 1 || d_v < 1 || d_ff < 1) {
    throw std::invalid_argument("ModelConfig: dimensions must be positive");
  }
  if (vocab_size < 2 || max_len < 1 || n_classes < 2) {
    throw std::invalid_argument("ModelConfig: vocab_size/max_len/n_classes too small");
  }
  if (cls_id < 0 || cls_id >= vocab_size || mask_id < 0 || mask_id >= vocab_size ||
      cls_id == mask_id) {
    throw std::invalid_argument("ModelConfig: cls_id/mask_id invalid");
  }
}

std::vector<int> SequenceInput::original_indices() const {
  std::vector<int> out;
  for (int p = 0; p < static_cast<int>(token_ids.size()); ++p) {
    if (!is_special(p)) out.push_back(p);
  }
  return out;
}

bool SequenceInput::is_special(int pos) const {
  return std::binary_search(special_positions.begin(), special_positions.end(), pos);
}

SequenceInput make_sequence(std::vector<int> token_ids, int mask_id,
                            std::vector<int> extra_special_positions) {
  if (token_ids.empty()) {
    throw std::invalid_argument("make_sequence: empty token sequence");
  }
  SequenceInput x;
  x.token_ids = std::move(token_ids);
  x.mask_id = mask_id;
  x.special_positions = std::move(extra_special_positions);
  x.special_positions.push_back(0);
  std::sort(x.special_positions.begin(), x.special_positions.end());
  x.special_positions.erase(
      std::unique(x.special_positions.begin(), x.special_positions.end()),
      x.special_positions.end());
  for (int p : x.special_positions) {
    if (p < 0 || p >= static_cast<int>(x.token_ids.size())) {
      throw std::invalid_argument("make_sequence: special position out of range");
    }
  }
  return x;
}

SequenceInput mask_tokens(const SequenceInput& x, const std::vector<int>& keep) {
  for (int p : keep) {
    if (p < 0 || p >= static_cast<int>(x.token_ids.size()) || x.is_special(p)) {
      throw std::invalid_argument("mask_tokens: keep set must be a subset of original indices");
    }
  }
  SequenceInput out = x;
  for (int p : x.original_indices()) {
    if (std::find(keep.begin(), keep.end(), p) == keep.end()) {
      out.token_ids[p] = x.mask_id;
    }
  }
  return out;
}

void ImageInput::validate() const {
  if (height == 0 || width == 0 || channels == 0 || patch == 0) {
    throw std::invalid_argument("ImageInput: empty dimensions");
  }
  if (height % patch != 0 || width % patch != 0) {
    throw std::invalid_argument("ImageInput: image dimensions not divisible by patch size");
  }
  if (pixels.size() != height * width * channels) {
    throw std::invalid_argument("ImageInput: pixel buffer size mismatch");
  }
}

std::vector<std::vector<double>> patchify(const ImageInput& img) {
  img.validate();
  const std::size_t pr = img.patch_rows();
  const std::size_t pc = img.patch_cols();
  std::vector<std::vector<double>> patches;
  patches.reserve(pr * pc);
  for (std::size_t gr = 0; gr < pr; ++gr) {
    for (std::size_t gc = 0; gc < pc; ++gc) {
      std::vector<double> p;
      p.reserve(img.patch * img.patch * img.channels);
      for (std::size_t r = 0; r < img.patch; ++r) {
        for (std::size_t c = 0; c < img.patch; ++c) {
          std::size_t row = gr * img.patch + r;
          std::size_t col = gc * img.patch + c;
          const double* px = &img.pixels[(row * img.width + col) * img.channels];
          p.insert(p.end(), px, px + img.channels);
        }
      }
      patches.push_back(std::move(p));
    }
  }
  return patches;
}

ImageInput unpatchify(const std::vector<std::vector<double>>& patches,
                      std::size_t height, std::size_t width,
                      std::size_t channels, std::size_t patch) {
  ImageInput img;
  img.height = height;
  img.width = width;
  img.channels = channels;
  img.patch = patch;
  img.pixels.assign(height * width * channels, 0.0);
  if (height % patch != 0 || width % patch != 0 ||
      patches.size() != (height / patch) * (width / patch)) {
    throw std::invalid_argument("unpatchify: patch count does not tile the image");
  }
  const std::size_t pc = width / patch;
  for (std::size_t idx = 0; idx < patches.size(); ++idx) {
    const auto& p = patches[idx];
    if (p.size() != patch * patch * channels) {
      throw std::invalid_argument("unpatchify: patch length mismatch");
    }
    std::size_t gr = idx / pc, gc = idx % pc;
    std::size_t k = 0;
    for (std::size_t r = 0; r < patch; ++r) {
      for (std::size_t c = 0; c < patch; ++c) {
        std::size_t row = gr * patch + r;
        std::size_t col = gc * patch + c;
        for (std::size_t ch = 0; ch < channels; ++ch) {
          img.pixels[(row * width + col) * channels + ch] = p[k++];
        }
      }
    }
  }
  return img;
}

AttentionStack ForwardTrace::attention_stack() const {
  std::vector<Matrix> mats;
  for (const LayerCache& c : layers) {
    for (const Matrix& a : c.attn) mats.push_back(a);
  }
  return AttentionStack(layers.size(), layers.empty() ? 0 : layers[0].attn.size(),
                        hidden[0].rows(), std::move(mats));
}

TransformerModel::TransformerModel(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(cfg_.seed);
  const double d = static_cast<double>(cfg_.d_model);

  embedding_ = gaussian_matrix(cfg_.vocab_size, cfg_.d_model, 1.0, rng);

  positional_ = Matrix(cfg_.max_len, cfg_.d_model);
  if (cfg_.sinusoidal_positions) {
    for (int pos = 0; pos < cfg_.max_len; ++pos) {
      for (int j = 0; j < cfg_.d_model; ++j) {
        double angle = pos / std::pow(10000.0, (2.0 * (j / 2)) / d);
        positional_(pos, j) = (j % 2 == 0) ? std::sin(angle) : std::cos(angle);
      }
    }
  }

  layers_.resize(cfg_.layers);
  for (LayerParams& lp : layers_) {
    double proj_std = std::sqrt(1.0 / d);
    for (int h = 0; h < cfg_.heads; ++h) {
      lp.w_q.push_back(gaussian_matrix(cfg_.d_model, cfg_.d_k, proj_std, rng));
      lp.w_k.push_back(gaussian_matrix(cfg_.d_model, cfg_.d_k, proj_std, rng));
      lp.w_v.push_back(gaussian_matrix(cfg_.d_model, cfg_.d_v, proj_std, rng));
    }
    lp.w_o = gaussian_matrix(cfg_.heads * cfg_.d_v, cfg_.d_model,
                             std::sqrt(1.0 / (cfg_.heads * cfg_.d_v)), rng);
    lp.b_o.assign(cfg_.d_model, 0.0);
    lp.ln1_gamma.assign(cfg_.d_model, 1.0);
    lp.ln1_beta.assign(cfg_.d_model, 0.0);
    lp.w_ff1 = gaussian_matrix(cfg_.d_model, cfg_.d_ff, proj_std, rng);
    lp.b_ff1.assign(cfg_.d_ff, 0.0);
    lp.w_ff2 = gaussian_matrix(cfg_.d_ff, cfg_.d_model, std::sqrt(1.0 / cfg_.d_ff), rng);
    lp.b_ff2.assign(cfg_.d_model, 0.0);
    lp.ln2_gamma.assign(cfg_.d_model, 1.0);
    lp.ln2_beta.assign(cfg_.d_model, 0.0);
  }

  w_head_ = gaussian_matrix(cfg_.d_model, cfg_.n_classes, std::sqrt(1.0 / d), rng);
  b_head_.assign(cfg_.n_classes, 0.0);
}

void TransformerModel::check_input(const SequenceInput& x) const {
  if (x.token_ids.empty()) {
    throw std::invalid_argument("forward: empty input");
  }
  if (static_cast<int>(x.token_ids.size()) > cfg_.max_len) {
    throw std::invalid_argument("forward: sequence longer than max_len");
  }
  for (int id : x.token_ids) {
    if (id < 0 || id >= cfg_.vocab_size) {
      throw std::invalid_argument("forward: token id out of vocabulary range");
    }
  }
  if (x.special_positions.empty() || x.special_positions.front() != 0) {
    throw std::invalid_argument("forward: classification token missing at position 0");
  }
}

Matrix TransformerModel::embed(const SequenceInput& x) const {
  check_input(x);
  const std::size_t n = x.token_ids.size();
  Matrix z(n, cfg_.d_model);
  for (std::size_t p = 0; p < n; ++p) {
    const double* e = embedding_.row_ptr(x.token_ids[p]);
    const double* pe = positional_.row_ptr(p);
    double* out = z.row_ptr(p);
    for (int j = 0; j < cfg_.d_model; ++j) out[j] = e[j] + pe[j];
  }
  return z;
}

Matrix TransformerModel::run_layer(const Matrix& z_in, int layer_index,
                                   LayerCache* cache, const AttentionBump* bump) const {
  const LayerParams& lp = layers_[layer_index];
  const std::size_t n = z_in.rows();
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(cfg_.d_k));

  Matrix attn_in = cfg_.pre_norm ? layer_norm(z_in, lp.ln1_gamma, lp.ln1_beta) : z_in;

  Matrix concat(n, cfg_.heads * cfg_.d_v);
  std::vector<Matrix> qs, ks, vs, as;
  for (int h = 0; h < cfg_.heads; ++h) {
    Matrix q = matmul(attn_in, lp.w_q[h]);
    Matrix k = matmul(attn_in, lp.w_k[h]);
    Matrix v = matmul(attn_in, lp.w_v[h]);
    Matrix scores = matmul(q, transposed(k));
    scale_inplace(scores, inv_sqrt_dk);
    Matrix a = softmax_rows(scores);
    if (bump && bump->layer == layer_index && bump->head == h) {
      a(bump->i, bump->j) += bump->delta;
    }
    Matrix o = matmul(a, v);
    for (std::size_t i = 0; i < n; ++i) {
      for (int j = 0; j < cfg_.d_v; ++j) {
        concat(i, h * cfg_.d_v + j) = o(i, j);
      }
    }
    qs.push_back(std::move(q));
    ks.push_back(std::move(k));
    vs.push_back(std::move(v));
    as.push_back(std::move(a));
  }

  Matrix attn_proj = linear(concat, lp.w_o, lp.b_o);
  Matrix resid1 = add(z_in, attn_proj);
  Matrix ff_in = cfg_.pre_norm ? layer_norm(resid1, lp.ln2_gamma, lp.ln2_beta)
                               : layer_norm(resid1, lp.ln1_gamma, lp.ln1_beta);
  Matrix ff_pre = linear(ff_in, lp.w_ff1, lp.b_ff1);
  Matrix ff_act = ff_pre;
  for (double& v : ff_act.data()) v = std::max(0.0, v);
  Matrix ff_out = linear(ff_act, lp.w_ff2, lp.b_ff2);

  Matrix output;
  Matrix resid2;
  if (cfg_.pre_norm) {
    output = add(resid1, ff_out);
  } else {
    resid2 = add(ff_in, ff_out);
    output = layer_norm(resid2, lp.ln2_gamma, lp.ln2_beta);
  }

  if (cache) {
    cache->input = z_in;
    cache->attn_in = std::move(attn_in);
    cache->q = std::move(qs);
    cache->k = std::move(ks);
    cache->v = std::move(vs);
    cache->attn = std::move(as);
    cache->heads_concat = std::move(concat);
    cache->attn_proj = std::move(attn_proj);
    cache->resid1 = std::move(resid1);
    cache->ff_in = std::move(ff_in);
    cache->ff_pre = std::move(ff_pre);
    cache->ff_act = std::move(ff_act);
    cache->resid2 = std::move(resid2);
    cache->output = output;
  }
  return output;
}

ForwardTrace TransformerModel::forward(const SequenceInput& x) const {
  ForwardTrace trace;
  trace.input = x;
  Matrix z = embed(x);
  trace.hidden.push_back(z);
  trace.layers.resize(cfg_.layers);
  for (int l = 0; l < cfg_.layers; ++l) {
    z = run_layer(z, l, &trace.layers[l], nullptr);
    trace.hidden.push_back(z);
  }
  const double* cls = z.row_ptr(0);
  trace.logits.assign(cfg_.n_classes, 0.0);
  for (int c = 0; c < cfg_.n_classes; ++c) {
    double acc = b_head_[c];
    for (int j = 0; j < cfg_.d_model; ++j) acc += cls[j] * w_head_(j, c);
    trace.logits[c] = acc;
  }
  trace.probs = softmax(trace.logits);
  return trace;
}

Prediction TransformerModel::predict(const SequenceInput& x) const {
  ForwardTrace t = forward(x);
  Prediction p;
  p.probs = t.probs;
  p.label = static_cast<int>(std::max_element(p.probs.begin(), p.probs.end()) -
                             p.probs.begin());
  return p;
}

BackwardResult TransformerModel::backward(const ForwardTrace& trace,
                                          const std::vector<double>& d_logits,
                                          ParamGradients* param_grads) const {
  if (static_cast<int>(d_logits.size()) != cfg_.n_classes) {
    throw std::invalid_argument("backward: d_logits size mismatch");
  }
  const std::size_t n = trace.hidden[0].rows();
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(cfg_.d_k));
  ParamLayout layout{cfg_.layers, cfg_.heads};

  if (param_grads) {
    param_grads->grads.clear();
    auto refs = tensors();
    param_grads->grads.resize(refs.size());
    for (std::size_t i = 0; i < refs.size(); ++i) {
      param_grads->grads[i].assign(refs[i].size, 0.0);
    }
  }

  BackwardResult res;
  res.d_hidden.assign(cfg_.layers + 1, Matrix());
  res.d_attention.assign(static_cast<std::size_t>(cfg_.layers) * cfg_.heads, Matrix());

  // Classification head: only the CLS row of Z^L feeds it.
  Matrix dz(n, cfg_.d_model);
  const double* cls = trace.hidden.back().row_ptr(0);
  for (int j = 0; j < cfg_.d_model; ++j) {
    double acc = 0.0;
    for (int c = 0; c < cfg_.n_classes; ++c) acc += d_logits[c] * w_head_(j, c);
    dz(0, j) = acc;
  }
  if (param_grads) {
    auto& dwh = param_grads->grads[layout.w_head()];
    auto& dbh = param_grads->grads[layout.b_head()];
    for (int j = 0; j < cfg_.d_model; ++j) {
      for (int c = 0; c < cfg_.n_classes; ++c) {
        dwh[j * cfg_.n_classes + c] += cls[j] * d_logits[c];
      }
    }
    for (int c = 0; c < cfg_.n_classes; ++c) dbh[c] += d_logits[c];
  }
  res.d_hidden[cfg_.layers] = dz;

  for (int l = cfg_.layers - 1; l >= 0; --l) {
    const LayerParams& lp = layers_[l];
    const LayerCache& cache = trace.layers[l];

    std::vector<double>* dg1 = nullptr;
    std::vector<double>* db1 = nullptr;
    std::vector<double>* dg2 = nullptr;
    std::vector<double>* db2 = nullptr;
    if (param_grads) {
      dg1 = &param_grads->grads[layout.ln1_gamma(l)];
      db1 = &param_grads->grads[layout.ln1_beta(l)];
      dg2 = &param_grads->grads[layout.ln2_gamma(l)];
      db2 = &param_grads->grads[layout.ln2_beta(l)];
    }

    Matrix d_resid1;  // gradient reaching R1 = input + attention projection
    Matrix d_ff_in;   // gradient reaching the feed-forward input
    if (cfg_.pre_norm) {
      d_resid1 = dz;
      // F = relu(ff_in W1 + b1) W2 + b2, output = resid1 + F
      Matrix d_ff_out = dz;
      Matrix d_act = matmul(d_ff_out, transposed(lp.w_ff2));
      if (param_grads) {
        accumulate(param_grads->grads[layout.w_ff2(l)],
                   matmul(transposed(cache.ff_act), d_ff_out));
        accumulate(param_grads->grads[layout.b_ff2(l)], column_sums(d_ff_out));
      }
      Matrix d_pre = d_act;
      for (std::size_t i = 0; i < d_pre.data().size(); ++i) {
        if (cache.ff_pre.data()[i] <= 0.0) d_pre.data()[i] = 0.0;
      }
      d_ff_in = matmul(d_pre, transposed(lp.w_ff1));
      if (param_grads) {
        accumulate(param_grads->grads[layout.w_ff1(l)],
                   matmul(transposed(cache.ff_in), d_pre));
        accumulate(param_grads->grads[layout.b_ff1(l)], column_sums(d_pre));
      }
      add_inplace(d_resid1,
                  layer_norm_backward(cache.resid1, lp.ln2_gamma, d_ff_in, dg2, db2));
    } else {
      // Z^l = LN2(ff_in + F)
      Matrix d_resid2 = layer_norm_backward(cache.resid2, lp.ln2_gamma, dz, dg2, db2);
      Matrix d_ff_out = d_resid2;
      Matrix d_act = matmul(d_ff_out, transposed(lp.w_ff2));
      if (param_grads) {
        accumulate(param_grads->grads[layout.w_ff2(l)],
                   matmul(transposed(cache.ff_act), d_ff_out));
        accumulate(param_grads->grads[layout.b_ff2(l)], column_sums(d_ff_out));
      }
      Matrix d_pre = d_act;
      for (std::size_t i = 0; i < d_pre.data().size(); ++i) {
        if (cache.ff_pre.data()[i] <= 0.0) d_pre.data()[i] = 0.0;
      }
      d_ff_in = d_resid2;  // residual branch
      add_inplace(d_ff_in, matmul(d_pre, transposed(lp.w_ff1)));
      if (param_grads) {
        accumulate(param_grads->grads[layout.w_ff1(l)],
                   matmul(transposed(cache.ff_in), d_pre));
        accumulate(param_grads->grads[layout.b_ff1(l)], column_sums(d_pre));
      }
      // ff_in = LN1(resid1)
      d_resid1 = layer_norm_backward(cache.resid1, lp.ln1_gamma, d_ff_in, dg1, db1);
    }

    // resid1 = input + attn_proj; attn_proj = concat W_O + b_O
    Matrix d_input = d_resid1;
    Matrix d_concat = matmul(d_resid1, transposed(lp.w_o));
    if (param_grads) {
      accumulate(param_grads->grads[layout.w_o(l)],
                 matmul(transposed(cache.heads_concat), d_resid1));
      accumulate(param_grads->grads[layout.b_o(l)], column_sums(d_resid1));
    }

    Matrix d_attn_in(n, cfg_.d_model);
    for (int h = 0; h < cfg_.heads; ++h) {
      Matrix d_o(n, cfg_.d_v);
      for (std::size_t i = 0; i < n; ++i) {
        for (int j = 0; j < cfg_.d_v; ++j) d_o(i, j) = d_concat(i, h * cfg_.d_v + j);
      }
      const Matrix& a = cache.attn[h];
      Matrix d_a = matmul(d_o, transposed(cache.v[h]));
      res.d_attention[static_cast<std::size_t>(l) * cfg_.heads + h] = d_a;

      Matrix d_v = matmul(transposed(a), d_o);
      Matrix d_scores = softmax_backward(a, d_a);
      scale_inplace(d_scores, inv_sqrt_dk);
      Matrix d_q = matmul(d_scores, cache.k[h]);
      Matrix d_k = matmul(transposed(d_scores), cache.q[h]);

      add_inplace(d_attn_in, matmul(d_q, transposed(lp.w_q[h])));
      add_inplace(d_attn_in, matmul(d_k, transposed(lp.w_k[h])));
      add_inplace(d_attn_in, matmul(d_v, transposed(lp.w_v[h])));
      if (param_grads) {
        accumulate(param_grads->grads[layout.w_q(l, h)],
                   matmul(transposed(cache.attn_in), d_q));
        accumulate(param_grads->grads[layout.w_k(l, h)],
                   matmul(transposed(cache.attn_in), d_k));
        accumulate(param_grads->grads[layout.w_v(l, h)],
                   matmul(transposed(cache.attn_in), d_v));
      }
    }

    if (cfg_.pre_norm) {
      add_inplace(d_input,
                  layer_norm_backward(cache.input, lp.ln1_gamma, d_attn_in, dg1, db1));
    } else {
      add_inplace(d_input, d_attn_in);
    }
    dz = std::move(d_input);
    res.d_hidden[l] = dz;
  }

  if (param_grads) {
    // Embedding rows pick up the Z^0 gradient of every position they fed.
    auto& demb = param_grads->grads[layout.embedding()];
    for (std::size_t p = 0; p < n; ++p) {
      int id = trace.input.token_ids[p];
      const double* row = res.d_hidden[0].row_ptr(p);
      for (int j = 0; j < cfg_.d_model; ++j) {
        demb[static_cast<std::size_t>(id) * cfg_.d_model + j] += row[j];
      }
    }
  }
  return res;
}

GradientStack TransformerModel::attention_gradients(const ForwardTrace& trace,
                                                    int class_k) const {
  if (class_k < 0 || class_k >= cfg_.n_classes) {
    throw std::invalid_argument("attention_gradients: class out of range");
  }
  std::vector<double> d_logits(cfg_.n_classes, 0.0);
  d_logits[class_k] = 1.0;
  BackwardResult b = backward(trace, d_logits);
  return GradientStack(cfg_.layers, cfg_.heads, trace.hidden[0].rows(),
                       std::move(b.d_attention));
}

Matrix TransformerModel::hidden_gradient(const ForwardTrace& trace, int layer,
                                         int class_k) const {
  if (layer < 1 || layer > cfg_.layers) {
    throw std::invalid_argument("hidden_gradient: layer out of range");
  }
  if (class_k < 0 || class_k >= cfg_.n_classes) {
    throw std::invalid_argument("hidden_gradient: class out of range");
  }
  std::vector<double> d_logits(cfg_.n_classes, 0.0);
  d_logits[class_k] = 1.0;
  BackwardResult b = backward(trace, d_logits);
  return b.d_hidden[layer];
}

std::vector<double> TransformerModel::logits_from_hidden(int layer, const Matrix& z) const {
  if (layer < 0 || layer > cfg_.layers) {
    throw std::invalid_argument("logits_from_hidden: layer out of range");
  }
  if (static_cast<int>(z.cols()) != cfg_.d_model) {
    throw std::invalid_argument("logits_from_hidden: width mismatch");
  }
  Matrix cur = z;
  for (int l = layer; l < cfg_.layers; ++l) {
    cur = run_layer(cur, l, nullptr, nullptr);
  }
  std::vector<double> logits(cfg_.n_classes, 0.0);
  const double* cls = cur.row_ptr(0);
  for (int c = 0; c < cfg_.n_classes; ++c) {
    double acc = b_head_[c];
    for (int j = 0; j < cfg_.d_model; ++j) acc += cls[j] * w_head_(j, c);
    logits[c] = acc;
  }
  return logits;
}

std::vector<double> TransformerModel::logits_with_attention_bump(
    const SequenceInput& x, int layer, int head, std::size_t i, std::size_t j,
    double delta) const {
  AttentionBump bump{layer, head, i, j, delta};
  Matrix z = embed(x);
  for (int l = 0; l < cfg_.layers; ++l) {
    z = run_layer(z, l, nullptr, &bump);
  }
  std::vector<double> logits(cfg_.n_classes, 0.0);
  const double* cls = z.row_ptr(0);
  for (int c = 0; c < cfg_.n_classes; ++c) {
    double acc = b_head_[c];
    for (int jj = 0; jj < cfg_.d_model; ++jj) acc += cls[jj] * w_head_(jj, c);
    logits[c] = acc;
  }
  return logits;
}

std::vector<TensorRef> TransformerModel::tensors() {
  std::vector<TensorRef> out;
  auto push_mat = [&out](const std::string& name, Matrix& m) {
    out.push_back({name, m.data().data(), m.data().size()});
  };
  auto push_vec = [&out](const std::string& name, std::vector<double>& v) {
    out.push_back({name, v.data(), v.size()});
  };
  push_mat("embedding", embedding_);
  for (int l = 0; l < cfg_.layers; ++l) {
    LayerParams& lp = layers_[l];
    std::string pfx = "layer" + std::to_string(l) + ".";
    for (int h = 0; h < cfg_.heads; ++h) {
      std::string hp = pfx + "head" + std::to_string(h) + ".";
      push_mat(hp + "w_q", lp.w_q[h]);
      push_mat(hp + "w_k", lp.w_k[h]);
      push_mat(hp + "w_v", lp.w_v[h]);
    }
    push_mat(pfx + "w_o", lp.w_o);
    push_vec(pfx + "b_o", lp.b_o);
    push_vec(pfx + "ln1_gamma", lp.ln1_gamma);
    push_vec(pfx + "ln1_beta", lp.ln1_beta);
    push_mat(pfx + "w_ff1", lp.w_ff1);
    push_vec(pfx + "b_ff1", lp.b_ff1);
    push_mat(pfx + "w_ff2", lp.w_ff2);
    push_vec(pfx + "b_ff2", lp.b_ff2);
    push_vec(pfx + "ln2_gamma", lp.ln2_gamma);
    push_vec(pfx + "ln2_beta", lp.ln2_beta);
  }
  push_mat("w_head", w_head_);
  push_vec("b_head", b_head_);

  ParamLayout layout{cfg_.layers, cfg_.heads};
  if (out.size() != layout.total()) {
    throw std::logic_error("tensors(): enumeration out of sync with layout");
  }
  return out;
}

std::vector<TensorRef> TransformerModel::tensors() const {
  return const_cast<TransformerModel*>(this)->tensors();
}

std::size_t TransformerModel::parameter_count() const {
  std::size_t total = 0;
  for (const TensorRef& t : tensors()) total += t.size;
  return total;
}

}  // namespace attnshap
