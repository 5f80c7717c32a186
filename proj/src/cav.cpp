#include "attnshap/cav.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>

#include "attnshap/rng.hpp"

namespace attnshap {

std::string to_string(TcavVariant v) {
  return v == TcavVariant::Tcav ? "TCAV" : "T-TCAV";
}

ActivationSet collect_activations(const TransformerModel& model,
                                  const std::vector<SequenceInput>& positives,
                                  const std::vector<SequenceInput>& negatives,
                                  int layer) {
  if (layer < 1 || layer > model.config().layers) {
    throw std::invalid_argument("collect_activations: layer out of range");
  }
  ActivationSet out;
  auto add = [&](const std::vector<SequenceInput>& inputs, int label) {
    for (const SequenceInput& x : inputs) {
      ForwardTrace trace = model.forward(x);
      const Matrix& z = trace.hidden[layer];
      for (std::size_t i = 0; i < z.rows(); ++i) {
        out.vectors.emplace_back(z.row_ptr(i), z.row_ptr(i) + z.cols());
        out.labels.push_back(label);
      }
    }
  };
  add(positives, 1);
  add(negatives, 0);
  return out;
}

LogisticProbe train_probe(const ActivationSet& activations, const ProbeOptions& opt) {
  const std::size_t n = activations.vectors.size();
  if (n == 0 || n != activations.labels.size()) {
    throw std::invalid_argument("train_probe: empty or inconsistent activation set");
  }
  bool has_pos = false, has_neg = false;
  for (int l : activations.labels) (l == 1 ? has_pos : has_neg) = true;
  if (!has_pos || !has_neg) {
    throw std::invalid_argument("train_probe: needs both positive and negative examples");
  }
  const std::size_t d = activations.vectors[0].size();

  // Seeded shuffle, then an 80/20 train/holdout split.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(opt.seed, fnv1a64("probe.split")));
  for (std::size_t i = n; i > 1; --i) {
    std::size_t j = rng.next_below(i);
    std::swap(order[i - 1], order[j]);
  }
  std::size_t n_hold = static_cast<std::size_t>(
      std::floor(opt.holdout_fraction * static_cast<double>(n)));
  if (n_hold >= n) n_hold = n - 1;
  const std::size_t n_train = n - n_hold;

  LogisticProbe probe;
  probe.weights.assign(d, 0.0);
  probe.bias = 0.0;

  std::vector<double> gw(d, 0.0);
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    std::fill(gw.begin(), gw.end(), 0.0);
    double gb = 0.0;
    for (std::size_t t = 0; t < n_train; ++t) {
      const auto& x = activations.vectors[order[t]];
      double y = activations.labels[order[t]];
      double z = probe.bias;
      for (std::size_t j = 0; j < d; ++j) z += probe.weights[j] * x[j];
      double p = 1.0 / (1.0 + std::exp(-z));
      double err = p - y;
      for (std::size_t j = 0; j < d; ++j) gw[j] += err * x[j];
      gb += err;
    }
    const double inv = 1.0 / static_cast<double>(n_train);
    for (std::size_t j = 0; j < d; ++j) {
      probe.weights[j] -= opt.lr * (gw[j] * inv + opt.l2 * probe.weights[j]);
    }
    probe.bias -= opt.lr * gb * inv;
  }

  std::size_t hits = 0;
  const std::size_t eval_count = n_hold > 0 ? n_hold : n;
  for (std::size_t t = 0; t < eval_count; ++t) {
    std::size_t idx = n_hold > 0 ? order[n_train + t] : order[t];
    const auto& x = activations.vectors[idx];
    double z = probe.bias;
    for (std::size_t j = 0; j < d; ++j) z += probe.weights[j] * x[j];
    int pred = z > 0.0 ? 1 : 0;
    if (pred == activations.labels[idx]) ++hits;
  }
  probe.heldout_accuracy = static_cast<double>(hits) / static_cast<double>(eval_count);
  return probe;
}

Cav cav_from_probe(const LogisticProbe& probe, const std::string& concept_id, int layer) {
  double norm = 0.0;
  for (double w : probe.weights) norm += w * w;
  norm = std::sqrt(norm);
  if (norm == 0.0) {
    throw std::invalid_argument("cav_from_probe: zero probe weights");
  }
  Cav cav;
  cav.concept_id = concept_id;
  cav.layer = layer;
  cav.direction.reserve(probe.weights.size());
  for (double w : probe.weights) cav.direction.push_back(w / norm);
  cav.accuracy = probe.heldout_accuracy;
  return cav;
}

Cav relative_cav(const std::string& concept_id,
                 const std::map<std::string, std::vector<SequenceInput>>& concepts,
                 const TransformerModel& model, int layer, int n_pos, int n_neg,
                 std::uint64_t seed, const ProbeOptions& probe_opt) {
  auto it = concepts.find(concept_id);
  if (it == concepts.end()) {
    throw std::invalid_argument("relative_cav: unknown concept " + concept_id);
  }
  if (concepts.size() < 2) {
    throw std::invalid_argument("relative_cav: needs at least two concepts");
  }
  if (n_pos < 1 || n_neg < 1) {
    throw std::invalid_argument("relative_cav: sample counts must be positive");
  }

  Rng rng(mix_seed(seed, fnv1a64("relative_cav." + concept_id)));
  auto sample = [&rng](const std::vector<SequenceInput>& pool, int count) {
    if (pool.empty()) {
      throw std::invalid_argument("relative_cav: empty sample pool");
    }
    std::vector<SequenceInput> out;
    if (static_cast<int>(pool.size()) >= count) {
      // without replacement
      std::vector<std::size_t> idx(pool.size());
      std::iota(idx.begin(), idx.end(), 0);
      for (int t = 0; t < count; ++t) {
        std::size_t j = t + rng.next_below(idx.size() - t);
        std::swap(idx[t], idx[j]);
        out.push_back(pool[idx[t]]);
      }
    } else {
      for (int t = 0; t < count; ++t) out.push_back(pool[rng.next_below(pool.size())]);
    }
    return out;
  };

  std::vector<SequenceInput> negative_pool;
  for (const auto& [name, inputs] : concepts) {
    if (name == concept_id) continue;
    negative_pool.insert(negative_pool.end(), inputs.begin(), inputs.end());
  }

  std::vector<SequenceInput> pos = sample(it->second, n_pos);
  std::vector<SequenceInput> neg = sample(negative_pool, n_neg);

  ProbeOptions opt = probe_opt;
  opt.seed = mix_seed(seed, fnv1a64("relative_cav.probe"));
  LogisticProbe probe = train_probe(collect_activations(model, pos, neg, layer), opt);
  return cav_from_probe(probe, concept_id, layer);
}

namespace {

void check_cav(const TransformerModel& model, int layer, const Cav& cav) {
  if (layer < 1 || layer > model.config().layers) {
    throw std::invalid_argument("directional derivative: layer out of range");
  }
  if (static_cast<int>(cav.direction.size()) != model.config().d_model) {
    throw std::invalid_argument("directional derivative: CAV dimension mismatch");
  }
}

}  // namespace

double directional_derivative(const TransformerModel& model, const SequenceInput& x,
                              int layer, int class_k, const Cav& cav) {
  check_cav(model, layer, cav);
  ForwardTrace trace = model.forward(x);
  Matrix grad = model.hidden_gradient(trace, layer, class_k);
  double s = 0.0;
  for (std::size_t j = 0; j < grad.cols(); ++j) s += grad(0, j) * cav.direction[j];
  return s;
}

SensitivityRecord token_directional_derivatives(const TransformerModel& model,
                                                const SequenceInput& x, int layer,
                                                int class_k, const Cav& cav,
                                                const std::string& input_id) {
  check_cav(model, layer, cav);
  ForwardTrace trace = model.forward(x);
  Matrix grad = model.hidden_gradient(trace, layer, class_k);
  const std::size_t n = grad.rows();
  const int heads = model.config().heads;

  SensitivityRecord rec;
  rec.input_id = input_id;
  rec.class_k = class_k;
  rec.layer = layer;
  rec.cls_attention.assign(n, 0.0);
  const LayerCache& cache = trace.layers[layer - 1];
  for (int h = 0; h < heads; ++h) {
    for (std::size_t i = 0; i < n; ++i) {
      rec.cls_attention[i] += cache.attn[h](0, i);
    }
  }
  for (double& a : rec.cls_attention) a /= static_cast<double>(heads);

  rec.per_token.assign(n, 0.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double dot = 0.0;
    for (std::size_t j = 0; j < grad.cols(); ++j) dot += grad(i, j) * cav.direction[j];
    rec.per_token[i] = rec.cls_attention[i] * dot;
    sum += rec.per_token[i];
  }
  rec.aggregate = sum / static_cast<double>(n);
  return rec;
}

TcavReport tcav_scores(const TransformerModel& model,
                       const std::vector<SequenceInput>& class_inputs, int layer,
                       int class_k, const Cav& cav, TcavVariant variant) {
  if (class_inputs.empty()) {
    throw std::invalid_argument("tcav_scores: empty input set");
  }
  int positive = 0;
  for (const SequenceInput& x : class_inputs) {
    double s = variant == TcavVariant::Tcav
                   ? directional_derivative(model, x, layer, class_k, cav)
                   : token_directional_derivatives(model, x, layer, class_k, cav)
                         .aggregate;
    if (s > 0.0) ++positive;
  }
  TcavReport rep;
  rep.concept_id = cav.concept_id;
  rep.class_k = class_k;
  rep.layer = layer;
  rep.variant = variant;
  rep.n_inputs = static_cast<int>(class_inputs.size());
  rep.score = static_cast<double>(positive) / static_cast<double>(class_inputs.size());
  rep.per_cav_scores = {rep.score};
  return rep;
}

SignificanceResult significance_test(const std::vector<double>& scores, double alpha) {
  if (scores.size() < 2) {
    throw std::invalid_argument("significance_test: needs at least two scores");
  }
  const double n = static_cast<double>(scores.size());
  double mean = std::accumulate(scores.begin(), scores.end(), 0.0) / n;
  double ss = 0.0;
  for (double s : scores) ss += (s - mean) * (s - mean);
  double sd = std::sqrt(ss / (n - 1.0));

  SignificanceResult res;
  res.mean = mean;
  if (sd == 0.0) {
    res.p_value = (mean == 0.5) ? 1.0 : 0.0;
    res.t_statistic = (mean == 0.5) ? 0.0
                                    : std::numeric_limits<double>::infinity();
  } else {
    res.t_statistic = (mean - 0.5) / (sd / std::sqrt(n));
    boost::math::students_t dist(n - 1.0);
    res.p_value = 2.0 * boost::math::cdf(boost::math::complement(
                            dist, std::fabs(res.t_statistic)));
  }
  res.reject = res.p_value < alpha;
  return res;
}

}  // namespace attnshap
