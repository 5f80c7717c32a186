#include "attnshap/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "attnshap/rng.hpp"
#include "attnshap/threading.hpp"

namespace attnshap {

void MetricConfig::validate() const {
  auto ok = [](double b) { return b >= 0.0 && b <= 100.0; };
  if (!ok(b_percent)) {
    throw std::invalid_argument("MetricConfig: b must be in [0, 100]");
  }
  if (b_set.empty()) {
    throw std::invalid_argument("MetricConfig: empty b set");
  }
  for (double b : b_set) {
    if (!ok(b)) throw std::invalid_argument("MetricConfig: b must be in [0, 100]");
  }
}

std::vector<int> top_b_tokens(const std::vector<double>& scores,
                              const std::vector<int>& players, double b_percent) {
  if (scores.size() != players.size()) {
    throw std::invalid_argument("top_b_tokens: scores/players size mismatch");
  }
  if (b_percent < 0.0 || b_percent > 100.0) {
    throw std::invalid_argument("top_b_tokens: b out of range");
  }
  // round-half-up
  std::size_t k = static_cast<std::size_t>(
      std::floor(b_percent / 100.0 * static_cast<double>(players.size()) + 0.5));
  k = std::min(k, players.size());

  std::vector<std::size_t> order(players.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return players[a] < players[b];
  });

  std::vector<int> keep;
  keep.reserve(k);
  for (std::size_t t = 0; t < k; ++t) keep.push_back(players[order[t]]);
  std::sort(keep.begin(), keep.end());
  return keep;
}

double weighted_f1(const std::vector<std::pair<int, int>>& ref_pred, int n_classes) {
  if (ref_pred.empty()) {
    throw std::invalid_argument("weighted_f1: no pairs");
  }
  // confusion[r][p]
  std::vector<std::vector<int>> confusion(n_classes, std::vector<int>(n_classes, 0));
  std::vector<int> support(n_classes, 0);
  for (auto [r, p] : ref_pred) {
    if (r < 0 || r >= n_classes || p < 0 || p >= n_classes) {
      throw std::invalid_argument("weighted_f1: class out of range");
    }
    confusion[r][p] += 1;
    support[r] += 1;
  }
  double total = static_cast<double>(ref_pred.size());
  double f1 = 0.0;
  for (int c = 0; c < n_classes; ++c) {
    if (support[c] == 0) continue;
    int tp = confusion[c][c];
    int fn = support[c] - tp;
    int fp = 0;
    for (int r = 0; r < n_classes; ++r) {
      if (r != c) fp += confusion[r][c];
    }
    double denom = 2.0 * tp + fp + fn;
    double class_f1 = denom > 0.0 ? 2.0 * tp / denom : 0.0;
    f1 += (support[c] / total) * class_f1;
  }
  return f1;
}

namespace {

SequenceInput reduce_keep(const SequenceInput& x, const std::vector<int>& keep) {
  return mask_tokens(x, keep);
}

SequenceInput reduce_remove(const SequenceInput& x, const std::vector<int>& removed) {
  std::vector<int> keep;
  for (int p : x.original_indices()) {
    if (!std::binary_search(removed.begin(), removed.end(), p)) keep.push_back(p);
  }
  return mask_tokens(x, keep);
}

}  // namespace

double f1_weighted(const TransformerModel& model, const Dataset& data,
                   const std::vector<AttributionResult>& per_sample, double b_percent,
                   bool use_gold_labels) {
  if (data.empty()) {
    throw std::invalid_argument("f1_weighted: empty dataset");
  }
  if (data.size() != per_sample.size()) {
    throw std::invalid_argument("f1_weighted: one attribution per sample required");
  }
  std::vector<std::pair<int, int>> ref_pred(data.size());
  parallel_for(data.size(), [&](std::size_t i) {
    const LabeledSequence& ex = data[i];
    int ref = use_gold_labels ? ex.label : model.predict(ex.x).label;
    std::vector<int> keep = top_b_tokens(per_sample[i].scores,
                                         per_sample[i].player_indices, b_percent);
    int pred = model.predict(reduce_keep(ex.x, keep)).label;
    ref_pred[i] = {ref, pred};
  });
  return weighted_f1(ref_pred, model.config().n_classes);
}

double comprehensiveness(const TransformerModel& model, const SequenceInput& x,
                         const AttributionResult& scores,
                         const std::vector<double>& b_set, int class_k) {
  if (b_set.empty()) {
    throw std::invalid_argument("comprehensiveness: empty b set");
  }
  double full = model.predict(x).probs[class_k];
  double acc = 0.0;
  for (double b : b_set) {
    std::vector<int> top = top_b_tokens(scores.scores, scores.player_indices, b);
    acc += full - model.predict(reduce_remove(x, top)).probs[class_k];
  }
  return acc / (static_cast<double>(b_set.size()) + 1.0);
}

double sufficiency(const TransformerModel& model, const SequenceInput& x,
                   const AttributionResult& scores, const std::vector<double>& b_set,
                   int class_k) {
  if (b_set.empty()) {
    throw std::invalid_argument("sufficiency: empty b set");
  }
  double full = model.predict(x).probs[class_k];
  double acc = 0.0;
  for (double b : b_set) {
    std::vector<int> top = top_b_tokens(scores.scores, scores.player_indices, b);
    acc += full - model.predict(reduce_keep(x, top)).probs[class_k];
  }
  return acc / (static_cast<double>(b_set.size()) + 1.0);
}

std::vector<MetricReport> evaluate_suite(const TransformerModel& model,
                                         const Dataset& data,
                                         const std::vector<std::string>& methods,
                                         const MetricConfig& config,
                                         const SamplingScheme& scheme,
                                         std::uint64_t seed,
                                         const std::string& dataset_id) {
  config.validate();
  if (data.empty()) {
    throw std::invalid_argument("evaluate_suite: empty dataset");
  }
  std::vector<MetricReport> reports;
  for (const std::string& method : methods) {
    MetricReport rep;
    rep.method = method;
    rep.dataset_id = dataset_id;
    rep.n_samples = static_cast<int>(data.size());
    try {
      std::vector<AttributionResult> results(data.size());
      std::vector<int> classes(data.size(), 0);
      std::vector<double> comp(data.size(), 0.0), suff(data.size(), 0.0);
      parallel_for(data.size(), [&](std::size_t i) {
        const LabeledSequence& ex = data[i];
        int k = model.predict(ex.x).label;
        classes[i] = k;
        SamplingScheme per_sample = scheme;
        per_sample.seed = mix_seed(mix_seed(seed, fnv1a64(method)), i);
        results[i] = attribute(method, model, ex.x, k, per_sample);
        comp[i] = comprehensiveness(model, ex.x, results[i], config.b_set, k);
        suff[i] = sufficiency(model, ex.x, results[i], config.b_set, k);
      });
      rep.f1 = f1_weighted(model, data, results, config.b_percent,
                           config.use_gold_labels);
      auto mean_ci = [](const std::vector<double>& xs) {
        double n = static_cast<double>(xs.size());
        double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
        double ss = 0.0;
        for (double v : xs) ss += (v - mean) * (v - mean);
        double se = n > 1 ? std::sqrt(ss / (n - 1.0)) / std::sqrt(n) : 0.0;
        return std::pair<double, double>{mean, 1.96 * se};
      };
      std::tie(rep.comp_mean, rep.comp_ci) = mean_ci(comp);
      std::tie(rep.suff_mean, rep.suff_ci) = mean_ci(suff);
    } catch (const std::exception& e) {
      rep.failed = true;
      rep.error = e.what();
    }
    reports.push_back(std::move(rep));
  }
  return reports;
}

}  // namespace attnshap
