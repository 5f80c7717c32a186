#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "attnshap/attribute.hpp"
#include "attnshap/train.hpp"

namespace attnshap {

struct MetricConfig {
  double b_percent = 20.0;                      // F1 keep fraction
  std::vector<double> b_set = {0, 10, 20, 50};  // comp/suff fractions
  // F1 reference labels come from the model's own prediction on the full
  // input by default; gold switches to dataset labels.
  bool use_gold_labels = false;

  void validate() const;
};

struct MetricReport {
  std::string method;
  std::string dataset_id;
  double f1 = 0.0;
  double comp_mean = 0.0;
  double comp_ci = 0.0;  // 1.96 * standard error
  double suff_mean = 0.0;
  double suff_ci = 0.0;
  int n_samples = 0;
  bool failed = false;
  std::string error;
};

/// Indices of the round(b% * player count) highest-scoring players; ties are
/// broken toward the lower token index. Returned sorted ascending.
std::vector<int> top_b_tokens(const std::vector<double>& scores,
                              const std::vector<int>& players, double b_percent);

/// Support-weighted mean of per-class F1 over (reference, prediction) pairs.
/// Classes with empty denominators score zero.
double weighted_f1(const std::vector<std::pair<int, int>>& ref_pred, int n_classes);

/// Weighted F1 of predictions on top-b%-reduced inputs against the reference
/// labels (model predictions on the full inputs, or gold labels).
double f1_weighted(const TransformerModel& model, const Dataset& data,
                   const std::vector<AttributionResult>& per_sample, double b_percent,
                   bool use_gold_labels = false);

/// Mean drop in the class-k probability over the b-set when the top-b% tokens
/// are masked out; normalized by |B| + 1.
double comprehensiveness(const TransformerModel& model, const SequenceInput& x,
                         const AttributionResult& scores,
                         const std::vector<double>& b_set, int class_k);

/// Mean drop in the class-k probability when only the top-b% tokens are kept.
double sufficiency(const TransformerModel& model, const SequenceInput& x,
                   const AttributionResult& scores, const std::vector<double>& b_set,
                   int class_k);

/// Runs every method over the dataset and aggregates per-method means with
/// normal-approximation confidence intervals. A method that fails on any
/// sample gets a diagnostic row instead of numbers; the other methods still
/// run. Deterministic given seed.
std::vector<MetricReport> evaluate_suite(const TransformerModel& model,
                                         const Dataset& data,
                                         const std::vector<std::string>& methods,
                                         const MetricConfig& config,
                                         const SamplingScheme& scheme,
                                         std::uint64_t seed,
                                         const std::string& dataset_id = "");

}  // namespace attnshap
