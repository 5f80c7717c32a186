#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "attnshap/model.hpp"

namespace attnshap {

/// Positive examples for one concept plus the negative pool they are probed
/// against.
struct ConceptDataset {
  std::string concept_id;
  std::vector<SequenceInput> positives;
  std::vector<SequenceInput> negatives;
};

struct LogisticProbe {
  std::vector<double> weights;
  double bias = 0.0;
  double heldout_accuracy = 0.0;
};

/// Unit concept direction in the residual space at one layer, oriented so the
/// probe's positive logit increases along it.
struct Cav {
  std::string concept_id;
  int layer = 0;
  std::vector<double> direction;
  double accuracy = 0.0;
};

struct SensitivityRecord {
  std::string input_id;
  int class_k = 0;
  int layer = 0;
  std::vector<double> per_token;      // one value per token, specials included
  double aggregate = 0.0;             // mean of per_token
  std::vector<double> cls_attention;  // head-averaged CLS row at the layer
};

enum class TcavVariant { Tcav, TokenTcav };

std::string to_string(TcavVariant v);

struct TcavReport {
  std::string concept_id;
  int class_k = 0;
  int layer = 0;
  TcavVariant variant = TcavVariant::TokenTcav;
  int n_inputs = 0;
  double score = 0.0;                  // mean over per_cav_scores
  std::vector<double> per_cav_scores;  // one entry per CAV
};

struct SignificanceResult {
  double p_value = 1.0;
  double t_statistic = 0.0;
  double mean = 0.0;
  bool reject = false;
};

struct ProbeOptions {
  int epochs = 200;
  double lr = 0.5;
  double l2 = 0.0;
  double holdout_fraction = 0.2;
  std::uint64_t seed = 0;
};

/// One labeled d-vector per token position of every input, taken from Z^layer.
/// Every token of a positive example inherits the positive label.
struct ActivationSet {
  std::vector<std::vector<double>> vectors;
  std::vector<int> labels;  // 1 positive, 0 negative
};

ActivationSet collect_activations(const TransformerModel& model,
                                  const std::vector<SequenceInput>& positives,
                                  const std::vector<SequenceInput>& negatives,
                                  int layer);

/// Logistic regression by full-batch gradient descent; deterministic given
/// options.seed, which drives the 80/20 holdout split.
LogisticProbe train_probe(const ActivationSet& activations, const ProbeOptions& opt);

Cav cav_from_probe(const LogisticProbe& probe, const std::string& concept_id, int layer);

/// One-vs-union relative CAV: n_pos inputs of the concept against n_neg
/// inputs drawn uniformly (without replacement when possible) from the other
/// concepts' positive sets.
Cav relative_cav(const std::string& concept_id,
                 const std::map<std::string, std::vector<SequenceInput>>& concepts,
                 const TransformerModel& model, int layer, int n_pos, int n_neg,
                 std::uint64_t seed, const ProbeOptions& probe_opt = {});

/// Scalar concept sensitivity: the CLS-row gradient of the class logit at the
/// layer, dotted with the CAV.
double directional_derivative(const TransformerModel& model, const SequenceInput& x,
                              int layer, int class_k, const Cav& cav);

/// Attention-weighted per-token sensitivities: head-averaged CLS attention at
/// the layer times the token's logit-gradient component along the CAV. The
/// aggregate is the mean over all tokens.
SensitivityRecord token_directional_derivatives(const TransformerModel& model,
                                                const SequenceInput& x, int layer,
                                                int class_k, const Cav& cav,
                                                const std::string& input_id = "");

/// Fraction of inputs with strictly positive sensitivity (scalar derivative
/// for Tcav, aggregate of the per-token record for TokenTcav).
TcavReport tcav_scores(const TransformerModel& model,
                       const std::vector<SequenceInput>& class_inputs, int layer,
                       int class_k, const Cav& cav, TcavVariant variant);

/// Two-sided one-sample t-test of the per-CAV scores against 0.5. Zero
/// variance collapses to p = 1 when the mean is exactly 0.5 and p = 0
/// otherwise.
SignificanceResult significance_test(const std::vector<double>& scores,
                                     double alpha = 0.05);

}  // namespace attnshap
