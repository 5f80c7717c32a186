#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "attnshap/model.hpp"

namespace attnshap {

struct LabeledSequence {
  std::string id;
  SequenceInput x;
  int label = 0;
  std::string concept_id;  // optional concept tag
};

using Dataset = std::vector<LabeledSequence>;

struct TrainOptions {
  int epochs = 50;
  double lr = 1e-3;
  int batch_size = 16;
  std::uint64_t seed = 0;
  bool use_adam = true;  // plain SGD otherwise
};

struct TrainStats {
  std::vector<double> epoch_loss;  // mean cross-entropy per epoch
  double final_train_accuracy = 0.0;
};

double cross_entropy(const std::vector<double>& probs, int label);

/// Minibatch gradient descent on mean cross-entropy. Deterministic given
/// options.seed (identical seeds produce bit-identical parameters).
TrainStats train(TransformerModel& model, const Dataset& data, const TrainOptions& opt);

double accuracy(const TransformerModel& model, const Dataset& data);

}  // namespace attnshap
