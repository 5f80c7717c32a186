#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "attnshap/model.hpp"
#include "attnshap/train.hpp"

namespace attnshap {

/// Binary task with ground-truth relevance: the label says whether the
/// planted token id occurs anywhere in the sequence. Half the samples carry
/// it at a uniformly random original position.
struct PlantedTokenTask {
  ModelConfig config;
  Dataset train;
  Dataset test;
  int planted_id = 2;

  /// Position of the planted token in a sample, or -1.
  static int planted_position(const LabeledSequence& ex, int planted_id);
};

PlantedTokenTask make_planted_token_task(int n_train, int n_test, int seq_len,
                                         std::uint64_t seed);

/// Multiclass task where class c is determined by the presence of concept
/// token 2+c. Positive concept pools group the inputs by their concept.
struct PlantedConceptTask {
  ModelConfig config;
  Dataset train;
  std::map<std::string, std::vector<SequenceInput>> concepts;
  int n_concepts = 3;

  std::string concept_name(int c) const { return "concept" + std::to_string(c); }
  int concept_token(int c) const { return 2 + c; }

  /// Fresh inputs of one class, outside the training set.
  std::vector<SequenceInput> sample_class_inputs(int class_k, int count,
                                                 std::uint64_t seed) const;

  /// Two pools of concept-agnostic inputs; probing one against the other
  /// yields a direction that carries no planted signal.
  std::map<std::string, std::vector<SequenceInput>> random_concept_pools(
      int per_pool, std::uint64_t seed) const;
};

PlantedConceptTask make_planted_concept_task(int n_concepts, int per_class,
                                             int seq_len, std::uint64_t seed);

}  // namespace attnshap
