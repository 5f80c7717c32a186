#include "attnshap/synth.hpp"

#include <algorithm>
#include <stdexcept>

#include "attnshap/rng.hpp"

namespace attnshap {

namespace {

// Filler ids live above the planted/concept ids.
SequenceInput random_sequence(const ModelConfig& cfg, int seq_len, int filler_min,
                              Rng& rng) {
  std::vector<int> ids(seq_len);
  ids[0] = cfg.cls_id;
  const int span = cfg.vocab_size - filler_min;
  for (int p = 1; p < seq_len; ++p) {
    ids[p] = filler_min + static_cast<int>(rng.next_below(span));
  }
  return make_sequence(std::move(ids), cfg.mask_id);
}

}  // namespace

int PlantedTokenTask::planted_position(const LabeledSequence& ex, int planted_id) {
  for (int p : ex.x.original_indices()) {
    if (ex.x.token_ids[p] == planted_id) return p;
  }
  return -1;
}

PlantedTokenTask make_planted_token_task(int n_train, int n_test, int seq_len,
                                         std::uint64_t seed) {
  if (seq_len < 3) {
    throw std::invalid_argument("make_planted_token_task: sequence too short");
  }
  PlantedTokenTask task;
  task.config.vocab_size = 16;
  task.config.max_len = std::max(task.config.max_len, seq_len);
  task.config.n_classes = 2;
  task.config.seed = mix_seed(seed, fnv1a64("planted-token.model"));
  task.planted_id = 2;
  const int filler_min = 3;

  Rng rng(mix_seed(seed, fnv1a64("planted-token.data")));
  auto gen = [&](int count, const std::string& prefix) {
    Dataset data;
    for (int i = 0; i < count; ++i) {
      SequenceInput x = random_sequence(task.config, seq_len, filler_min, rng);
      int label = static_cast<int>(rng.next_bool());
      if (label == 1) {
        auto originals = x.original_indices();
        x.token_ids[originals[rng.next_below(originals.size())]] = task.planted_id;
      }
      data.push_back({prefix + std::to_string(i), std::move(x), label, ""});
    }
    return data;
  };
  task.train = gen(n_train, "train");
  task.test = gen(n_test, "test");
  return task;
}

std::vector<SequenceInput> PlantedConceptTask::sample_class_inputs(
    int class_k, int count, std::uint64_t seed) const {
  if (class_k < 0 || class_k >= n_concepts) {
    throw std::invalid_argument("sample_class_inputs: class out of range");
  }
  Rng rng(mix_seed(seed, fnv1a64("planted-concept.class" + std::to_string(class_k))));
  const int seq_len = static_cast<int>(concepts.begin()->second.front().token_ids.size());
  const int filler_min = 2 + n_concepts;
  std::vector<SequenceInput> out;
  for (int i = 0; i < count; ++i) {
    SequenceInput x = random_sequence(config, seq_len, filler_min, rng);
    auto originals = x.original_indices();
    x.token_ids[originals[rng.next_below(originals.size())]] = concept_token(class_k);
    out.push_back(std::move(x));
  }
  return out;
}

std::map<std::string, std::vector<SequenceInput>> PlantedConceptTask::random_concept_pools(
    int per_pool, std::uint64_t seed) const {
  Rng rng(mix_seed(seed, fnv1a64("planted-concept.randompools")));
  const int seq_len = static_cast<int>(concepts.begin()->second.front().token_ids.size());
  const int filler_min = 2 + n_concepts;
  std::map<std::string, std::vector<SequenceInput>> pools;
  for (const char* name : {"random-a", "random-b"}) {
    std::vector<SequenceInput> pool;
    for (int i = 0; i < per_pool; ++i) {
      SequenceInput x = random_sequence(config, seq_len, filler_min, rng);
      // Same generative process as the labeled data: one concept token of a
      // uniformly random concept.
      auto originals = x.original_indices();
      int c = static_cast<int>(rng.next_below(n_concepts));
      x.token_ids[originals[rng.next_below(originals.size())]] = concept_token(c);
      pool.push_back(std::move(x));
    }
    pools[name] = std::move(pool);
  }
  return pools;
}

PlantedConceptTask make_planted_concept_task(int n_concepts, int per_class,
                                             int seq_len, std::uint64_t seed) {
  if (n_concepts < 2) {
    throw std::invalid_argument("make_planted_concept_task: needs >= 2 concepts");
  }
  if (seq_len < 3) {
    throw std::invalid_argument("make_planted_concept_task: sequence too short");
  }
  PlantedConceptTask task;
  task.n_concepts = n_concepts;
  task.config.vocab_size = std::max(16, 2 + n_concepts + 8);
  task.config.max_len = std::max(task.config.max_len, seq_len);
  task.config.n_classes = n_concepts;
  task.config.seed = mix_seed(seed, fnv1a64("planted-concept.model"));
  const int filler_min = 2 + n_concepts;

  Rng rng(mix_seed(seed, fnv1a64("planted-concept.data")));
  for (int c = 0; c < n_concepts; ++c) {
    for (int i = 0; i < per_class; ++i) {
      SequenceInput x = random_sequence(task.config, seq_len, filler_min, rng);
      auto originals = x.original_indices();
      x.token_ids[originals[rng.next_below(originals.size())]] = task.concept_token(c);
      LabeledSequence ex;
      ex.id = task.concept_name(c) + "-" + std::to_string(i);
      ex.x = x;
      ex.label = c;
      ex.concept_id = task.concept_name(c);
      task.concepts[ex.concept_id].push_back(x);
      task.train.push_back(std::move(ex));
    }
  }
  return task;
}

}  // namespace attnshap
