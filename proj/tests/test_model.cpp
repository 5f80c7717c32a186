#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "attnshap/model.hpp"
#include "attnshap/rng.hpp"
#include "attnshap/synth.hpp"
#include "attnshap/train.hpp"

using namespace attnshap;

namespace {

ModelConfig small_config(std::uint64_t seed = 1) {
  ModelConfig cfg;
  cfg.layers = 2;
  cfg.heads = 2;
  cfg.d_model = 12;
  cfg.d_k = 6;
  cfg.d_v = 6;
  cfg.d_ff = 24;
  cfg.vocab_size = 12;
  cfg.max_len = 16;
  cfg.n_classes = 3;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("single-token input attends only to itself") {
  TransformerModel model(small_config());
  ForwardTrace trace = model.forward(make_sequence({0}));
  for (const LayerCache& layer : trace.layers) {
    for (const Matrix& a : layer.attn) {
      CHECK(a.rows() == 1);
      CHECK(a(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("every recorded attention row sums to one") {
  TransformerModel model(small_config(7));
  ForwardTrace trace = model.forward(make_sequence({0, 3, 5, 7, 2, 9}));
  AttentionStack stack = trace.attention_stack();  // construction re-checks rows
  CHECK(stack.seq_len() == 6);
  for (const Matrix& a : stack.mats()) {
    for (std::size_t i = 0; i < a.rows(); ++i) {
      double sum = 0.0;
      for (std::size_t j = 0; j < a.cols(); ++j) sum += a(i, j);
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("forward is deterministic bit for bit") {
  TransformerModel a(small_config(3));
  TransformerModel b(small_config(3));
  SequenceInput x = make_sequence({0, 4, 6, 8});
  ForwardTrace ta = a.forward(x);
  ForwardTrace tb = b.forward(x);
  CHECK(ta.logits == tb.logits);
  CHECK(ta.hidden.back().data() == tb.hidden.back().data());
}

TEST_CASE("swapping identical tokens is a no-op, and with positions disabled the "
          "sequence is permutation-insensitive for distinct fillers too") {
  ModelConfig cfg = small_config(11);
  cfg.sinusoidal_positions = false;
  TransformerModel model(cfg);
  // identical tokens at positions 1 and 3
  ForwardTrace t1 = model.forward(make_sequence({0, 5, 7, 5}));
  ForwardTrace t2 = model.forward(make_sequence({0, 5, 7, 5}));
  CHECK(t1.logits == t2.logits);
  // distinct tokens swapped: CLS output must not change without positions
  ForwardTrace t3 = model.forward(make_sequence({0, 9, 7, 5}));
  ForwardTrace t4 = model.forward(make_sequence({0, 5, 7, 9}));
  for (int c = 0; c < cfg.n_classes; ++c) {
    CHECK(t3.logits[c] == doctest::Approx(t4.logits[c]).epsilon(1e-9));
  }
}

TEST_CASE("token ids outside the vocabulary are rejected") {
  TransformerModel model(small_config());
  CHECK_THROWS_AS(model.forward(make_sequence({0, 12})), std::invalid_argument);
  CHECK_THROWS_AS(model.forward(make_sequence({0, -1})), std::invalid_argument);
}

TEST_CASE("probabilities sum to one and argmax ignores logit shifts") {
  TransformerModel model(small_config(13));
  Prediction p = model.predict(make_sequence({0, 2, 3, 4, 5}));
  CHECK(std::accumulate(p.probs.begin(), p.probs.end(), 0.0) ==
        doctest::Approx(1.0).epsilon(1e-9));
  std::vector<double> logits = {0.3, 1.7, -0.5};
  std::vector<double> shifted = {10.3, 11.7, 9.5};
  auto pa = softmax(logits);
  auto pb = softmax(shifted);
  CHECK((std::max_element(pa.begin(), pa.end()) - pa.begin()) ==
        (std::max_element(pb.begin(), pb.end()) - pb.begin()));
}

TEST_CASE("mask_tokens keeps specials and the keep set") {
  SequenceInput x = make_sequence({0, 4, 5, 6, 7}, 1);
  SequenceInput all = mask_tokens(x, x.original_indices());
  CHECK(all.token_ids == x.token_ids);

  SequenceInput none = mask_tokens(x, {});
  CHECK(none.token_ids == std::vector<int>{0, 1, 1, 1, 1});

  SequenceInput keep2 = mask_tokens(x, {2});
  CHECK(keep2.token_ids == std::vector<int>{0, 1, 5, 1, 1});

  CHECK_THROWS_AS(mask_tokens(x, {0}), std::invalid_argument);   // special position
  CHECK_THROWS_AS(mask_tokens(x, {9}), std::invalid_argument);   // out of range
}

TEST_CASE("extra special positions are protected from masking") {
  SequenceInput x = make_sequence({0, 4, 5, 6}, 1, {2});
  CHECK(x.original_indices() == std::vector<int>{1, 3});
  SequenceInput none = mask_tokens(x, {});
  CHECK(none.token_ids == std::vector<int>{0, 1, 5, 1});
}

TEST_CASE("patchify counts and shapes") {
  ImageInput img;
  img.height = 4;
  img.width = 4;
  img.channels = 1;
  img.patch = 2;
  img.pixels.resize(16);
  std::iota(img.pixels.begin(), img.pixels.end(), 0.0);
  auto patches = patchify(img);
  CHECK(patches.size() == 4);
  for (const auto& p : patches) CHECK(p.size() == 4);
  CHECK(patches[0] == std::vector<double>{0, 1, 4, 5});
  CHECK(patches[3] == std::vector<double>{10, 11, 14, 15});
}

TEST_CASE("single-patch case flattens the whole image") {
  ImageInput img;
  img.height = 3;
  img.width = 3;
  img.channels = 2;
  img.patch = 3;
  img.pixels.resize(18);
  std::iota(img.pixels.begin(), img.pixels.end(), 0.0);
  auto patches = patchify(img);
  CHECK(patches.size() == 1);
  CHECK(patches[0] == img.pixels);
}

TEST_CASE("patchify round-trips losslessly") {
  ImageInput img;
  img.height = 6;
  img.width = 4;
  img.channels = 3;
  img.patch = 2;
  img.pixels.resize(6 * 4 * 3);
  Rng rng(17);
  for (double& v : img.pixels) v = rng.next_double();
  auto patches = patchify(img);
  CHECK(patches.size() == 6);
  for (const auto& p : patches) CHECK(p.size() == 12);
  ImageInput back = unpatchify(patches, 6, 4, 3, 2);
  CHECK(back.pixels == img.pixels);
}

TEST_CASE("patchify rejects non-divisible dimensions") {
  ImageInput img;
  img.height = 5;
  img.width = 4;
  img.channels = 1;
  img.patch = 2;
  img.pixels.resize(20);
  CHECK_THROWS_AS(patchify(img), std::invalid_argument);
}

TEST_CASE("training with zero learning rate leaves parameters untouched") {
  PlantedTokenTask task = make_planted_token_task(20, 0, 6, 21);
  TransformerModel model(task.config);
  std::vector<double> before;
  for (const TensorRef& t : model.tensors()) {
    before.insert(before.end(), t.data, t.data + t.size);
  }
  TrainOptions opt;
  opt.epochs = 3;
  opt.lr = 0.0;
  train(model, task.train, opt);
  std::vector<double> after;
  for (const TensorRef& t : model.tensors()) {
    after.insert(after.end(), t.data, t.data + t.size);
  }
  CHECK(before == after);
}

TEST_CASE("one small step on one example reduces its loss") {
  PlantedTokenTask task = make_planted_token_task(1, 0, 6, 23);
  TransformerModel model(task.config);
  const LabeledSequence& ex = task.train[0];
  double before = cross_entropy(model.predict(ex.x).probs, ex.label);
  TrainOptions opt;
  opt.epochs = 1;
  opt.lr = 1e-3;
  opt.batch_size = 1;
  opt.use_adam = false;
  train(model, {ex}, opt);
  double after = cross_entropy(model.predict(ex.x).probs, ex.label);
  CHECK(after < before);
}

TEST_CASE("identical seeds train to bit-identical parameters") {
  PlantedTokenTask task = make_planted_token_task(24, 0, 6, 29);
  TrainOptions opt;
  opt.epochs = 3;
  opt.lr = 1e-3;
  opt.seed = 77;
  TransformerModel a(task.config);
  TransformerModel b(task.config);
  train(a, task.train, opt);
  train(b, task.train, opt);
  auto ta = a.tensors();
  auto tb = b.tensors();
  for (std::size_t i = 0; i < ta.size(); ++i) {
    for (std::size_t j = 0; j < ta[i].size; ++j) {
      CHECK(ta[i].data[j] == tb[i].data[j]);
    }
  }
}

TEST_CASE("training rejects an empty dataset") {
  TransformerModel model(small_config());
  CHECK_THROWS_AS(train(model, {}, TrainOptions{}), std::invalid_argument);
}

TEST_CASE("loss falls over epochs on the planted-token task") {
  PlantedTokenTask task = make_planted_token_task(60, 0, 8, 31);
  TransformerModel model(task.config);
  TrainOptions opt;
  opt.epochs = 12;
  opt.lr = 2e-3;
  opt.seed = 5;
  TrainStats stats = train(model, task.train, opt);
  CHECK(stats.epoch_loss.back() < stats.epoch_loss.front());
}
