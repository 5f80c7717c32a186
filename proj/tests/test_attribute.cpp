#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>
#include <numeric>

#include "attnshap/attribute.hpp"
#include "attnshap/rng.hpp"

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
  cfg.vocab_size = 16;
  cfg.max_len = 70;
  cfg.n_classes = 2;
  cfg.seed = seed;
  return cfg;
}

SequenceInput random_input(const ModelConfig& cfg, int len, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<int> ids(len);
  ids[0] = cfg.cls_id;
  for (int p = 1; p < len; ++p) {
    ids[p] = 2 + static_cast<int>(rng.next_below(cfg.vocab_size - 2));
  }
  return make_sequence(std::move(ids), cfg.mask_id);
}

}  // namespace

TEST_CASE("the method table has all fourteen entries") {
  CHECK(method_ids().size() == 14);
  CHECK(is_method_id("Att"));
  CHECK(is_method_id("Kernel Shapley-Grad-Att-Max-Mutual"));
  CHECK(is_method_id("Shapley-Input"));
  CHECK(is_method_id("SHAP"));
  CHECK_FALSE(is_method_id("Shapley"));
}

TEST_CASE("unknown methods are rejected") {
  TransformerModel model(small_config());
  SequenceInput x = random_input(model.config(), 5, 3);
  CHECK_THROWS_AS(attribute("Shapley-Attention", model, x, 0, SamplingScheme{}),
                  std::invalid_argument);
  CHECK_THROWS_AS(attribute("Att", model, x, 5, SamplingScheme{}),
                  std::invalid_argument);
}

TEST_CASE("uniform attention makes the attention-based games symmetric") {
  ModelConfig cfg = small_config(5);
  TransformerModel model(cfg);
  // zeroing the query projections flattens every score row
  for (TensorRef& t : model.tensors()) {
    if (t.name.find("w_q") != std::string::npos) {
      std::fill(t.data, t.data + t.size, 0.0);
    }
  }
  SequenceInput x = random_input(cfg, 6, 4);
  AttributionResult res = attribute("Shapley-Att-CLS", model, x, 0, SamplingScheme{});
  for (double s : res.scores) {
    CHECK(s == doctest::Approx(res.scores[0]).epsilon(1e-9));
  }
  AttributionResult att = attribute("Att", model, x, 0, SamplingScheme{});
  for (double s : att.scores) {
    CHECK(s == doctest::Approx(1.0 / 6.0).epsilon(1e-9));
  }
}

TEST_CASE("every method produces one finite score per original token") {
  ModelConfig cfg = small_config(7);
  TransformerModel model(cfg);
  SequenceInput x = random_input(cfg, 6, 9);
  SamplingScheme scheme;
  scheme.n_samples = 30;
  scheme.seed = 11;
  for (const std::string& method : method_ids()) {
    AttributionResult res = attribute(method, model, x, 1, scheme);
    CHECK(res.method == method);
    CHECK(res.scores.size() == 5);
    CHECK(res.player_indices == x.original_indices());
    for (double s : res.scores) CHECK(std::isfinite(s));
  }
}

TEST_CASE("input-masking attributions are efficient") {
  ModelConfig cfg = small_config(13);
  TransformerModel model(cfg);
  SequenceInput x = random_input(cfg, 7, 21);
  const int k = 1;
  AttributionResult res = attribute("Shapley-Input", model, x, k, SamplingScheme{});
  double full = model.predict(x).probs[k];
  double total = std::accumulate(res.scores.begin(), res.scores.end(), 0.0);
  CHECK(total == doctest::Approx(full).epsilon(1e-9));
}

TEST_CASE("SHAP records the fully-masked baseline and explains the gap") {
  ModelConfig cfg = small_config(17);
  TransformerModel model(cfg);
  SequenceInput x = random_input(cfg, 6, 23);
  const int k = 0;
  SamplingScheme scheme;
  scheme.n_samples = 200;
  scheme.seed = 5;
  AttributionResult res = attribute("SHAP", model, x, k, scheme);
  double base = model.predict(mask_tokens(x, {})).probs[k];
  CHECK(res.base_value == doctest::Approx(base));
  // kernel sampling with forced empty/grand keeps the estimate near the gap
  double total = std::accumulate(res.scores.begin(), res.scores.end(), 0.0);
  double gap = model.predict(x).probs[k] - base;
  CHECK(std::fabs(total - gap) < 0.25 * std::max(std::fabs(gap), 0.05));
}

TEST_CASE("sampled variants are deterministic given the seed") {
  ModelConfig cfg = small_config(19);
  TransformerModel model(cfg);
  SequenceInput x = random_input(cfg, 6, 31);
  SamplingScheme scheme;
  scheme.n_samples = 40;
  scheme.seed = 99;
  for (const std::string& method :
       {"Approx. Shapley-Grad-Att-Max-Mutual", "Kernel Shapley-Att-Max-Mutual",
        "SHAP"}) {
    AttributionResult a = attribute(method, model, x, 0, scheme);
    AttributionResult b = attribute(method, model, x, 0, scheme);
    CHECK(a.scores == b.scores);
    CHECK(a.seed == 99);
    CHECK(a.n_samples == 40);
  }
}

TEST_CASE("closed forms drive the exact mutual and cls methods") {
  // Grad methods agree with a direct enumeration of the same game.
  ModelConfig cfg = small_config(23);
  TransformerModel model(cfg);
  SequenceInput x = random_input(cfg, 6, 37);
  const int k = 0;
  ForwardTrace trace = model.forward(x);
  AttentionStack attn = trace.attention_stack();
  GradientStack grads = model.attention_gradients(trace, k);
  Matrix m = contribution_matrix(attn, grads, k).mat;

  AttributionResult mut =
      attribute("Shapley-Grad-Att-Mutual", model, x, k, SamplingScheme{});
  AttributionResult mut_exact = exact_shapley(
      CharacteristicSpec::matrix_game(CharKind::GradAttMutual, m, x.original_indices()));
  for (std::size_t i = 0; i < mut.scores.size(); ++i) {
    CHECK(mut.scores[i] == doctest::Approx(mut_exact.scores[i]).epsilon(1e-9));
  }

  AttributionResult cls =
      attribute("Shapley-Grad-Att-CLS", model, x, k, SamplingScheme{});
  AttributionResult cls_exact = exact_shapley(
      CharacteristicSpec::matrix_game(CharKind::GradAttCls, m, x.original_indices()));
  for (std::size_t i = 0; i < cls.scores.size(); ++i) {
    CHECK(cls.scores[i] == doctest::Approx(cls_exact.scores[i]).epsilon(1e-9));
  }
}

TEST_CASE("kernel max-mutual attribution handles forty players in seconds") {
  ModelConfig cfg = small_config(29);
  TransformerModel model(cfg);
  SequenceInput x = random_input(cfg, 41, 41);
  SamplingScheme scheme;
  scheme.n_samples = 100;
  scheme.seed = 7;
  auto t0 = std::chrono::steady_clock::now();
  AttributionResult res =
      attribute("Kernel Shapley-Grad-Att-Max-Mutual", model, x, 0, scheme);
  auto t1 = std::chrono::steady_clock::now();
  CHECK(res.scores.size() == 40);
  CHECK(std::chrono::duration<double>(t1 - t0).count() < 5.0);
}
