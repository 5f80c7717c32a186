#include "attnshap/attribute.hpp"

#include <algorithm>
#include <chrono>
#include <stdexcept>

namespace attnshap {

namespace {

const std::vector<std::string> kMethodIds = {
    "Att",
    "Shapley-Att-CLS",
    "Shapley-Att-Mutual",
    "Shapley-Att-Max-Mutual",
    "Approx. Shapley-Att-Max-Mutual",
    "Kernel Shapley-Att-Max-Mutual",
    "Grad-SAM",
    "Shapley-Grad-Att-CLS",
    "Shapley-Grad-Att-Mutual",
    "Shapley-Grad-Att-Max-Mutual",
    "Approx. Shapley-Grad-Att-Max-Mutual",
    "Kernel Shapley-Grad-Att-Max-Mutual",
    "Shapley-Input",
    "SHAP",
};

}  // namespace

const std::vector<std::string>& method_ids() { return kMethodIds; }

bool is_method_id(const std::string& name) {
  return std::find(kMethodIds.begin(), kMethodIds.end(), name) != kMethodIds.end();
}

AttributionResult attribute(const std::string& method, const TransformerModel& model,
                            const SequenceInput& x, int class_k,
                            const SamplingScheme& scheme, int exact_limit) {
  if (!is_method_id(method)) {
    throw std::invalid_argument("attribute: unknown method id '" + method + "'");
  }
  if (class_k < 0 || class_k >= model.config().n_classes) {
    throw std::invalid_argument("attribute: class out of range");
  }
  const auto t0 = std::chrono::steady_clock::now();

  ForwardTrace trace = model.forward(x);
  AttentionStack attn = trace.attention_stack();
  std::vector<int> players = x.original_indices();
  const int cls = 0;

  auto contribution = [&]() {
    GradientStack grads = model.attention_gradients(trace, class_k);
    return contribution_matrix(attn, grads, class_k).mat;
  };

  SamplingScheme mc = scheme;
  mc.mode = SampleMode::MonteCarlo;
  SamplingScheme kern = scheme;
  kern.mode = SampleMode::Kernel;

  AttributionResult res;
  if (method == "Att") {
    for (int p : players) {
      res.scores.push_back(raw_attention_importance(attn, static_cast<std::size_t>(p)));
    }
    res.player_indices = players;
  } else if (method == "Shapley-Att-CLS") {
    res = closed_form_cls(average_attention(attn), players, cls);
  } else if (method == "Shapley-Att-Mutual") {
    res = closed_form_mutual(average_attention(attn), players);
  } else if (method == "Shapley-Att-Max-Mutual") {
    res = exact_shapley(CharacteristicSpec::matrix_game(
                            CharKind::AttMaxMutual, average_attention(attn), players, cls),
                        exact_limit);
  } else if (method == "Approx. Shapley-Att-Max-Mutual") {
    res = sampled_shapley(CharacteristicSpec::matrix_game(
                              CharKind::AttMaxMutual, average_attention(attn), players, cls),
                          mc);
  } else if (method == "Kernel Shapley-Att-Max-Mutual") {
    res = sampled_shapley(CharacteristicSpec::matrix_game(
                              CharKind::AttMaxMutual, average_attention(attn), players, cls),
                          kern);
  } else if (method == "Grad-SAM") {
    res = grad_sam_scores(contribution(), players);
  } else if (method == "Shapley-Grad-Att-CLS") {
    res = closed_form_cls(contribution(), players, cls);
  } else if (method == "Shapley-Grad-Att-Mutual") {
    res = closed_form_mutual(contribution(), players);
  } else if (method == "Shapley-Grad-Att-Max-Mutual") {
    res = exact_shapley(CharacteristicSpec::matrix_game(CharKind::GradAttMaxMutual,
                                                        contribution(), players, cls),
                        exact_limit);
  } else if (method == "Approx. Shapley-Grad-Att-Max-Mutual") {
    res = sampled_shapley(CharacteristicSpec::matrix_game(CharKind::GradAttMaxMutual,
                                                          contribution(), players, cls),
                          mc);
  } else if (method == "Kernel Shapley-Grad-Att-Max-Mutual") {
    res = sampled_shapley(CharacteristicSpec::matrix_game(CharKind::GradAttMaxMutual,
                                                          contribution(), players, cls),
                          kern);
  } else if (method == "Shapley-Input") {
    res = exact_shapley(CharacteristicSpec::masking_game(model, x, class_k), exact_limit);
  } else {  // SHAP
    SequenceInput fully_masked = mask_tokens(x, {});
    double base = model.predict(fully_masked).probs[class_k];
    res = sampled_shapley(
        CharacteristicSpec::masking_game(model, x, class_k, base), kern);
    res.base_value = base;
  }

  res.method = method;
  res.class_k = class_k;
  res.seed = scheme.seed;
  if (res.n_samples == 0 &&
      (method.rfind("Approx.", 0) == 0 || method.rfind("Kernel", 0) == 0 ||
       method == "SHAP")) {
    res.n_samples = scheme.n_samples;
  }
  const auto t1 = std::chrono::steady_clock::now();
  res.wall_time_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  return res;
}

}  // namespace attnshap
