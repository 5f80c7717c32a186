#pragma once

#include <string>
#include <vector>

#include "attnshap/shapley.hpp"

namespace attnshap {

/// The fourteen attribution method identifiers accepted by attribute().
const std::vector<std::string>& method_ids();
bool is_method_id(const std::string& name);

/// Computes per-token importance scores for one input and class.
///
/// Methods split into three families: plain attention ("Att" and the
/// Shapley-Att-* games over the averaged attention matrix), gradient-weighted
/// attention ("Grad-SAM" and the Shapley-Grad-Att-* games over the
/// contribution matrix), and model-output games ("Shapley-Input", "SHAP").
/// "Approx." variants draw uniform coalitions and "Kernel" variants use the
/// kernel size distribution; both read n_samples/seed from the scheme. SHAP
/// uses kernel sampling over the masking game with the fully-masked output as
/// its base value.
AttributionResult attribute(const std::string& method, const TransformerModel& model,
                            const SequenceInput& x, int class_k,
                            const SamplingScheme& scheme,
                            int exact_limit = kDefaultExactLimit);

}  // namespace attnshap
