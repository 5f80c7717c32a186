#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "attnshap/cav.hpp"
#include "attnshap/model.hpp"
#include "attnshap/shapley.hpp"
#include "attnshap/train.hpp"

namespace attnshap {

// Binary tensor framing: one JSON header line terminated by '\n', then the
// values as little-endian IEEE-754 doubles. Loaders reject header/blob size
// mismatches and truncated blobs.

void save_matrix(const Matrix& m, const std::string& path);
Matrix load_matrix(const std::string& path);

void save_attention_stack(const AttentionStack& s, const std::string& path);
AttentionStack load_attention_stack(const std::string& path);

void save_gradient_stack(const GradientStack& s, const std::string& path);
GradientStack load_gradient_stack(const std::string& path);

// Model checkpoint: config header plus all parameter tensors in tensors()
// order.
void save_checkpoint(const TransformerModel& model, const std::string& path);
TransformerModel load_checkpoint(const std::string& path);

nlohmann::json model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

struct LabeledImage {
  std::string id;
  ImageInput image;
  int label = 0;
};

struct LoadedDataset {
  Dataset sequences;
  std::vector<LabeledImage> images;
  // Sequences grouped by their optional concept tag.
  std::map<std::string, std::vector<SequenceInput>> concepts;
  std::vector<std::string> warnings;
};

/// JSONL dataset: {"id", "token_ids", "label"} records plus optional
/// "concept" and "specials" fields, or image records {"id", "pixels",
/// "height", "width", "channels", "patch", "label"}. Schema violations
/// raise DataError with the line number; vocab_size >= 0 additionally
/// rejects out-of-vocabulary ids.
LoadedDataset load_dataset(const std::string& path, int vocab_size = -1,
                           int mask_id = 1);

void save_dataset(const Dataset& data, const std::string& path);

nlohmann::json attribution_to_json(const AttributionResult& r);
AttributionResult attribution_from_json(const nlohmann::json& j);

void save_cav(const Cav& cav, const std::string& path);
Cav load_cav(const std::string& path);

/// FNV-1a over the canonical (key-sorted) dump; embedded in every artifact.
std::string config_hash_hex(const nlohmann::json& config);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

/// Fixed-precision float formatting shared by all CSV emitters.
std::string format_double(double v);

}  // namespace attnshap
