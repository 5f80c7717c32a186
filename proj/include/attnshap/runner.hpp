#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "attnshap/metrics.hpp"
#include "attnshap/shapley.hpp"
#include "attnshap/train.hpp"

namespace attnshap {

/// Everything a subcommand run needs; assembled from the JSON config file and
/// command-line flags (flags win). scheme.seed doubles as the run seed for
/// training, CAV draws and attribution sampling.
struct RunConfig {
  std::string subcommand;

  std::string model_path;
  std::string dataset_path;
  std::string concepts_path;  // defaults to dataset_path
  std::string attn_path;      // externally supplied stacks for `attribute`
  std::string grads_path;
  std::string out_dir;

  std::vector<std::string> methods;
  SamplingScheme scheme;
  bool seed_set = false;
  MetricConfig metrics;
  int layer = -1;    // -1: subcommand default (all layers / last layer)
  int class_k = -1;  // -1: the model's predicted class per sample

  ModelConfig model_config;
  TrainOptions train_options;

  int n_cavs = 50;
  int n_pos = 120;
  int n_neg = 120;
  int eval_samples = 200;
  std::string variant = "T-TCAV";
  std::string concept_id;

  int sample_index = 0;
  std::string heatmap_method;
  int grid_rows = 0;
  int grid_cols = 0;

  std::string task = "planted-token";
  int n_train = 400;
  int n_test = 200;
  int seq_len = 10;
};

/// Canonical JSON view of the config; its hash is embedded in every artifact.
nlohmann::json run_config_to_json(const RunConfig& cfg);

void apply_config_json(RunConfig& cfg, const nlohmann::json& j);

/// Executes one subcommand (train, attribute, evaluate, cav, tcav, heatmap,
/// synth). Throws ConfigError / DataError / NumericError; returns 0 on
/// success. All outputs are deterministic given the seed.
int run(const RunConfig& cfg);

}  // namespace attnshap
