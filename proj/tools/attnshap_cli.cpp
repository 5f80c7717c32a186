#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "attnshap/errors.hpp"
#include "attnshap/runner.hpp"
#include "attnshap/serialize.hpp"

using attnshap::RunConfig;

namespace {

// Registers the shared flags on one subcommand. Values land in plain
// variables first; only flags the user actually passed overwrite the config
// file's settings.
struct FlagSet {
  std::string config_path;
  std::string model, dataset, concepts, attn, grads, out;
  std::string methods_csv;
  std::string mode;
  int n_samples = -1;
  std::uint64_t seed = 0;
  bool dedup = false;
  double b = -1.0;
  std::string b_set_csv;
  int layer = -2;
  int class_k = -2;
  int n_cavs = -1, n_pos = -1, n_neg = -1, eval_samples = -1;
  std::string variant, concept_id, heatmap_method;
  int sample_index = -1, grid_rows = -1, grid_cols = -1;
  std::string task;
  int n_train = -1, n_test = -1, seq_len = -1;
  int epochs = -1, batch_size = -1;
  double lr = -1.0;

  CLI::App* app = nullptr;
};

void add_flags(CLI::App* cmd, FlagSet& f) {
  f.app = cmd;
  cmd->add_option("--config", f.config_path, "JSON config file; flags override it");
  cmd->add_option("--model", f.model, "model checkpoint path");
  cmd->add_option("--dataset", f.dataset, "JSONL dataset path");
  cmd->add_option("--concepts", f.concepts, "JSONL with concept-tagged records");
  cmd->add_option("--attn", f.attn, "attention stack dump (decoupled attribution)");
  cmd->add_option("--grads", f.grads, "gradient stack dump");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--methods", f.methods_csv,
                  "comma-separated method ids, or 'all'");
  cmd->add_option("--mode", f.mode, "sampling mode: exact|montecarlo|kernel");
  cmd->add_option("--samples", f.n_samples, "sampled coalitions per input");
  cmd->add_option("--seed", f.seed, "run seed (mandatory for sampled modes)");
  cmd->add_flag("--dedup", f.dedup, "deduplicate sampled coalitions");
  cmd->add_option("--b", f.b, "keep fraction (percent) for the F1 metric");
  cmd->add_option("--B", f.b_set_csv, "comma-separated percent set for comp/suff");
  cmd->add_option("--layer", f.layer, "layer selection (default: all or last)");
  cmd->add_option("--class", f.class_k, "class selection (default: predicted)");
  cmd->add_option("--n-cavs", f.n_cavs, "CAVs per concept/layer");
  cmd->add_option("--n-pos", f.n_pos, "positive samples per CAV");
  cmd->add_option("--n-neg", f.n_neg, "negative samples per CAV");
  cmd->add_option("--eval-samples", f.eval_samples, "inputs per TCAV score");
  cmd->add_option("--variant", f.variant, "TCAV or T-TCAV");
  cmd->add_option("--concept", f.concept_id, "concept id");
  cmd->add_option("--method", f.heatmap_method, "attribution method for heatmaps");
  cmd->add_option("--sample", f.sample_index, "dataset record index for heatmaps");
  cmd->add_option("--grid-rows", f.grid_rows, "heatmap grid rows");
  cmd->add_option("--grid-cols", f.grid_cols, "heatmap grid cols");
  cmd->add_option("--task", f.task, "synth task: planted-token|planted-concept");
  cmd->add_option("--n-train", f.n_train, "synth training samples");
  cmd->add_option("--n-test", f.n_test, "synth test samples");
  cmd->add_option("--seq-len", f.seq_len, "synth sequence length");
  cmd->add_option("--epochs", f.epochs, "training epochs");
  cmd->add_option("--batch-size", f.batch_size, "training batch size");
  cmd->add_option("--lr", f.lr, "learning rate");
}

std::vector<std::string> split_csv(const std::string& csv) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : csv) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

RunConfig build_config(const FlagSet& f, const std::string& subcommand) {
  RunConfig cfg;
  cfg.subcommand = subcommand;
  if (!f.config_path.empty()) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(attnshap::read_text_file(f.config_path));
    } catch (const nlohmann::json::exception& e) {
      throw attnshap::ConfigError(f.config_path + ": " + e.what());
    }
    attnshap::apply_config_json(cfg, j);
    cfg.subcommand = subcommand;  // the CLI subcommand wins
  }
  auto passed = [&](const std::string& flag) { return f.app->count(flag) > 0; };

  if (passed("--model")) cfg.model_path = f.model;
  if (passed("--dataset")) cfg.dataset_path = f.dataset;
  if (passed("--concepts")) cfg.concepts_path = f.concepts;
  if (passed("--attn")) cfg.attn_path = f.attn;
  if (passed("--grads")) cfg.grads_path = f.grads;
  if (passed("--out")) cfg.out_dir = f.out;
  if (passed("--methods")) cfg.methods = split_csv(f.methods_csv);
  if (passed("--mode")) cfg.scheme.mode = attnshap::sample_mode_from_string(f.mode);
  if (passed("--samples")) cfg.scheme.n_samples = f.n_samples;
  if (passed("--seed")) {
    cfg.scheme.seed = f.seed;
    cfg.seed_set = true;
  }
  if (passed("--dedup")) cfg.scheme.dedup = f.dedup;
  if (passed("--b")) cfg.metrics.b_percent = f.b;
  if (passed("--B")) {
    cfg.metrics.b_set.clear();
    for (const std::string& s : split_csv(f.b_set_csv)) {
      cfg.metrics.b_set.push_back(std::stod(s));
    }
  }
  if (passed("--layer")) cfg.layer = f.layer;
  if (passed("--class")) cfg.class_k = f.class_k;
  if (passed("--n-cavs")) cfg.n_cavs = f.n_cavs;
  if (passed("--n-pos")) cfg.n_pos = f.n_pos;
  if (passed("--n-neg")) cfg.n_neg = f.n_neg;
  if (passed("--eval-samples")) cfg.eval_samples = f.eval_samples;
  if (passed("--variant")) cfg.variant = f.variant;
  if (passed("--concept")) cfg.concept_id = f.concept_id;
  if (passed("--method")) cfg.heatmap_method = f.heatmap_method;
  if (passed("--sample")) cfg.sample_index = f.sample_index;
  if (passed("--grid-rows")) cfg.grid_rows = f.grid_rows;
  if (passed("--grid-cols")) cfg.grid_cols = f.grid_cols;
  if (passed("--task")) cfg.task = f.task;
  if (passed("--n-train")) cfg.n_train = f.n_train;
  if (passed("--n-test")) cfg.n_test = f.n_test;
  if (passed("--seq-len")) cfg.seq_len = f.seq_len;
  if (passed("--epochs")) cfg.train_options.epochs = f.epochs;
  if (passed("--batch-size")) cfg.train_options.batch_size = f.batch_size;
  if (passed("--lr")) cfg.train_options.lr = f.lr;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"attention-based attribution and concept-sensitivity toolkit"};
  app.require_subcommand(1);

  const std::vector<std::string> subcommands = {"train",   "attribute", "evaluate",
                                                "cav",     "tcav",      "heatmap",
                                                "synth"};
  std::vector<FlagSet> flags(subcommands.size());
  for (std::size_t i = 0; i < subcommands.size(); ++i) {
    add_flags(app.add_subcommand(subcommands[i]), flags[i]);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    for (std::size_t i = 0; i < subcommands.size(); ++i) {
      if (flags[i].app->parsed()) {
        return attnshap::run(build_config(flags[i], subcommands[i]));
      }
    }
    std::cerr << "error: no subcommand given\n";
    return 2;
  } catch (const attnshap::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const attnshap::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const attnshap::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}
