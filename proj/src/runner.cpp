#include "attnshap/runner.hpp"

#include <algorithm>
#include <iostream>

#include "attnshap/attribute.hpp"
#include "attnshap/cav.hpp"
#include "attnshap/errors.hpp"
#include "attnshap/heatmap.hpp"
#include "attnshap/rng.hpp"
#include "attnshap/serialize.hpp"
#include "attnshap/synth.hpp"
#include "attnshap/threading.hpp"

namespace attnshap {

namespace {

using nlohmann::json;

bool method_needs_sampling(const std::string& m) {
  return m.rfind("Approx.", 0) == 0 || m.rfind("Kernel", 0) == 0 || m == "SHAP";
}

void require(bool cond, const std::string& msg) {
  if (!cond) throw ConfigError(msg);
}

std::string join_path(const std::string& dir, const std::string& name) {
  if (dir.empty()) return name;
  return dir.back() == '/' ? dir + name : dir + "/" + name;
}

TransformerModel load_model_or_fail(const RunConfig& cfg) {
  require(!cfg.model_path.empty(), cfg.subcommand + ": --model is required");
  return load_checkpoint(cfg.model_path);
}

LoadedDataset load_data_or_fail(const RunConfig& cfg, const TransformerModel& model,
                                const std::string& path) {
  require(!path.empty(), cfg.subcommand + ": --dataset is required");
  LoadedDataset data = load_dataset(path, model.config().vocab_size,
                                    model.config().mask_id);
  for (const std::string& w : data.warnings) std::cerr << "warning: " << w << "\n";
  return data;
}

void require_seed_for_sampled(const RunConfig& cfg) {
  for (const std::string& m : cfg.methods) {
    if (method_needs_sampling(m)) {
      require(cfg.seed_set, "sampled method '" + m + "' requires --seed");
    }
  }
}

std::vector<std::string> resolve_methods(const RunConfig& cfg) {
  require(!cfg.methods.empty(), cfg.subcommand + ": --methods is required");
  std::vector<std::string> out;
  for (const std::string& m : cfg.methods) {
    if (m == "all") {
      out = method_ids();
      break;
    }
    if (!is_method_id(m)) {
      throw ConfigError("unknown method id '" + m + "'");
    }
    out.push_back(m);
  }
  return out;
}

int run_train(const RunConfig& cfg) {
  require(!cfg.out_dir.empty(), "train: --out is required");
  ModelConfig mc = cfg.model_config;
  if (cfg.seed_set) mc.seed = cfg.scheme.seed;
  TransformerModel model(mc);
  LoadedDataset data = load_data_or_fail(cfg, model, cfg.dataset_path);
  require(!data.sequences.empty(), "train: dataset holds no token sequences");

  TrainOptions topt = cfg.train_options;
  if (cfg.seed_set) topt.seed = cfg.scheme.seed;
  TrainStats stats = train(model, data.sequences, topt);

  save_checkpoint(model, join_path(cfg.out_dir, "model.ckpt"));
  json log = {{"epoch_loss", stats.epoch_loss},
              {"final_train_accuracy", stats.final_train_accuracy},
              {"n_samples", data.sequences.size()},
              {"config_hash", config_hash_hex(run_config_to_json(cfg))}};
  write_text_file(join_path(cfg.out_dir, "train_log.json"), log.dump(2) + "\n");
  std::cout << "trained on " << data.sequences.size() << " samples, final loss "
            << (stats.epoch_loss.empty() ? 0.0 : stats.epoch_loss.back())
            << ", train accuracy " << stats.final_train_accuracy << "\n";
  return 0;
}

// Matrix-game attribution over externally supplied stacks; no model needed.
int run_attribute_stacks(const RunConfig& cfg) {
  AttentionStack attn = load_attention_stack(cfg.attn_path);
  std::vector<int> players;
  for (std::size_t p = 1; p < attn.seq_len(); ++p) players.push_back(static_cast<int>(p));

  bool have_grads = !cfg.grads_path.empty();
  Matrix contribution;
  if (have_grads) {
    GradientStack grads = load_gradient_stack(cfg.grads_path);
    contribution = contribution_matrix(attn, grads, std::max(0, cfg.class_k)).mat;
  }
  Matrix averaged = average_attention(attn);

  const std::string hash = config_hash_hex(run_config_to_json(cfg));
  std::string out;
  for (const std::string& method : resolve_methods(cfg)) {
    AttributionResult res;
    SamplingScheme mc = cfg.scheme;
    mc.mode = SampleMode::MonteCarlo;
    SamplingScheme kern = cfg.scheme;
    kern.mode = SampleMode::Kernel;
    if (method == "Att") {
      res.player_indices = players;
      for (int p : players) {
        res.scores.push_back(raw_attention_importance(attn, static_cast<std::size_t>(p)));
      }
    } else if (method == "Shapley-Att-CLS") {
      res = closed_form_cls(averaged, players, 0);
    } else if (method == "Shapley-Att-Mutual") {
      res = closed_form_mutual(averaged, players);
    } else if (method == "Shapley-Att-Max-Mutual") {
      res = exact_shapley(
          CharacteristicSpec::matrix_game(CharKind::AttMaxMutual, averaged, players));
    } else if (method == "Approx. Shapley-Att-Max-Mutual") {
      res = sampled_shapley(
          CharacteristicSpec::matrix_game(CharKind::AttMaxMutual, averaged, players), mc);
    } else if (method == "Kernel Shapley-Att-Max-Mutual") {
      res = sampled_shapley(
          CharacteristicSpec::matrix_game(CharKind::AttMaxMutual, averaged, players), kern);
    } else if (have_grads && method == "Grad-SAM") {
      res = grad_sam_scores(contribution, players);
    } else if (have_grads && method == "Shapley-Grad-Att-CLS") {
      res = closed_form_cls(contribution, players, 0);
    } else if (have_grads && method == "Shapley-Grad-Att-Mutual") {
      res = closed_form_mutual(contribution, players);
    } else if (have_grads && method == "Shapley-Grad-Att-Max-Mutual") {
      res = exact_shapley(CharacteristicSpec::matrix_game(CharKind::GradAttMaxMutual,
                                                          contribution, players));
    } else if (have_grads && method == "Approx. Shapley-Grad-Att-Max-Mutual") {
      res = sampled_shapley(CharacteristicSpec::matrix_game(CharKind::GradAttMaxMutual,
                                                            contribution, players),
                            mc);
    } else if (have_grads && method == "Kernel Shapley-Grad-Att-Max-Mutual") {
      res = sampled_shapley(CharacteristicSpec::matrix_game(CharKind::GradAttMaxMutual,
                                                            contribution, players),
                            kern);
    } else {
      throw ConfigError("method '" + method +
                        "' is not available for stack inputs (needs " +
                        (method_needs_sampling(method) || method == "Shapley-Input"
                             ? "a model"
                             : "a gradient stack") +
                        ")");
    }
    res.method = method;
    res.seed = cfg.scheme.seed;
    res.class_k = std::max(0, cfg.class_k);
    json j = attribution_to_json(res);
    j["id"] = "stacks";
    j["config_hash"] = hash;
    out += j.dump();
    out.push_back('\n');
  }
  write_text_file(join_path(cfg.out_dir, "attributions.jsonl"), out);
  return 0;
}

int run_attribute(const RunConfig& cfg) {
  require(!cfg.out_dir.empty(), "attribute: --out is required");
  require_seed_for_sampled(cfg);
  if (!cfg.attn_path.empty()) {
    return run_attribute_stacks(cfg);
  }
  TransformerModel model = load_model_or_fail(cfg);
  LoadedDataset data = load_data_or_fail(cfg, model, cfg.dataset_path);
  std::vector<std::string> methods = resolve_methods(cfg);
  const std::string hash = config_hash_hex(run_config_to_json(cfg));

  struct Row {
    std::string id;
    AttributionResult res;
  };
  std::vector<Row> rows(data.sequences.size() * methods.size());
  parallel_for(rows.size(), [&](std::size_t idx) {
    std::size_t si = idx / methods.size();
    std::size_t mi = idx % methods.size();
    const LabeledSequence& ex = data.sequences[si];
    int k = cfg.class_k >= 0 ? cfg.class_k : model.predict(ex.x).label;
    SamplingScheme per_sample = cfg.scheme;
    per_sample.seed = mix_seed(mix_seed(cfg.scheme.seed, fnv1a64(methods[mi])), si);
    rows[idx] = {ex.id, attribute(methods[mi], model, ex.x, k, per_sample)};
  });

  std::string out;
  for (const Row& row : rows) {
    json j = attribution_to_json(row.res);
    j["id"] = row.id;
    j["config_hash"] = hash;
    out += j.dump();
    out.push_back('\n');
  }
  write_text_file(join_path(cfg.out_dir, "attributions.jsonl"), out);
  std::cout << "wrote " << rows.size() << " attribution records\n";
  return 0;
}

int run_evaluate(const RunConfig& cfg) {
  require(!cfg.out_dir.empty(), "evaluate: --out is required");
  require_seed_for_sampled(cfg);
  TransformerModel model = load_model_or_fail(cfg);
  LoadedDataset data = load_data_or_fail(cfg, model, cfg.dataset_path);
  require(!data.sequences.empty(), "evaluate: dataset holds no token sequences");
  std::vector<std::string> methods = resolve_methods(cfg);

  std::vector<MetricReport> reports =
      evaluate_suite(model, data.sequences, methods, cfg.metrics, cfg.scheme,
                     cfg.scheme.seed, cfg.dataset_path);

  const std::string hash = config_hash_hex(run_config_to_json(cfg));
  std::string csv = "# config_hash=" + hash + "\n";
  csv += "method,f1,comp,comp_ci,suff,suff_ci,n\n";
  json jrows = json::array();
  for (const MetricReport& r : reports) {
    if (r.failed) {
      std::cerr << "method '" << r.method << "' failed: " << r.error << "\n";
      csv += "\"" + r.method + "\",error,,,,," + std::to_string(r.n_samples) + "\n";
    } else {
      csv += "\"" + r.method + "\"," + format_double(r.f1) + "," +
             format_double(r.comp_mean) + "," + format_double(r.comp_ci) + "," +
             format_double(r.suff_mean) + "," + format_double(r.suff_ci) + "," +
             std::to_string(r.n_samples) + "\n";
    }
    jrows.push_back({{"method", r.method},
                     {"dataset", r.dataset_id},
                     {"f1", r.f1},
                     {"comp", r.comp_mean},
                     {"comp_ci", r.comp_ci},
                     {"suff", r.suff_mean},
                     {"suff_ci", r.suff_ci},
                     {"n", r.n_samples},
                     {"failed", r.failed},
                     {"error", r.error}});
  }
  write_text_file(join_path(cfg.out_dir, "report.csv"), csv);
  json jreport = {{"config_hash", hash}, {"rows", jrows}};
  write_text_file(join_path(cfg.out_dir, "report.json"), jreport.dump(2) + "\n");
  std::cout << csv;
  return 0;
}

std::map<std::string, std::vector<SequenceInput>> concepts_or_fail(
    const RunConfig& cfg, const TransformerModel& model) {
  std::string path = cfg.concepts_path.empty() ? cfg.dataset_path : cfg.concepts_path;
  LoadedDataset data = load_data_or_fail(cfg, model, path);
  if (data.concepts.size() < 2) {
    throw DataError(path + ": relative CAVs need records tagged with >= 2 concepts");
  }
  return data.concepts;
}

int run_cav(const RunConfig& cfg) {
  require(!cfg.out_dir.empty(), "cav: --out is required");
  TransformerModel model = load_model_or_fail(cfg);
  auto concepts = concepts_or_fail(cfg, model);

  std::vector<int> layers;
  if (cfg.layer >= 1) {
    layers.push_back(cfg.layer);
  } else {
    for (int l = 1; l <= model.config().layers; ++l) layers.push_back(l);
  }

  const std::string hash = config_hash_hex(run_config_to_json(cfg));
  json index = json::array();
  for (const auto& [concept_id, pool] : concepts) {
    if (!cfg.concept_id.empty() && concept_id != cfg.concept_id) continue;
    for (int layer : layers) {
      for (int i = 0; i < cfg.n_cavs; ++i) {
        std::uint64_t cav_seed = mix_seed(cfg.scheme.seed, static_cast<std::uint64_t>(i));
        Cav cav = relative_cav(concept_id, concepts, model, layer, cfg.n_pos, cfg.n_neg,
                               cav_seed);
        std::string name = concept_id + "_L" + std::to_string(layer) + "_s" +
                           std::to_string(i) + ".cav";
        save_cav(cav, join_path(join_path(cfg.out_dir, "cavs"), name));
        index.push_back({{"concept", concept_id},
                         {"layer", layer},
                         {"seed_index", i},
                         {"file", "cavs/" + name},
                         {"accuracy", cav.accuracy}});
      }
    }
  }
  json out = {{"config_hash", hash}, {"cavs", index}};
  write_text_file(join_path(cfg.out_dir, "cav_index.json"), out.dump(2) + "\n");
  std::cout << "trained " << index.size() << " relative CAVs\n";
  return 0;
}

int run_tcav(const RunConfig& cfg) {
  require(!cfg.out_dir.empty(), "tcav: --out is required");
  require(cfg.class_k >= 0, "tcav: --class is required");
  TransformerModel model = load_model_or_fail(cfg);
  auto concepts = concepts_or_fail(cfg, model);

  // X_k: dataset records labeled with the target class.
  LoadedDataset data = load_data_or_fail(cfg, model, cfg.dataset_path);
  std::vector<SequenceInput> class_inputs;
  for (const LabeledSequence& ex : data.sequences) {
    if (ex.label == cfg.class_k) class_inputs.push_back(ex.x);
  }
  require(!class_inputs.empty(), "tcav: no dataset records of the target class");
  if (static_cast<int>(class_inputs.size()) > cfg.eval_samples) {
    class_inputs.resize(cfg.eval_samples);
  }

  TcavVariant variant = cfg.variant == "TCAV" ? TcavVariant::Tcav : TcavVariant::TokenTcav;
  std::vector<int> layers;
  if (cfg.layer >= 1) {
    layers.push_back(cfg.layer);
  } else {
    for (int l = 1; l <= model.config().layers; ++l) layers.push_back(l);
  }

  const std::string hash = config_hash_hex(run_config_to_json(cfg));
  json jrows = json::array();
  std::string csv = "# config_hash=" + hash + "\n";
  csv += "concept,layer,variant,score,p_value,reject,n_cavs,n_inputs\n";
  for (const auto& [concept_id, pool] : concepts) {
    if (!cfg.concept_id.empty() && concept_id != cfg.concept_id) continue;
    for (int layer : layers) {
      std::vector<double> per_cav(cfg.n_cavs, 0.0);
      std::vector<double> accuracies(cfg.n_cavs, 0.0);
      parallel_for(static_cast<std::size_t>(cfg.n_cavs), [&](std::size_t i) {
        std::uint64_t cav_seed = mix_seed(cfg.scheme.seed, static_cast<std::uint64_t>(i));
        Cav cav = relative_cav(concept_id, concepts, model, layer, cfg.n_pos, cfg.n_neg,
                               cav_seed);
        per_cav[i] =
            tcav_scores(model, class_inputs, layer, cfg.class_k, cav, variant).score;
        accuracies[i] = cav.accuracy;
      });
      double mean = 0.0;
      for (double s : per_cav) mean += s;
      mean /= static_cast<double>(per_cav.size());
      SignificanceResult sig = significance_test(per_cav);

      jrows.push_back({{"concept", concept_id},
                       {"class", cfg.class_k},
                       {"layer", layer},
                       {"variant", cfg.variant},
                       {"score", mean},
                       {"per_cav_scores", per_cav},
                       {"probe_accuracies", accuracies},
                       {"p_value", sig.p_value},
                       {"t_statistic", sig.t_statistic},
                       {"reject", sig.reject},
                       {"n_inputs", class_inputs.size()}});
      csv += "\"" + concept_id + "\"," + std::to_string(layer) + "," + cfg.variant +
             "," + format_double(mean) + "," + format_double(sig.p_value) + "," +
             (sig.reject ? "1" : "0") + "," + std::to_string(cfg.n_cavs) + "," +
             std::to_string(class_inputs.size()) + "\n";
    }
  }
  json jreport = {{"config_hash", hash}, {"rows", jrows}};
  write_text_file(join_path(cfg.out_dir, "tcav_report.json"), jreport.dump(2) + "\n");
  write_text_file(join_path(cfg.out_dir, "tcav_scores.csv"), csv);
  std::cout << csv;
  return 0;
}

int run_heatmap(const RunConfig& cfg) {
  require(!cfg.out_dir.empty(), "heatmap: --out is required");
  TransformerModel model = load_model_or_fail(cfg);
  LoadedDataset data = load_data_or_fail(cfg, model, cfg.dataset_path);
  require(cfg.sample_index >= 0 &&
              cfg.sample_index < static_cast<int>(data.sequences.size()),
          "heatmap: --sample out of range");
  const LabeledSequence& ex = data.sequences[cfg.sample_index];
  int k = cfg.class_k >= 0 ? cfg.class_k : model.predict(ex.x).label;

  std::vector<double> values;
  std::string tag;
  if (!cfg.heatmap_method.empty()) {
    if (method_needs_sampling(cfg.heatmap_method)) {
      require(cfg.seed_set, "sampled method '" + cfg.heatmap_method + "' requires --seed");
    }
    AttributionResult res = attribute(cfg.heatmap_method, model, ex.x, k, cfg.scheme);
    values = res.scores;
    tag = cfg.heatmap_method;
  } else {
    require(!cfg.concept_id.empty(), "heatmap: give --method or --concept");
    auto concepts = concepts_or_fail(cfg, model);
    int layer = cfg.layer >= 1 ? cfg.layer : model.config().layers;
    Cav cav = relative_cav(cfg.concept_id, concepts, model, layer, cfg.n_pos, cfg.n_neg,
                           cfg.scheme.seed);
    SensitivityRecord rec =
        token_directional_derivatives(model, ex.x, layer, k, cav, ex.id);
    // Original-token cells only; specials carry no content to localize.
    for (int p : ex.x.original_indices()) values.push_back(rec.per_token[p]);
    tag = cfg.concept_id + "_L" + std::to_string(layer);
  }

  HeatmapLayout layout;
  if (cfg.grid_rows > 0 || cfg.grid_cols > 0) {
    require(cfg.grid_rows > 0 && cfg.grid_cols > 0, "heatmap: give both grid dims");
    layout.rows = static_cast<std::size_t>(cfg.grid_rows);
    layout.cols = static_cast<std::size_t>(cfg.grid_cols);
  } else {
    layout.rows = 1;
    layout.cols = values.size();
  }
  std::string sanitized = tag;
  for (char& c : sanitized) {
    if (c == ' ' || c == '.' || c == '/') c = '_';
  }
  std::string path = join_path(cfg.out_dir, "heatmap_" + ex.id + "_" + sanitized + ".ppm");
  emit_heatmap(values, layout, path);
  std::cout << "wrote " << path << "\n";
  return 0;
}

int run_synth(const RunConfig& cfg) {
  require(!cfg.out_dir.empty(), "synth: --out is required");
  if (cfg.task == "planted-token") {
    PlantedTokenTask task =
        make_planted_token_task(cfg.n_train, cfg.n_test, cfg.seq_len, cfg.scheme.seed);
    save_dataset(task.train, join_path(cfg.out_dir, "train.jsonl"));
    save_dataset(task.test, join_path(cfg.out_dir, "test.jsonl"));
    json meta = {{"model_config", model_config_to_json(task.config)},
                 {"planted_id", task.planted_id},
                 {"config_hash", config_hash_hex(run_config_to_json(cfg))}};
    write_text_file(join_path(cfg.out_dir, "task.json"), meta.dump(2) + "\n");
  } else if (cfg.task == "planted-concept") {
    PlantedConceptTask task =
        make_planted_concept_task(3, cfg.n_train / 3, cfg.seq_len, cfg.scheme.seed);
    save_dataset(task.train, join_path(cfg.out_dir, "concepts.jsonl"));
    json meta = {{"model_config", model_config_to_json(task.config)},
                 {"n_concepts", task.n_concepts},
                 {"config_hash", config_hash_hex(run_config_to_json(cfg))}};
    write_text_file(join_path(cfg.out_dir, "task.json"), meta.dump(2) + "\n");
  } else {
    throw ConfigError("synth: unknown task '" + cfg.task + "'");
  }
  return 0;
}

}  // namespace

nlohmann::json run_config_to_json(const RunConfig& cfg) {
  return json{{"subcommand", cfg.subcommand},
              {"model", cfg.model_path},
              {"dataset", cfg.dataset_path},
              {"concepts", cfg.concepts_path},
              {"attn", cfg.attn_path},
              {"grads", cfg.grads_path},
              {"out", cfg.out_dir},
              {"methods", cfg.methods},
              {"scheme",
               {{"mode", to_string(cfg.scheme.mode)},
                {"n_samples", cfg.scheme.n_samples},
                {"seed", cfg.scheme.seed},
                {"dedup", cfg.scheme.dedup}}},
              {"metrics",
               {{"b", cfg.metrics.b_percent},
                {"B", cfg.metrics.b_set},
                {"gold_labels", cfg.metrics.use_gold_labels}}},
              {"layer", cfg.layer},
              {"class", cfg.class_k},
              {"model_config", model_config_to_json(cfg.model_config)},
              {"train",
               {{"epochs", cfg.train_options.epochs},
                {"lr", cfg.train_options.lr},
                {"batch_size", cfg.train_options.batch_size},
                {"adam", cfg.train_options.use_adam}}},
              {"n_cavs", cfg.n_cavs},
              {"n_pos", cfg.n_pos},
              {"n_neg", cfg.n_neg},
              {"eval_samples", cfg.eval_samples},
              {"variant", cfg.variant},
              {"concept", cfg.concept_id},
              {"sample_index", cfg.sample_index},
              {"heatmap_method", cfg.heatmap_method},
              {"grid_rows", cfg.grid_rows},
              {"grid_cols", cfg.grid_cols},
              {"task", cfg.task},
              {"n_train", cfg.n_train},
              {"n_test", cfg.n_test},
              {"seq_len", cfg.seq_len}};
}

void apply_config_json(RunConfig& cfg, const nlohmann::json& j) {
  try {
    cfg.subcommand = j.value("subcommand", cfg.subcommand);
    cfg.model_path = j.value("model", cfg.model_path);
    cfg.dataset_path = j.value("dataset", cfg.dataset_path);
    cfg.concepts_path = j.value("concepts", cfg.concepts_path);
    cfg.attn_path = j.value("attn", cfg.attn_path);
    cfg.grads_path = j.value("grads", cfg.grads_path);
    cfg.out_dir = j.value("out", cfg.out_dir);
    if (j.contains("methods")) {
      cfg.methods = j["methods"].get<std::vector<std::string>>();
    }
    if (j.contains("scheme")) {
      const auto& s = j["scheme"];
      if (s.contains("mode")) {
        cfg.scheme.mode = sample_mode_from_string(s["mode"].get<std::string>());
      }
      cfg.scheme.n_samples = s.value("n_samples", cfg.scheme.n_samples);
      if (s.contains("seed")) {
        cfg.scheme.seed = s["seed"].get<std::uint64_t>();
        cfg.seed_set = true;
      }
      cfg.scheme.dedup = s.value("dedup", cfg.scheme.dedup);
    }
    if (j.contains("metrics")) {
      const auto& m = j["metrics"];
      cfg.metrics.b_percent = m.value("b", cfg.metrics.b_percent);
      if (m.contains("B")) cfg.metrics.b_set = m["B"].get<std::vector<double>>();
      cfg.metrics.use_gold_labels = m.value("gold_labels", cfg.metrics.use_gold_labels);
    }
    cfg.layer = j.value("layer", cfg.layer);
    cfg.class_k = j.value("class", cfg.class_k);
    if (j.contains("model_config")) {
      cfg.model_config = model_config_from_json(j["model_config"]);
    }
    if (j.contains("train")) {
      const auto& t = j["train"];
      cfg.train_options.epochs = t.value("epochs", cfg.train_options.epochs);
      cfg.train_options.lr = t.value("lr", cfg.train_options.lr);
      cfg.train_options.batch_size = t.value("batch_size", cfg.train_options.batch_size);
      cfg.train_options.use_adam = t.value("adam", cfg.train_options.use_adam);
    }
    cfg.n_cavs = j.value("n_cavs", cfg.n_cavs);
    cfg.n_pos = j.value("n_pos", cfg.n_pos);
    cfg.n_neg = j.value("n_neg", cfg.n_neg);
    cfg.eval_samples = j.value("eval_samples", cfg.eval_samples);
    cfg.variant = j.value("variant", cfg.variant);
    cfg.concept_id = j.value("concept", cfg.concept_id);
    cfg.sample_index = j.value("sample_index", cfg.sample_index);
    cfg.heatmap_method = j.value("heatmap_method", cfg.heatmap_method);
    cfg.grid_rows = j.value("grid_rows", cfg.grid_rows);
    cfg.grid_cols = j.value("grid_cols", cfg.grid_cols);
    cfg.task = j.value("task", cfg.task);
    cfg.n_train = j.value("n_train", cfg.n_train);
    cfg.n_test = j.value("n_test", cfg.n_test);
    cfg.seq_len = j.value("seq_len", cfg.seq_len);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config file: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("bad config file: ") + e.what());
  }
}

int run(const RunConfig& cfg) {
  if (cfg.subcommand == "train") return run_train(cfg);
  if (cfg.subcommand == "attribute") return run_attribute(cfg);
  if (cfg.subcommand == "evaluate") return run_evaluate(cfg);
  if (cfg.subcommand == "cav") return run_cav(cfg);
  if (cfg.subcommand == "tcav") return run_tcav(cfg);
  if (cfg.subcommand == "heatmap") return run_heatmap(cfg);
  if (cfg.subcommand == "synth") return run_synth(cfg);
  throw ConfigError("unknown subcommand '" + cfg.subcommand + "'");
}

}  // namespace attnshap
