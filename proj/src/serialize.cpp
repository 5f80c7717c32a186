#include "attnshap/serialize.hpp"

#include <bit>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "attnshap/errors.hpp"
#include "attnshap/rng.hpp"

namespace attnshap {

namespace {

using nlohmann::json;

void append_doubles_le(std::string& out, const double* data, std::size_t count) {
  out.reserve(out.size() + count * 8);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(data[i]);
    for (int b = 0; b < 8; ++b) {
      out.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
    }
  }
}

std::vector<double> parse_doubles_le(const std::string& blob) {
  if (blob.size() % 8 != 0) {
    throw DataError("binary blob length is not a multiple of 8");
  }
  std::vector<double> out(blob.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(blob[i * 8 + b]))
              << (8 * b);
    }
    out[i] = std::bit_cast<double>(bits);
  }
  return out;
}

void write_framed(const std::string& path, const json& header,
                  const double* data, std::size_t count) {
  std::string out = header.dump();
  out.push_back('\n');
  append_doubles_le(out, data, count);
  write_text_file(path, out);
}

struct Framed {
  json header;
  std::vector<double> values;
};

Framed read_framed(const std::string& path, std::size_t expected_count) {
  std::string content = read_text_file(path);
  std::size_t nl = content.find('\n');
  if (nl == std::string::npos) {
    throw DataError(path + ": missing header line");
  }
  Framed f;
  try {
    f.header = json::parse(content.substr(0, nl));
  } catch (const json::exception& e) {
    throw DataError(path + ": bad header: " + e.what());
  }
  std::string blob = content.substr(nl + 1);
  if (blob.size() != expected_count * 8) {
    throw DataError(path + ": blob holds " + std::to_string(blob.size() / 8) +
                    " values, header expects " + std::to_string(expected_count) +
                    (blob.size() < expected_count * 8 ? " (truncated blob)" : ""));
  }
  f.values = parse_doubles_le(blob);
  return f;
}

json read_header_only(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path + ": cannot open");
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": missing header line");
  try {
    return json::parse(line);
  } catch (const json::exception& e) {
    throw DataError(path + ": bad header: " + e.what());
  }
}

std::vector<Matrix> stack_from_values(const std::vector<double>& values,
                                      std::size_t layers, std::size_t heads,
                                      std::size_t n) {
  std::vector<Matrix> mats;
  mats.reserve(layers * heads);
  std::size_t off = 0;
  for (std::size_t m = 0; m < layers * heads; ++m) {
    Matrix mat(n, n);
    std::copy(values.begin() + off, values.begin() + off + n * n, mat.data().begin());
    off += n * n;
    mats.push_back(std::move(mat));
  }
  return mats;
}

void save_stack(const std::vector<Matrix>& mats, std::size_t layers, std::size_t heads,
                std::size_t n, const char* kind, const std::string& path) {
  json header = {{"kind", kind}, {"L", layers}, {"H", heads}, {"N", n}};
  std::vector<double> flat;
  flat.reserve(layers * heads * n * n);
  for (const Matrix& m : mats) {
    flat.insert(flat.end(), m.data().begin(), m.data().end());
  }
  write_framed(path, header, flat.data(), flat.size());
}

}  // namespace

void save_matrix(const Matrix& m, const std::string& path) {
  json header = {{"kind", "matrix"}, {"rows", m.rows()}, {"cols", m.cols()}};
  write_framed(path, header, m.data().data(), m.data().size());
}

Matrix load_matrix(const std::string& path) {
  json header = read_header_only(path);
  if (header.value("kind", "") != "matrix") {
    throw DataError(path + ": not a matrix dump");
  }
  std::size_t rows = header.at("rows").get<std::size_t>();
  std::size_t cols = header.at("cols").get<std::size_t>();
  Framed f = read_framed(path, rows * cols);
  Matrix m(rows, cols);
  std::copy(f.values.begin(), f.values.end(), m.data().begin());
  return m;
}

void save_attention_stack(const AttentionStack& s, const std::string& path) {
  save_stack(s.mats(), s.layers(), s.heads(), s.seq_len(), "attention", path);
}

AttentionStack load_attention_stack(const std::string& path) {
  json header = read_header_only(path);
  if (header.value("kind", "") != "attention") {
    throw DataError(path + ": not an attention stack dump");
  }
  std::size_t layers = header.at("L").get<std::size_t>();
  std::size_t heads = header.at("H").get<std::size_t>();
  std::size_t n = header.at("N").get<std::size_t>();
  Framed f = read_framed(path, layers * heads * n * n);
  try {
    return AttentionStack(layers, heads, n, stack_from_values(f.values, layers, heads, n));
  } catch (const std::invalid_argument& e) {
    throw DataError(path + ": " + e.what());
  }
}

void save_gradient_stack(const GradientStack& s, const std::string& path) {
  save_stack(s.mats(), s.layers(), s.heads(), s.seq_len(), "gradient", path);
}

GradientStack load_gradient_stack(const std::string& path) {
  json header = read_header_only(path);
  if (header.value("kind", "") != "gradient") {
    throw DataError(path + ": not a gradient stack dump");
  }
  std::size_t layers = header.at("L").get<std::size_t>();
  std::size_t heads = header.at("H").get<std::size_t>();
  std::size_t n = header.at("N").get<std::size_t>();
  Framed f = read_framed(path, layers * heads * n * n);
  try {
    return GradientStack(layers, heads, n, stack_from_values(f.values, layers, heads, n));
  } catch (const std::invalid_argument& e) {
    throw DataError(path + ": " + e.what());
  }
}

nlohmann::json model_config_to_json(const ModelConfig& cfg) {
  return json{{"layers", cfg.layers},
              {"heads", cfg.heads},
              {"d_model", cfg.d_model},
              {"d_k", cfg.d_k},
              {"d_v", cfg.d_v},
              {"d_ff", cfg.d_ff},
              {"vocab_size", cfg.vocab_size},
              {"max_len", cfg.max_len},
              {"n_classes", cfg.n_classes},
              {"seed", cfg.seed},
              {"sinusoidal_positions", cfg.sinusoidal_positions},
              {"pre_norm", cfg.pre_norm},
              {"cls_id", cfg.cls_id},
              {"mask_id", cfg.mask_id}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig cfg;
  cfg.layers = j.value("layers", cfg.layers);
  cfg.heads = j.value("heads", cfg.heads);
  cfg.d_model = j.value("d_model", cfg.d_model);
  cfg.d_k = j.value("d_k", cfg.d_k);
  cfg.d_v = j.value("d_v", cfg.d_v);
  cfg.d_ff = j.value("d_ff", cfg.d_ff);
  cfg.vocab_size = j.value("vocab_size", cfg.vocab_size);
  cfg.max_len = j.value("max_len", cfg.max_len);
  cfg.n_classes = j.value("n_classes", cfg.n_classes);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.sinusoidal_positions = j.value("sinusoidal_positions", cfg.sinusoidal_positions);
  cfg.pre_norm = j.value("pre_norm", cfg.pre_norm);
  cfg.cls_id = j.value("cls_id", cfg.cls_id);
  cfg.mask_id = j.value("mask_id", cfg.mask_id);
  cfg.validate();
  return cfg;
}

void save_checkpoint(const TransformerModel& model, const std::string& path) {
  auto refs = model.tensors();
  std::size_t total = 0;
  json names = json::array();
  for (const TensorRef& t : refs) {
    total += t.size;
    names.push_back(t.name);
  }
  json header = {{"kind", "checkpoint"},
                 {"config", model_config_to_json(model.config())},
                 {"param_count", total},
                 {"tensor_order", names}};
  std::string out = header.dump();
  out.push_back('\n');
  for (const TensorRef& t : refs) append_doubles_le(out, t.data, t.size);
  write_text_file(path, out);
}

TransformerModel load_checkpoint(const std::string& path) {
  json header = read_header_only(path);
  if (header.value("kind", "") != "checkpoint") {
    throw DataError(path + ": not a model checkpoint");
  }
  ModelConfig cfg;
  try {
    cfg = model_config_from_json(header.at("config"));
  } catch (const std::invalid_argument& e) {
    throw DataError(path + ": " + e.what());
  }
  TransformerModel model(cfg);
  std::size_t total = header.at("param_count").get<std::size_t>();
  if (total != model.parameter_count()) {
    throw DataError(path + ": parameter count does not match config");
  }
  Framed f = read_framed(path, total);
  std::size_t off = 0;
  for (TensorRef& t : model.tensors()) {
    std::copy(f.values.begin() + off, f.values.begin() + off + t.size, t.data);
    off += t.size;
  }
  return model;
}

LoadedDataset load_dataset(const std::string& path, int vocab_size, int mask_id) {
  std::ifstream in(path);
  if (!in) throw DataError(path + ": cannot open");
  LoadedDataset out;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& msg) -> void {
    throw DataError(path + ":" + std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      fail(std::string("invalid JSON: ") + e.what());
    }
    if (!rec.is_object()) fail("record is not an object");

    std::string id = rec.contains("id")
                         ? (rec["id"].is_string() ? rec["id"].get<std::string>()
                                                  : rec["id"].dump())
                         : ("line" + std::to_string(line_no));

    if (rec.contains("pixels")) {
      for (const char* key : {"height", "width", "channels", "patch", "label"}) {
        if (!rec.contains(key)) fail(std::string("image record missing '") + key + "'");
      }
      LabeledImage img;
      img.id = id;
      img.label = rec["label"].get<int>();
      img.image.height = rec["height"].get<std::size_t>();
      img.image.width = rec["width"].get<std::size_t>();
      img.image.channels = rec["channels"].get<std::size_t>();
      img.image.patch = rec["patch"].get<std::size_t>();
      if (!rec["pixels"].is_array()) fail("'pixels' must be an array");
      img.image.pixels = rec["pixels"].get<std::vector<double>>();
      try {
        img.image.validate();
      } catch (const std::invalid_argument& e) {
        fail(e.what());
      }
      out.images.push_back(std::move(img));
      continue;
    }

    if (!rec.contains("token_ids") || !rec["token_ids"].is_array()) {
      fail("missing 'token_ids' array");
    }
    if (!rec.contains("label") || !rec["label"].is_number_integer()) {
      fail("missing integer 'label'");
    }
    std::vector<int> ids;
    for (const auto& v : rec["token_ids"]) {
      if (!v.is_number_integer()) fail("token id is not an integer");
      int t = v.get<int>();
      if (t < 0) fail("negative token id");
      if (vocab_size >= 0 && t >= vocab_size) {
        fail("token id " + std::to_string(t) + " >= vocab_size " +
             std::to_string(vocab_size));
      }
      ids.push_back(t);
    }
    if (ids.empty()) fail("empty token sequence");
    std::vector<int> specials;
    if (rec.contains("specials")) {
      for (const auto& v : rec["specials"]) specials.push_back(v.get<int>());
    }
    LabeledSequence ex;
    ex.id = id;
    ex.label = rec["label"].get<int>();
    try {
      ex.x = make_sequence(std::move(ids), mask_id, std::move(specials));
    } catch (const std::invalid_argument& e) {
      fail(e.what());
    }
    if (rec.contains("concept")) {
      ex.concept_id = rec["concept"].get<std::string>();
      out.concepts[ex.concept_id].push_back(ex.x);
    }
    out.sequences.push_back(std::move(ex));
  }
  if (out.sequences.empty() && out.images.empty()) {
    out.warnings.push_back(path + ": dataset is empty");
  }
  return out;
}

void save_dataset(const Dataset& data, const std::string& path) {
  std::string out;
  for (const LabeledSequence& ex : data) {
    json rec = {{"id", ex.id}, {"token_ids", ex.x.token_ids}, {"label", ex.label}};
    std::vector<int> extra;
    for (int p : ex.x.special_positions) {
      if (p != 0) extra.push_back(p);
    }
    if (!extra.empty()) rec["specials"] = extra;
    if (!ex.concept_id.empty()) rec["concept"] = ex.concept_id;
    out += rec.dump();
    out.push_back('\n');
  }
  write_text_file(path, out);
}

nlohmann::json attribution_to_json(const AttributionResult& r) {
  json j = {{"method", r.method},
            {"class", r.class_k},
            {"seed", r.seed},
            {"n_samples", r.n_samples},
            {"scores", r.scores},
            {"player_indices", r.player_indices}};
  if (r.base_value != 0.0) j["base_value"] = r.base_value;
  return j;
}

AttributionResult attribution_from_json(const nlohmann::json& j) {
  AttributionResult r;
  r.method = j.at("method").get<std::string>();
  r.class_k = j.at("class").get<int>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.n_samples = j.at("n_samples").get<int>();
  r.scores = j.at("scores").get<std::vector<double>>();
  r.player_indices = j.at("player_indices").get<std::vector<int>>();
  r.base_value = j.value("base_value", 0.0);
  return r;
}

void save_cav(const Cav& cav, const std::string& path) {
  json header = {{"kind", "cav"},
                 {"concept", cav.concept_id},
                 {"layer", cav.layer},
                 {"accuracy", cav.accuracy},
                 {"d", cav.direction.size()}};
  write_framed(path, header, cav.direction.data(), cav.direction.size());
}

Cav load_cav(const std::string& path) {
  json header = read_header_only(path);
  if (header.value("kind", "") != "cav") {
    throw DataError(path + ": not a CAV file");
  }
  std::size_t d = header.at("d").get<std::size_t>();
  Framed f = read_framed(path, d);
  Cav cav;
  cav.concept_id = header.at("concept").get<std::string>();
  cav.layer = header.at("layer").get<int>();
  cav.accuracy = header.at("accuracy").get<double>();
  cav.direction = std::move(f.values);
  return cav;
}

std::string config_hash_hex(const nlohmann::json& config) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, fnv1a64(config.dump()));
  return std::string(buf);
}

void write_text_file(const std::string& path, const std::string& content) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) {
    std::filesystem::create_directories(p.parent_path());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path + ": cannot open for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw DataError(path + ": write failed");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path + ": cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return std::string(buf);
}

}  // namespace attnshap
