#include "clap/model/checkpoint.hpp"

#include <fstream>

#include "json.hpp"

namespace clap::model {

using nlohmann::json;

namespace {

json matrix_to_json(const numkit::DenseMatrix& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

numkit::DenseMatrix matrix_from_json(const json& j) {
  auto rows = j.get<std::vector<std::vector<double>>>();
  numkit::DenseMatrix m = numkit::DenseMatrix::from_rows(rows);
  m.validate_finite("checkpoint matrix");
  return m;
}

json stack_to_json(const numkit::LayerStack& stack) {
  json layers = json::array();
  for (std::size_t k = 0; k < stack.size(); ++k) {
    const numkit::Layer& l = stack.layer(k);
    if (const auto* a = std::get_if<numkit::AffineLayer>(&l)) {
      layers.push_back({{"kind", "affine"},
                        {"weight", matrix_to_json(a->weight)},
                        {"bias", a->bias}});
    } else if (std::holds_alternative<numkit::ReluLayer>(l)) {
      layers.push_back({{"kind", "relu"}});
    } else {
      const auto& s = std::get<numkit::StandardizeLayer>(l);
      layers.push_back({{"kind", "standardize"},
                        {"running_mean", s.running_mean},
                        {"running_var", s.running_var},
                        {"scale", s.scale},
                        {"shift", s.shift},
                        {"eps", s.eps},
                        {"momentum", s.momentum}});
    }
  }
  return layers;
}

numkit::LayerStack stack_from_json(const json& j) {
  numkit::LayerStack stack;
  for (const json& lj : j) {
    std::string kind = lj.at("kind").get<std::string>();
    if (kind == "affine") {
      numkit::DenseMatrix w = matrix_from_json(lj.at("weight"));
      numkit::AffineLayer a(w.cols(), w.rows());
      a.weight = std::move(w);
      a.bias = lj.at("bias").get<std::vector<double>>();
      if (a.bias.size() != a.out_dim())
        throw DataError("checkpoint: affine bias length mismatch");
      stack.push(std::move(a));
    } else if (kind == "relu") {
      stack.push(numkit::ReluLayer{});
    } else if (kind == "standardize") {
      auto mean = lj.at("running_mean").get<std::vector<double>>();
      numkit::StandardizeLayer s(mean.size(), lj.at("eps").get<double>(),
                                 lj.at("momentum").get<double>());
      s.running_mean = std::move(mean);
      s.running_var = lj.at("running_var").get<std::vector<double>>();
      s.scale = lj.at("scale").get<std::vector<double>>();
      s.shift = lj.at("shift").get<std::vector<double>>();
      if (s.running_var.size() != s.dim() || s.scale.size() != s.dim() ||
          s.shift.size() != s.dim())
        throw DataError("checkpoint: standardize field length mismatch");
      stack.push(std::move(s));
    } else {
      throw DataError("checkpoint: unknown layer kind '" + kind + "'");
    }
  }
  return stack;
}

json dims_to_json(const Dims& d) {
  return json{{"d_raw", d.d_raw},
              {"d_hidden", d.d_hidden},
              {"d_feat", d.d_feat},
              {"d_embed", d.d_embed},
              {"d_text", d.d_text},
              {"n_classes", d.n_classes},
              {"encoder_blocks", d.encoder_blocks},
              {"proj_pairs", d.proj_pairs},
              {"vocab_hash_size", d.vocab_hash_size}};
}

Dims dims_from_json(const json& j) {
  Dims d;
  d.d_raw = j.at("d_raw").get<int>();
  d.d_hidden = j.at("d_hidden").get<int>();
  d.d_feat = j.at("d_feat").get<int>();
  d.d_embed = j.at("d_embed").get<int>();
  d.d_text = j.at("d_text").get<int>();
  d.n_classes = j.at("n_classes").get<int>();
  d.encoder_blocks = j.at("encoder_blocks").get<int>();
  d.proj_pairs = j.at("proj_pairs").get<int>();
  d.vocab_hash_size = j.at("vocab_hash_size").get<int>();
  d.validate();
  return d;
}

}  // namespace

void save_checkpoint(const ModelState& state, const std::string& path) {
  json j{{"schema_version", kCheckpointSchemaVersion},
         {"dims", dims_to_json(state.dims)},
         {"temperature", state.temperature},
         {"video_encoder", stack_to_json(state.video_encoder)},
         {"proj_video", stack_to_json(state.proj_video)},
         {"proj_text", stack_to_json(state.proj_text)},
         {"head_class", stack_to_json(state.head_class)},
         {"head_region", stack_to_json(state.head_region)},
         {"text_table",
          {{"vocab_hash_size", state.text_table.vocab_hash_size},
           {"rows", matrix_to_json(state.text_table.table)}}},
         {"meta",
          {{"seed", state.meta.seed},
           {"objective", state.meta.objective},
           {"config_hash", state.meta.config_hash},
           {"trained_video_ids", state.meta.trained_video_ids},
           {"version", kVersion}}}};
  std::ofstream out(path);
  if (!out) throw DataError("cannot open checkpoint for writing: " + path);
  out << j.dump() << '\n';
  if (!out) throw DataError("failed writing checkpoint: " + path);
}

ModelState load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("missing input artifact: checkpoint " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("checkpoint parse error: " + std::string(e.what()));
  }
  try {
    if (!j.contains("schema_version"))
      throw DataError("checkpoint: missing schema_version field");
    int version = j.at("schema_version").get<int>();
    if (version != kCheckpointSchemaVersion)
      throw DataError("checkpoint: unsupported schema version " +
                      std::to_string(version));
    ModelState s;
    s.dims = dims_from_json(j.at("dims"));
    s.temperature = j.at("temperature").get<double>();
    if (!(s.temperature > 0.0))
      throw DataError("checkpoint: temperature must be positive");
    s.video_encoder = stack_from_json(j.at("video_encoder"));
    s.proj_video = stack_from_json(j.at("proj_video"));
    s.proj_text = stack_from_json(j.at("proj_text"));
    s.head_class = stack_from_json(j.at("head_class"));
    s.head_region = stack_from_json(j.at("head_region"));
    const json& tt = j.at("text_table");
    s.text_table.vocab_hash_size = tt.at("vocab_hash_size").get<std::size_t>();
    s.text_table.table = matrix_from_json(tt.at("rows"));
    if (s.text_table.table.rows() != s.text_table.vocab_hash_size)
      throw DataError("checkpoint: text table shape mismatch");
    const json& meta = j.at("meta");
    s.meta.seed = meta.at("seed").get<std::uint64_t>();
    s.meta.objective = meta.at("objective").get<std::string>();
    s.meta.config_hash = meta.at("config_hash").get<std::string>();
    s.meta.trained_video_ids =
        meta.at("trained_video_ids").get<std::vector<std::string>>();
    return s;
  } catch (const json::exception& e) {
    throw DataError("checkpoint field error: " + std::string(e.what()));
  }
}

}  // namespace clap::model
