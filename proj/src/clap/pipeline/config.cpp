#include "clap/pipeline/config.hpp"

#include <fstream>

namespace clap::pipeline {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::string& section,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object())
    throw ConfigError("config: section '" + section + "' must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        known = true;
        break;
      }
    if (!known)
      throw ConfigError("config: unknown key '" + section + "." + it.key() +
                        "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) {
    try {
      out = j.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError("config: bad value for '" + std::string(key) +
                        "': " + e.what());
    }
  }
}

}  // namespace

model::Dims RunConfig::dims() const {
  model::Dims d = model_dims;
  d.d_raw = generator.d_raw;
  d.n_classes = generator.n_classes;
  return d;
}

RunConfig default_run_config() {
  RunConfig cfg;
  cfg.config_hash = hash_of_config(effective_config_json(cfg));
  return cfg;
}

RunConfig parse_run_config(const json& j) {
  RunConfig cfg;
  check_keys(j, "<root>",
             {"seed", "generator", "model", "trainer", "eval", "ablation"});
  read(j, "seed", cfg.seed);

  if (j.contains("generator")) {
    const json& g = j.at("generator");
    check_keys(g, "generator",
               {"n_videos", "n_classes", "d_raw", "mean_duration_s",
                "min_segments", "max_segments", "min_segment_len_s",
                "max_segment_len_s", "max_gap_s", "sigma_fg", "sigma_bg",
                "bg_offset_scale", "caption_vocab_size", "caption_coverage",
                "caption_min_tokens", "caption_max_tokens", "train_fraction",
                "base_class_fraction"});
    read(g, "n_videos", cfg.generator.n_videos);
    read(g, "n_classes", cfg.generator.n_classes);
    read(g, "d_raw", cfg.generator.d_raw);
    read(g, "mean_duration_s", cfg.generator.mean_duration_s);
    read(g, "min_segments", cfg.generator.min_segments);
    read(g, "max_segments", cfg.generator.max_segments);
    read(g, "min_segment_len_s", cfg.generator.min_segment_len_s);
    read(g, "max_segment_len_s", cfg.generator.max_segment_len_s);
    read(g, "max_gap_s", cfg.generator.max_gap_s);
    read(g, "sigma_fg", cfg.generator.sigma_fg);
    read(g, "sigma_bg", cfg.generator.sigma_bg);
    read(g, "bg_offset_scale", cfg.generator.bg_offset_scale);
    read(g, "caption_vocab_size", cfg.generator.caption_vocab_size);
    read(g, "caption_coverage", cfg.generator.caption_coverage);
    read(g, "caption_min_tokens", cfg.generator.caption_min_tokens);
    read(g, "caption_max_tokens", cfg.generator.caption_max_tokens);
    read(g, "train_fraction", cfg.split.train_fraction);
    read(g, "base_class_fraction", cfg.split.base_class_fraction);
  }

  if (j.contains("model")) {
    const json& m = j.at("model");
    check_keys(m, "model",
               {"d_hidden", "d_feat", "d_embed", "d_text", "vocab_hash_size",
                "encoder_blocks", "proj_pairs", "temperature"});
    read(m, "d_hidden", cfg.model_dims.d_hidden);
    read(m, "d_feat", cfg.model_dims.d_feat);
    read(m, "d_embed", cfg.model_dims.d_embed);
    read(m, "d_text", cfg.model_dims.d_text);
    read(m, "vocab_hash_size", cfg.model_dims.vocab_hash_size);
    read(m, "encoder_blocks", cfg.model_dims.encoder_blocks);
    read(m, "proj_pairs", cfg.model_dims.proj_pairs);
    read(m, "temperature", cfg.temperature);
  }

  if (j.contains("trainer")) {
    const json& t = j.at("trainer");
    check_keys(t, "trainer",
               {"objective", "epochs", "batch_size", "clips_per_segment",
                "caption_probability", "dedupe_negatives", "lr_backbone",
                "lr_heads", "decay_gamma", "decay_every_epochs",
                "checkpoint_every_epochs", "train_split", "class_partition"});
    if (t.contains("objective"))
      cfg.trainer_cfg.objective =
          trainer::parse_objective(t.at("objective").get<std::string>());
    read(t, "epochs", cfg.trainer_cfg.epochs);
    read(t, "batch_size", cfg.trainer_cfg.batch_size);
    read(t, "clips_per_segment", cfg.trainer_cfg.clips_per_segment);
    read(t, "caption_probability", cfg.trainer_cfg.caption_probability);
    read(t, "dedupe_negatives", cfg.trainer_cfg.dedupe_negatives);
    read(t, "lr_backbone", cfg.trainer_cfg.sgd.base_lr_backbone);
    read(t, "lr_heads", cfg.trainer_cfg.sgd.base_lr_heads);
    read(t, "decay_gamma", cfg.trainer_cfg.sgd.decay_gamma);
    read(t, "decay_every_epochs", cfg.trainer_cfg.sgd.decay_every_epochs);
    read(t, "checkpoint_every_epochs",
         cfg.trainer_cfg.checkpoint_every_epochs);
    read(t, "train_split", cfg.train_split);
    read(t, "class_partition", cfg.class_partition);
  }

  if (j.contains("eval")) {
    const json& e = j.at("eval");
    check_keys(e, "eval",
               {"window_scales", "window_stride", "nms_threshold",
                "top_k_per_video", "probe_steps", "probe_batch_size",
                "probe_lr", "amap_grid", "shots", "episodes",
                "histogram_bins", "grounding_probe"});
    read(e, "window_scales", cfg.eval.windows.scales);
    read(e, "window_stride", cfg.eval.windows.stride);
    read(e, "nms_threshold", cfg.eval.windows.nms_threshold);
    read(e, "top_k_per_video", cfg.eval.windows.top_k_per_video);
    read(e, "probe_steps", cfg.eval.probe.steps);
    read(e, "probe_batch_size", cfg.eval.probe.batch_size);
    read(e, "probe_lr", cfg.eval.probe.lr);
    if (e.contains("amap_grid")) {
      std::string grid = e.at("amap_grid").get<std::string>();
      if (grid == "paper")
        cfg.eval.amap_grid = evalkit::AmapGrid::kPaper;
      else if (grid == "activitynet")
        cfg.eval.amap_grid = evalkit::AmapGrid::kActivityNet;
      else
        throw ConfigError("config: amap_grid must be paper or activitynet");
    }
    read(e, "shots", cfg.eval.shots);
    read(e, "episodes", cfg.eval.episodes);
    read(e, "histogram_bins", cfg.eval.histogram_bins);
    read(e, "grounding_probe", cfg.eval.grounding_probe);
    if (cfg.eval.grounding_probe != "auto" &&
        cfg.eval.grounding_probe != "always" &&
        cfg.eval.grounding_probe != "never")
      throw ConfigError(
          "config: grounding_probe must be auto, always, or never");
  }

  if (j.contains("ablation")) {
    const json& a = j.at("ablation");
    check_keys(a, "ablation", {"seeds", "variants", "tasks"});
    read(a, "seeds", cfg.ablation.seeds);
    read(a, "variants", cfg.ablation.variants);
    read(a, "tasks", cfg.ablation.tasks);
    for (const std::string& v : cfg.ablation.variants)
      trainer::parse_objective(v);  // validates
    for (const std::string& t : cfg.ablation.tasks)
      if (t != "tal" && t != "fewshot" && t != "grounding")
        throw ConfigError("config: unknown ablation task '" + t + "'");
    if (cfg.ablation.seeds.empty())
      throw ConfigError("config: ablation.seeds must not be empty");
  }

  if (cfg.train_split != "train" && cfg.train_split != "all")
    throw ConfigError("config: train_split must be train or all");
  if (cfg.class_partition != "all" && cfg.class_partition != "base")
    throw ConfigError("config: class_partition must be all or base");
  if (cfg.split.train_fraction <= 0.0 || cfg.split.train_fraction >= 1.0)
    throw ConfigError("config: train_fraction must be in (0, 1)");
  if (cfg.split.base_class_fraction <= 0.0 ||
      cfg.split.base_class_fraction >= 1.0)
    throw ConfigError("config: base_class_fraction must be in (0, 1)");
  if (!(cfg.temperature > 0.0))
    throw ConfigError("config: temperature must be positive");

  cfg.generator.seed = cfg.seed;
  cfg.trainer_cfg.seed = cfg.seed;
  cfg.trainer_cfg.temperature = cfg.temperature;
  cfg.eval.probe.seed = cfg.seed;
  cfg.generator.validate();
  cfg.dims().validate();
  cfg.trainer_cfg.validate();
  cfg.config_hash = hash_of_config(effective_config_json(cfg));
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("missing input artifact: config file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config parse error: " + std::string(e.what()));
  }
  return parse_run_config(j);
}

json effective_config_json(const RunConfig& cfg) {
  const corpus::GeneratorConfig& g = cfg.generator;
  const trainer::TrainConfig& t = cfg.trainer_cfg;
  json e{{"window_scales", cfg.eval.windows.scales},
         {"window_stride", cfg.eval.windows.stride},
         {"nms_threshold", cfg.eval.windows.nms_threshold},
         {"top_k_per_video", cfg.eval.windows.top_k_per_video},
         {"probe_steps", cfg.eval.probe.steps},
         {"probe_batch_size", cfg.eval.probe.batch_size},
         {"probe_lr", cfg.eval.probe.lr},
         {"amap_grid", cfg.eval.amap_grid == evalkit::AmapGrid::kPaper
                           ? "paper"
                           : "activitynet"},
         {"shots", cfg.eval.shots},
         {"episodes", cfg.eval.episodes},
         {"histogram_bins", cfg.eval.histogram_bins},
         {"grounding_probe", cfg.eval.grounding_probe}};
  return json{
      {"seed", cfg.seed},
      {"generator",
       {{"n_videos", g.n_videos},
        {"n_classes", g.n_classes},
        {"d_raw", g.d_raw},
        {"mean_duration_s", g.mean_duration_s},
        {"min_segments", g.min_segments},
        {"max_segments", g.max_segments},
        {"min_segment_len_s", g.min_segment_len_s},
        {"max_segment_len_s", g.max_segment_len_s},
        {"max_gap_s", g.max_gap_s},
        {"sigma_fg", g.sigma_fg},
        {"sigma_bg", g.sigma_bg},
        {"bg_offset_scale", g.bg_offset_scale},
        {"caption_vocab_size", g.caption_vocab_size},
        {"caption_coverage", g.caption_coverage},
        {"caption_min_tokens", g.caption_min_tokens},
        {"caption_max_tokens", g.caption_max_tokens},
        {"train_fraction", cfg.split.train_fraction},
        {"base_class_fraction", cfg.split.base_class_fraction}}},
      {"model",
       {{"d_hidden", cfg.model_dims.d_hidden},
        {"d_feat", cfg.model_dims.d_feat},
        {"d_embed", cfg.model_dims.d_embed},
        {"d_text", cfg.model_dims.d_text},
        {"vocab_hash_size", cfg.model_dims.vocab_hash_size},
        {"encoder_blocks", cfg.model_dims.encoder_blocks},
        {"proj_pairs", cfg.model_dims.proj_pairs},
        {"temperature", cfg.temperature}}},
      {"trainer",
       {{"objective", trainer::objective_name(t.objective)},
        {"epochs", t.epochs},
        {"batch_size", t.batch_size},
        {"clips_per_segment", t.clips_per_segment},
        {"caption_probability", t.caption_probability},
        {"dedupe_negatives", t.dedupe_negatives},
        {"lr_backbone", t.sgd.base_lr_backbone},
        {"lr_heads", t.sgd.base_lr_heads},
        {"decay_gamma", t.sgd.decay_gamma},
        {"decay_every_epochs", t.sgd.decay_every_epochs},
        {"checkpoint_every_epochs", t.checkpoint_every_epochs},
        {"train_split", cfg.train_split},
        {"class_partition", cfg.class_partition}}},
      {"eval", std::move(e)},
      {"ablation",
       {{"seeds", cfg.ablation.seeds},
        {"variants", cfg.ablation.variants},
        {"tasks", cfg.ablation.tasks}}}};
}

std::string hash_of_config(const json& effective) {
  std::uint64_t h = fnv1a64(effective.dump());
  char buf[32];
  std::snprintf(buf, sizeof buf, "fnv1a:%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace clap::pipeline
