#pragma once

#include <string>

#include "clap/corpus/generator.hpp"
#include "clap/evalkit/analysis.hpp"
#include "clap/evalkit/fewshot.hpp"
#include "clap/evalkit/grounding.hpp"
#include "clap/model/model.hpp"
#include "clap/trainer/trainer.hpp"
#include "json.hpp"

namespace clap::pipeline {

struct SplitConfig {
  double train_fraction = 0.75;
  double base_class_fraction = 0.8;  // remainder split evenly val/test
};

struct EvalConfig {
  evalkit::WindowConfig windows;
  evalkit::ProbeConfig probe;
  evalkit::AmapGrid amap_grid = evalkit::AmapGrid::kPaper;
  int shots = 5;
  int episodes = 20;
  int histogram_bins = 20;
  std::string grounding_probe = "auto";  // auto | always | never
};

struct AblationConfig {
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::vector<std::string> variants{"tac", "clap-clip", "clap-mask", "clap",
                                    "clap-dagger"};
  std::vector<std::string> tasks{"tal", "fewshot", "grounding"};
};

// The merged configuration every command runs from. A single top-level
// seed feeds the generator, model init, training, and evaluation streams.
struct RunConfig {
  std::uint64_t seed = 1;
  corpus::GeneratorConfig generator;
  model::Dims model_dims;  // d_raw / n_classes mirrored from generator
  double temperature = 0.07;
  trainer::TrainConfig trainer_cfg;
  std::string train_split = "train";     // train | all
  std::string class_partition = "all";   // all | base
  SplitConfig split;
  EvalConfig eval;
  AblationConfig ablation;
  std::string config_hash;

  model::Dims dims() const;
};

RunConfig default_run_config();

// Strict: unknown keys anywhere are rejected with their path.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

nlohmann::json effective_config_json(const RunConfig& cfg);
std::string hash_of_config(const nlohmann::json& effective);

}  // namespace clap::pipeline
