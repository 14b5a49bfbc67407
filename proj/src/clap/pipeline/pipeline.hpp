#pragma once

#include "clap/model/checkpoint.hpp"
#include "clap/pipeline/config.hpp"

namespace clap::pipeline {

// Train/val video split plus the class partition for episodic evaluation.
struct Manifest {
  std::vector<std::string> train_videos;
  std::vector<std::string> val_videos;
  std::vector<int> base_classes;
  std::vector<int> val_classes;
  std::vector<int> test_classes;
  std::uint64_t seed = 0;
  std::string config_hash;

  std::vector<int> novel_classes() const;
};

Manifest build_manifest(const corpus::Corpus& corpus, const RunConfig& cfg);
void save_manifest(const Manifest& m, const std::string& path);
Manifest load_manifest(const std::string& path);

// Sibling artifacts of a corpus file: <stem>.classes.json and
// <stem>.manifest.json.
struct DataPaths {
  std::string corpus;
  std::string classes;
  std::string manifest;
};
DataPaths derive_paths(const std::string& corpus_path);

// gen-data: corpus JSONL + class vocabulary + split manifest.
void generate_corpus_files(const RunConfig& cfg,
                           const std::string& corpus_path);

std::vector<const corpus::UntrimmedVideo*> select_videos(
    const corpus::Corpus& corpus, const std::vector<std::string>& ids);

// Training split after applying train_split and class_partition.
std::vector<std::string> training_video_ids(const corpus::Corpus& corpus,
                                            const Manifest& manifest,
                                            const RunConfig& cfg);

model::ModelState run_training(const corpus::Corpus& corpus,
                               const Manifest& manifest, const RunConfig& cfg,
                               trainer::TrainLog* log_out,
                               const trainer::CheckpointSink& sink = nullptr);

// JSONL, one record per step plus one summary record per epoch.
void write_train_log(const trainer::TrainLog& log, const RunConfig& cfg,
                     const std::string& path);

nlohmann::json eval_tal_report(const model::ModelState& state,
                               const corpus::Corpus& corpus,
                               const Manifest& manifest, const RunConfig& cfg,
                               std::vector<evalkit::Detection>* dets_out =
                                   nullptr);

nlohmann::json eval_fewshot_report(const model::ModelState& state,
                                   const corpus::Corpus& corpus,
                                   const Manifest& manifest,
                                   const RunConfig& cfg);

nlohmann::json eval_grounding_report(const model::ModelState& state,
                                     const corpus::Corpus& corpus,
                                     const Manifest& manifest,
                                     const RunConfig& cfg);

nlohmann::json analyze_features_report(const model::ModelState& state,
                                       const corpus::Corpus& corpus,
                                       const Manifest& manifest,
                                       const RunConfig& cfg,
                                       evalkit::Histogram* histogram_out =
                                           nullptr);

// Ablation matrix over (variant, task, seed); one CSV row per cell and
// mean/std aggregate rows. Cell failures are recorded and the run
// continues.
void run_ablation(const RunConfig& cfg, const std::string& out_dir);

}  // namespace clap::pipeline
