#pragma once

#include <functional>
#include <map>
#include <string>

#include "clap/corpus/sampling.hpp"
#include "clap/losses/losses.hpp"
#include "clap/model/model.hpp"
#include "clap/numkit/optim.hpp"

namespace clap::trainer {

// Training variants. clap-dagger shares the clap loss but restricts
// captions to foreground clips via the prompt policy.
enum class TrainObjective {
  kTac,
  kClapClip,
  kClapMask,
  kClap,
  kClapDagger,
  kClapNoCls,
};

const char* objective_name(TrainObjective o);
TrainObjective parse_objective(const std::string& name);
bool has_contrastive_term(TrainObjective o);
losses::Objective loss_objective(TrainObjective o);
language::PromptPolicy policy_for(TrainObjective o,
                                  double caption_probability);

struct TrainConfig {
  TrainObjective objective = TrainObjective::kClap;
  int epochs = 8;
  int batch_size = 32;
  int clips_per_segment = 5;
  double caption_probability = 0.5;
  bool dedupe_negatives = false;
  numkit::SgdConfig sgd;
  double temperature = 0.07;
  std::uint64_t seed = 1;
  int checkpoint_every_epochs = 0;  // 0 = final checkpoint only

  void validate() const;
};

struct StepRecord {
  int step = 0;
  int epoch = 0;
  double lr_backbone = 0.0;
  double lr_heads = 0.0;
  losses::LossReport report;
};

struct EpochSummary {
  int epoch = 0;
  int steps = 0;
  double mean_total = 0.0;
};

struct TrainLog {
  std::vector<StepRecord> steps;
  std::vector<EpochSummary> epochs;
};

// Raw ingredients of one step, before any model forward.
struct AssembledBatch {
  std::vector<corpus::ClipSample> clips;
  std::vector<language::TextDescription> descriptions;  // empty for tac
  losses::ClassLabels labels;
};

AssembledBatch assemble_batch(
    const std::vector<const corpus::UntrimmedVideo*>& videos,
    const std::vector<std::string>& class_names, const TrainConfig& cfg,
    Rng& rng);

struct BuiltBatch {
  losses::ContrastiveBatch batch;
  losses::ClassLabels labels;
};

// assemble + eval-mode embed, for inspection and tests; the training loop
// runs its own training-mode forward instead.
BuiltBatch build_batch(const model::ModelState& state,
                       const std::vector<const corpus::UntrimmedVideo*>& videos,
                       const std::vector<std::string>& class_names,
                       const TrainConfig& cfg, Rng& rng);

using CheckpointSink =
    std::function<void(const model::ModelState&, int epoch, bool final)>;

struct TrainResult {
  model::ModelState state;
  TrainLog log;
};

// Deterministic given cfg.seed. Trains on exactly train_videos; epoch
// boundaries apply the learning-rate schedule; a non-finite loss aborts
// with a diagnostic dump of the offending batch in the error message.
TrainResult train(const corpus::Corpus& corpus,
                  const std::vector<std::string>& train_video_ids,
                  const model::Dims& dims, const TrainConfig& cfg,
                  const CheckpointSink& sink = nullptr);

// Per-second backbone representations in eval mode, keyed by video id.
struct FeatureTable {
  std::map<std::string, numkit::DenseMatrix> by_video;  // (duration_s, d_feat)
};

FeatureTable extract_features(const model::ModelState& state,
                              const corpus::Corpus& corpus);

void save_features(const FeatureTable& features, const std::string& path);
FeatureTable load_features(const std::string& path);

}  // namespace clap::trainer
