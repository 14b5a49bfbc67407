#pragma once

#include "clap/evalkit/localize.hpp"

namespace clap::evalkit {

struct GroundingQuery {
  std::string video_id;
  std::string text;
  TemporalInterval target;
};

// One query per caption of the given videos.
std::vector<GroundingQuery> grounding_queries(
    const std::vector<const corpus::UntrimmedVideo*>& videos);

// Windows ranked by dot(normalize(proj_video(mean h over window)), z_text),
// after class-agnostic NMS.
std::vector<std::pair<TemporalInterval, double>> ground_text(
    const trainer::FeatureTable& features, const model::ModelState& state,
    const std::string& video_id, const std::string& query_text,
    const WindowConfig& windows);

struct GroundingMetrics {
  double recall_050 = 0.0;
  double recall_070 = 0.0;
  double mean_iou = 0.0;
  int n_queries = 0;
};

GroundingMetrics evaluate_grounding(const trainer::FeatureTable& features,
                                    const model::ModelState& state,
                                    const std::vector<GroundingQuery>& queries,
                                    const WindowConfig& windows);

// Same protocol with each query embedding replaced by a seeded random unit
// vector; the chance-level reference the reports carry alongside.
GroundingMetrics grounding_random_baseline(
    const trainer::FeatureTable& features, const model::ModelState& state,
    const std::vector<GroundingQuery>& queries, const WindowConfig& windows,
    std::uint64_t seed);

// For checkpoints trained without a contrastive term (untrained
// projections): refits both projection stacks on train-split foreground
// clips paired with their captions (prompts when uncaptioned), using the
// shared SGD machinery. Mutates the passed state.
void fit_grounding_probe(model::ModelState& state,
                         const trainer::FeatureTable& features,
                         const std::vector<const corpus::UntrimmedVideo*>&
                             train_videos,
                         const std::vector<std::string>& class_names,
                         const ProbeConfig& cfg);

}  // namespace clap::evalkit
