#pragma once

#include "clap/corpus/types.hpp"
#include "clap/rng.hpp"
#include "clap/trainer/trainer.hpp"

namespace clap::evalkit {

struct Histogram {
  std::vector<double> edges;  // bins + 1 entries
  std::vector<int> counts;
};

// Per video with at least two foreground seconds and one background
// second: sample two foreground clips and one background clip, and emit
// ||h_fg1 - h_bg|| - ||h_fg1 - h_fg2||. Positive differences mean the
// encoder separates foreground from background more than within-action
// variation. Ineligible videos are skipped and counted.
struct DistanceAnalysis {
  std::vector<double> differences;  // fg2bg - fg2fg per eligible video
  double median = 0.0;
  int skipped_videos = 0;
  Histogram histogram;
};

DistanceAnalysis feature_distance_analysis(
    const trainer::FeatureTable& features,
    const std::vector<const corpus::UntrimmedVideo*>& videos, Rng& rng,
    int histogram_bins = 20);

// bin_left,bin_right,count rows with a header line.
void write_histogram_csv(const Histogram& hist, const std::string& path);

}  // namespace clap::evalkit
