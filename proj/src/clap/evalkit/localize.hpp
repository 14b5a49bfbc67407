#pragma once

#include "clap/evalkit/metrics.hpp"
#include "clap/losses/losses.hpp"
#include "clap/trainer/trainer.hpp"

namespace clap::evalkit {

struct WindowConfig {
  std::vector<int> scales{1, 2, 4, 8, 16};
  int stride = 1;
  double nms_threshold = 0.5;
  int top_k_per_video = 100;
};

struct ProbeConfig {
  int steps = 200;
  int batch_size = 128;
  double lr = 0.05;
  std::uint64_t seed = 1;
};

// Region (fg/bg) and class heads fitted on per-second features.
struct LinearProbe {
  numkit::LayerStack head_region;  // d_feat -> 2
  numkit::LayerStack head_class;   // d_feat -> n_classes
};

// Logistic-regression-style probe trained by the shared SGD machinery on
// every labeled second of the given videos.
LinearProbe fit_probe(const trainer::FeatureTable& features,
                      const std::vector<const corpus::UntrimmedVideo*>& videos,
                      int n_classes, const ProbeConfig& cfg);

// Scores sliding windows by mean foreground probability times mean class
// probability, suppresses per class, and keeps the top detections per
// video.
std::vector<Detection> localize_tal(
    const trainer::FeatureTable& features,
    const std::vector<const corpus::UntrimmedVideo*>& videos,
    const LinearProbe& probe, const WindowConfig& cfg);

std::vector<GroundTruth> foreground_ground_truth(
    const std::vector<const corpus::UntrimmedVideo*>& videos);

void save_detections(const std::vector<Detection>& dets,
                     const std::string& path);

}  // namespace clap::evalkit
