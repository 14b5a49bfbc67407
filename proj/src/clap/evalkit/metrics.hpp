#pragma once

#include <string>
#include <vector>

#include "clap/common.hpp"

namespace clap::evalkit {

struct TemporalInterval {
  double t_start = 0.0;
  double t_end = 0.0;
};

// |a&b| / |a|b|; 0 when disjoint.
double tiou(const TemporalInterval& a, const TemporalInterval& b);

struct Detection {
  std::string video_id;
  TemporalInterval interval;
  int class_id = 0;
  double score = 0.0;
};

struct GroundTruth {
  std::string video_id;
  TemporalInterval interval;
  int class_id = 0;
};

// Greedy suppression by descending score; survivors pairwise tIoU <=
// threshold. Ties break to the earlier t_start, then input order. Callers
// pass detections of one video and class at a time.
std::vector<Detection> nms(std::vector<Detection> dets, double threshold);

// All-point interpolated AP. Detections are matched greedily in score
// order; a detection is a true positive iff its tIoU with some unmatched
// ground truth of the same video and class reaches the threshold.
// Zero ground truths -> 0.
double average_precision(std::vector<Detection> dets,
                         const std::vector<GroundTruth>& gts,
                         double tiou_threshold);

enum class AmapGrid {
  kPaper,        // 0.05:0.05:0.95, nineteen thresholds
  kActivityNet,  // 0.50:0.05:0.95, ten thresholds
};

std::vector<double> amap_thresholds(AmapGrid grid);

struct MapSuite {
  double map_050 = 0.0;
  double map_075 = 0.0;
  double map_095 = 0.0;
  double amap = 0.0;
};

// mAP = mean AP over the classes present in gts; AmAP averages mAP over
// the threshold grid.
MapSuite map_suite(const std::vector<Detection>& dets,
                   const std::vector<GroundTruth>& gts,
                   AmapGrid grid = AmapGrid::kPaper);

double map_at(const std::vector<Detection>& dets,
              const std::vector<GroundTruth>& gts, double tiou_threshold);

}  // namespace clap::evalkit
