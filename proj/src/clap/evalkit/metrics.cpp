#include "clap/evalkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace clap::evalkit {

double tiou(const TemporalInterval& a, const TemporalInterval& b) {
  if (!(a.t_start < a.t_end) || !(b.t_start < b.t_end))
    throw UsageError("tiou: degenerate interval");
  double inter =
      std::min(a.t_end, b.t_end) - std::max(a.t_start, b.t_start);
  if (inter <= 0.0) return 0.0;
  double uni =
      std::max(a.t_end, b.t_end) - std::min(a.t_start, b.t_start);
  return inter / uni;
}

namespace {

// score desc, then earlier start, then input order
std::vector<std::size_t> score_order(const std::vector<Detection>& dets) {
  std::vector<std::size_t> idx(dets.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (dets[a].score != dets[b].score) return dets[a].score > dets[b].score;
    if (dets[a].interval.t_start != dets[b].interval.t_start)
      return dets[a].interval.t_start < dets[b].interval.t_start;
    return a < b;
  });
  return idx;
}

}  // namespace

std::vector<Detection> nms(std::vector<Detection> dets, double threshold) {
  std::vector<std::size_t> order = score_order(dets);
  std::vector<Detection> kept;
  for (std::size_t i : order) {
    bool suppressed = false;
    for (const Detection& k : kept) {
      if (tiou(dets[i].interval, k.interval) > threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(dets[i]);
  }
  return kept;
}

double average_precision(std::vector<Detection> dets,
                         const std::vector<GroundTruth>& gts,
                         double tiou_threshold) {
  if (gts.empty()) return 0.0;
  std::vector<std::size_t> order = score_order(dets);
  std::vector<bool> gt_matched(gts.size(), false);

  std::size_t tp_total = 0;
  std::vector<bool> is_tp(dets.size(), false);
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    const Detection& d = dets[order[rank]];
    double best_iou = 0.0;
    std::size_t best_gt = gts.size();
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (gt_matched[g]) continue;
      if (gts[g].video_id != d.video_id || gts[g].class_id != d.class_id)
        continue;
      double iou = tiou(d.interval, gts[g].interval);
      if (iou > best_iou) {
        best_iou = iou;
        best_gt = g;
      }
    }
    if (best_gt < gts.size() && best_iou >= tiou_threshold) {
      gt_matched[best_gt] = true;
      is_tp[rank] = true;
      ++tp_total;
    }
  }
  if (tp_total == 0) return 0.0;

  // precision/recall points in rank order, then all-point interpolation
  // (monotone precision envelope from the right).
  std::size_t n = order.size();
  std::vector<double> precision(n), recall(n);
  std::size_t tp = 0;
  for (std::size_t r = 0; r < n; ++r) {
    if (is_tp[r]) ++tp;
    precision[r] = static_cast<double>(tp) / static_cast<double>(r + 1);
    recall[r] = static_cast<double>(tp) / static_cast<double>(gts.size());
  }
  for (std::size_t r = n - 1; r-- > 0;)
    precision[r] = std::max(precision[r], precision[r + 1]);
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    if (recall[r] > prev_recall) {
      ap += (recall[r] - prev_recall) * precision[r];
      prev_recall = recall[r];
    }
  }
  return ap;
}

std::vector<double> amap_thresholds(AmapGrid grid) {
  std::vector<double> out;
  int start = grid == AmapGrid::kPaper ? 1 : 10;
  for (int k = start; k <= 19; ++k) out.push_back(0.05 * k);
  return out;
}

double map_at(const std::vector<Detection>& dets,
              const std::vector<GroundTruth>& gts, double tiou_threshold) {
  std::set<int> classes;
  for (const GroundTruth& g : gts) classes.insert(g.class_id);
  if (classes.empty()) return 0.0;
  double sum = 0.0;
  for (int c : classes) {
    std::vector<Detection> class_dets;
    for (const Detection& d : dets)
      if (d.class_id == c) class_dets.push_back(d);
    std::vector<GroundTruth> class_gts;
    for (const GroundTruth& g : gts)
      if (g.class_id == c) class_gts.push_back(g);
    sum += average_precision(std::move(class_dets), class_gts, tiou_threshold);
  }
  return sum / static_cast<double>(classes.size());
}

MapSuite map_suite(const std::vector<Detection>& dets,
                   const std::vector<GroundTruth>& gts, AmapGrid grid) {
  MapSuite suite;
  suite.map_050 = map_at(dets, gts, 0.5);
  suite.map_075 = map_at(dets, gts, 0.75);
  suite.map_095 = map_at(dets, gts, 0.95);
  double sum = 0.0;
  std::vector<double> thresholds = amap_thresholds(grid);
  for (double t : thresholds) sum += map_at(dets, gts, t);
  suite.amap = sum / static_cast<double>(thresholds.size());
  return suite;
}

}  // namespace clap::evalkit
