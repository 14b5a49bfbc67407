#include "clap/evalkit/localize.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"

namespace clap::evalkit {

namespace {

struct LabeledSecond {
  const numkit::DenseMatrix* features;
  std::size_t row;
  int region;  // 0/1
  int cls;     // -1 for background
};

std::vector<LabeledSecond> labeled_seconds(
    const trainer::FeatureTable& features,
    const std::vector<const corpus::UntrimmedVideo*>& videos) {
  std::vector<LabeledSecond> out;
  for (const auto* v : videos) {
    auto it = features.by_video.find(v->id);
    if (it == features.by_video.end())
      throw DataError("missing features for video " + v->id);
    const numkit::DenseMatrix& m = it->second;
    for (int t = 0; t < v->duration_s; ++t) {
      int region = 0;
      int cls = -1;
      for (const corpus::Segment& s : v->segments) {
        if (t >= s.t_start && t < s.t_end && s.is_foreground()) {
          region = 1;
          cls = *s.class_id;
          break;
        }
      }
      out.push_back({&m, static_cast<std::size_t>(t), region, cls});
    }
  }
  return out;
}

}  // namespace

LinearProbe fit_probe(const trainer::FeatureTable& features,
                      const std::vector<const corpus::UntrimmedVideo*>& videos,
                      int n_classes, const ProbeConfig& cfg) {
  if (cfg.steps < 1 || cfg.batch_size < 1 || !(cfg.lr > 0.0))
    throw ConfigError("probe: bad hyperparameters");
  std::vector<LabeledSecond> data = labeled_seconds(features, videos);
  if (data.empty()) throw DataError("probe: no labeled seconds");
  std::size_t d_feat = data.front().features->cols();

  LinearProbe probe;
  Rng rng = Rng(cfg.seed).fork("probe_init");
  probe.head_region.push(numkit::AffineLayer::glorot(d_feat, 2, rng));
  probe.head_class.push(
      numkit::AffineLayer::glorot(d_feat, n_classes, rng));
  probe.head_region.set_training(true);
  probe.head_class.set_training(true);

  numkit::SgdConfig sgd;
  sgd.base_lr_backbone = cfg.lr;
  sgd.base_lr_heads = cfg.lr;
  sgd.decay_gamma = 1.0;
  sgd.decay_every_epochs = 1;
  std::vector<numkit::GroupedParams> groups{
      {numkit::ParamGroup::kHeads, probe.head_region.param_refs()},
      {numkit::ParamGroup::kHeads, probe.head_class.param_refs()}};

  Rng draw = Rng(cfg.seed).fork("probe_batches");
  for (int step = 0; step < cfg.steps; ++step) {
    std::size_t bs =
        std::min<std::size_t>(cfg.batch_size, data.size());
    numkit::DenseMatrix x(bs, d_feat);
    losses::ClassLabels labels;
    for (std::size_t i = 0; i < bs; ++i) {
      const LabeledSecond& s = data[static_cast<std::size_t>(draw.uniform_int(
          0, static_cast<std::int64_t>(data.size()) - 1))];
      for (std::size_t j = 0; j < d_feat; ++j)
        x(i, j) = (*s.features)(s.row, j);
      labels.region.push_back(s.region);
      labels.cls.push_back(s.cls);
    }
    probe.head_region.zero_grads();
    probe.head_class.zero_grads();
    numkit::StackTape tape_r, tape_c;
    numkit::DenseMatrix region_logits = probe.head_region.forward(x, tape_r);
    numkit::DenseMatrix class_logits = probe.head_class.forward(x, tape_c);
    losses::ClassificationResult res =
        losses::classification_loss(class_logits, region_logits, labels);
    if (!std::isfinite(res.value))
      throw NumericError("probe: non-finite loss");
    probe.head_region.backward(tape_r, res.d_region_logits);
    probe.head_class.backward(tape_c, res.d_class_logits);
    numkit::sgd_step(groups, 0, sgd);
  }
  probe.head_region.set_training(false);
  probe.head_class.set_training(false);
  return probe;
}

namespace {

void softmax_rows(numkit::DenseMatrix& m) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto row = m.row(i);
    double mx = *std::max_element(row.begin(), row.end());
    double denom = 0.0;
    for (double& v : row) {
      v = std::exp(v - mx);
      denom += v;
    }
    for (double& v : row) v /= denom;
  }
}

}  // namespace

std::vector<Detection> localize_tal(
    const trainer::FeatureTable& features,
    const std::vector<const corpus::UntrimmedVideo*>& videos,
    const LinearProbe& probe, const WindowConfig& cfg) {
  if (cfg.scales.empty() || cfg.stride < 1)
    throw ConfigError("windows: bad configuration");
  int n_classes = static_cast<int>(probe.head_class.out_dim());
  std::vector<Detection> all;
  for (const auto* v : videos) {
    auto it = features.by_video.find(v->id);
    if (it == features.by_video.end())
      throw DataError("missing features for video " + v->id);
    const numkit::DenseMatrix& h = it->second;
    int duration = static_cast<int>(h.rows());

    numkit::DenseMatrix p_region = probe.head_region.forward_eval(h);
    numkit::DenseMatrix p_class = probe.head_class.forward_eval(h);
    softmax_rows(p_region);
    softmax_rows(p_class);

    // prefix sums over seconds for O(1) window means
    std::vector<double> fg_prefix(duration + 1, 0.0);
    for (int t = 0; t < duration; ++t)
      fg_prefix[t + 1] = fg_prefix[t] + p_region(t, 1);
    numkit::DenseMatrix cls_prefix(duration + 1, n_classes, 0.0);
    for (int t = 0; t < duration; ++t)
      for (int c = 0; c < n_classes; ++c)
        cls_prefix(t + 1, c) = cls_prefix(t, c) + p_class(t, c);

    std::vector<std::vector<Detection>> per_class(n_classes);
    for (int scale : cfg.scales) {
      if (scale < 1 || scale > duration) continue;
      for (int a = 0; a + scale <= duration; a += cfg.stride) {
        int b = a + scale;
        double inv_len = 1.0 / static_cast<double>(scale);
        double fg = (fg_prefix[b] - fg_prefix[a]) * inv_len;
        for (int c = 0; c < n_classes; ++c) {
          double pc = (cls_prefix(b, c) - cls_prefix(a, c)) * inv_len;
          per_class[c].push_back({v->id,
                                  {static_cast<double>(a),
                                   static_cast<double>(b)},
                                  c, fg * pc});
        }
      }
    }
    std::vector<Detection> video_dets;
    for (int c = 0; c < n_classes; ++c) {
      std::vector<Detection> kept =
          nms(std::move(per_class[c]), cfg.nms_threshold);
      video_dets.insert(video_dets.end(), kept.begin(), kept.end());
    }
    std::sort(video_dets.begin(), video_dets.end(),
              [](const Detection& a, const Detection& b) {
                if (a.score != b.score) return a.score > b.score;
                if (a.interval.t_start != b.interval.t_start)
                  return a.interval.t_start < b.interval.t_start;
                return a.class_id < b.class_id;
              });
    if (static_cast<int>(video_dets.size()) > cfg.top_k_per_video)
      video_dets.resize(cfg.top_k_per_video);
    all.insert(all.end(), video_dets.begin(), video_dets.end());
  }
  return all;
}

std::vector<GroundTruth> foreground_ground_truth(
    const std::vector<const corpus::UntrimmedVideo*>& videos) {
  std::vector<GroundTruth> gts;
  for (const auto* v : videos)
    for (const corpus::Segment& s : v->segments)
      if (s.is_foreground())
        gts.push_back({v->id, {s.t_start, s.t_end}, *s.class_id});
  return gts;
}

void save_detections(const std::vector<Detection>& dets,
                     const std::string& path) {
  std::ofstream out(path);
  if (!out)
    throw DataError("cannot open detections file for writing: " + path);
  for (const Detection& d : dets) {
    out << nlohmann::json{{"video_id", d.video_id},
                          {"t_start", d.interval.t_start},
                          {"t_end", d.interval.t_end},
                          {"class_id", d.class_id},
                          {"score", d.score}}
        << '\n';
  }
}

}  // namespace clap::evalkit
