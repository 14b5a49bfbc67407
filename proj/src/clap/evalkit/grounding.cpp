#include "clap/evalkit/grounding.hpp"

#include <algorithm>
#include <cmath>

namespace clap::evalkit {

std::vector<GroundingQuery> grounding_queries(
    const std::vector<const corpus::UntrimmedVideo*>& videos) {
  std::vector<GroundingQuery> queries;
  for (const auto* v : videos)
    for (const corpus::TimedCaption& c : v->captions)
      queries.push_back({v->id, c.text, {c.t_start, c.t_end}});
  return queries;
}

namespace {

std::vector<std::pair<TemporalInterval, double>> rank_windows(
    const trainer::FeatureTable& features, const model::ModelState& state,
    const std::string& video_id, std::span<const double> z_query,
    const WindowConfig& windows) {
  auto it = features.by_video.find(video_id);
  if (it == features.by_video.end())
    throw DataError("missing features for video " + video_id);
  const numkit::DenseMatrix& h = it->second;
  int duration = static_cast<int>(h.rows());

  numkit::DenseMatrix prefix(duration + 1, h.cols(), 0.0);
  for (int t = 0; t < duration; ++t)
    for (std::size_t j = 0; j < h.cols(); ++j)
      prefix(t + 1, j) = prefix(t, j) + h(t, j);

  std::vector<TemporalInterval> intervals;
  std::vector<std::vector<double>> means;
  for (int scale : windows.scales) {
    if (scale < 1 || scale > duration) continue;
    for (int a = 0; a + scale <= duration; a += windows.stride) {
      int b = a + scale;
      std::vector<double> mean(h.cols());
      for (std::size_t j = 0; j < h.cols(); ++j)
        mean[j] = (prefix(b, j) - prefix(a, j)) / scale;
      intervals.push_back({static_cast<double>(a), static_cast<double>(b)});
      means.push_back(std::move(mean));
    }
  }
  if (intervals.empty()) return {};

  numkit::DenseMatrix m = numkit::DenseMatrix::from_rows(means);
  numkit::DenseMatrix z =
      numkit::normalize_rows(state.proj_video.forward_eval(m));

  std::vector<Detection> dets;
  dets.reserve(intervals.size());
  for (std::size_t i = 0; i < intervals.size(); ++i)
    dets.push_back(
        {video_id, intervals[i], 0, numkit::dot(z.row(i), z_query)});
  std::vector<Detection> kept = nms(std::move(dets), windows.nms_threshold);
  std::vector<std::pair<TemporalInterval, double>> ranked;
  ranked.reserve(kept.size());
  for (const Detection& d : kept) ranked.push_back({d.interval, d.score});
  return ranked;
}

GroundingMetrics metrics_from_top1(
    const std::vector<double>& top1_ious) {
  GroundingMetrics m;
  m.n_queries = static_cast<int>(top1_ious.size());
  if (top1_ious.empty()) return m;
  for (double iou : top1_ious) {
    m.mean_iou += iou;
    if (iou >= 0.5) m.recall_050 += 1.0;
    if (iou >= 0.7) m.recall_070 += 1.0;
  }
  m.mean_iou /= top1_ious.size();
  m.recall_050 /= top1_ious.size();
  m.recall_070 /= top1_ious.size();
  return m;
}

}  // namespace

std::vector<std::pair<TemporalInterval, double>> ground_text(
    const trainer::FeatureTable& features, const model::ModelState& state,
    const std::string& video_id, const std::string& query_text,
    const WindowConfig& windows) {
  language::TextDescription desc{query_text, language::TextOrigin::kCaption,
                                 true};
  std::vector<double> z_t = model::embed_text(state, desc);
  return rank_windows(features, state, video_id, z_t, windows);
}

GroundingMetrics evaluate_grounding(const trainer::FeatureTable& features,
                                    const model::ModelState& state,
                                    const std::vector<GroundingQuery>& queries,
                                    const WindowConfig& windows) {
  std::vector<double> top1;
  top1.reserve(queries.size());
  for (const GroundingQuery& q : queries) {
    auto ranked = ground_text(features, state, q.video_id, q.text, windows);
    top1.push_back(ranked.empty() ? 0.0
                                  : tiou(ranked.front().first, q.target));
  }
  return metrics_from_top1(top1);
}

GroundingMetrics grounding_random_baseline(
    const trainer::FeatureTable& features, const model::ModelState& state,
    const std::vector<GroundingQuery>& queries, const WindowConfig& windows,
    std::uint64_t seed) {
  Rng master(seed);
  std::vector<double> top1;
  top1.reserve(queries.size());
  for (std::size_t qi = 0; qi < queries.size(); ++qi) {
    Rng rng = master.fork("random_query", qi);
    std::vector<double> z(state.dims.d_embed);
    for (double& x : z) x = rng.gaussian();
    double n = numkit::l2_norm(z);
    if (n > 0.0)
      for (double& x : z) x /= n;
    auto ranked =
        rank_windows(features, state, queries[qi].video_id, z, windows);
    top1.push_back(ranked.empty()
                       ? 0.0
                       : tiou(ranked.front().first, queries[qi].target));
  }
  return metrics_from_top1(top1);
}

void fit_grounding_probe(model::ModelState& state,
                         const trainer::FeatureTable& features,
                         const std::vector<const corpus::UntrimmedVideo*>&
                             train_videos,
                         const std::vector<std::string>& class_names,
                         const ProbeConfig& cfg) {
  if (cfg.steps < 1 || cfg.batch_size < 2 || !(cfg.lr > 0.0))
    throw ConfigError("grounding probe: bad hyperparameters");

  // Foreground seconds paired with a caption when one overlaps, otherwise
  // the synthetic prompt.
  struct Sample {
    const numkit::DenseMatrix* h;
    std::size_t row;
    std::string text;
  };
  std::vector<Sample> data;
  for (const auto* v : train_videos) {
    auto it = features.by_video.find(v->id);
    if (it == features.by_video.end())
      throw DataError("missing features for video " + v->id);
    for (const corpus::Segment& s : v->segments) {
      if (!s.is_foreground()) continue;
      for (int t = static_cast<int>(s.t_start); t < s.t_end; ++t) {
        corpus::ClipSample clip;
        clip.video_id = v->id;
        clip.t_start = t;
        clip.t_end = t + 1;
        clip.is_foreground = true;
        clip.class_id = s.class_id;
        std::string text;
        if (auto cap = language::assign_caption(clip, v->captions)) {
          text = cap->text;
        } else {
          text = language::generate_prompt(class_names.at(*s.class_id), true)
                     .text;
        }
        data.push_back(
            {&it->second, static_cast<std::size_t>(t), std::move(text)});
      }
    }
  }
  if (data.size() < 2)
    throw DataError("grounding probe: not enough foreground seconds");

  state.proj_video.set_training(true);
  state.proj_text.set_training(true);
  numkit::SgdConfig sgd;
  sgd.base_lr_backbone = cfg.lr;
  sgd.base_lr_heads = cfg.lr;
  sgd.decay_gamma = 1.0;
  sgd.decay_every_epochs = 1;
  std::vector<numkit::GroupedParams> groups{
      {numkit::ParamGroup::kHeads, state.proj_video.param_refs()},
      {numkit::ParamGroup::kHeads, state.proj_text.param_refs()}};

  Rng draw = Rng(cfg.seed).fork("grounding_probe");
  std::size_t d_feat = data.front().h->cols();
  for (int step = 0; step < cfg.steps; ++step) {
    std::size_t bs = std::min<std::size_t>(cfg.batch_size, data.size());
    numkit::DenseMatrix hx(bs, d_feat);
    numkit::DenseMatrix tx(bs, state.text_table.d_text());
    losses::ContrastiveBatch batch;
    for (std::size_t i = 0; i < bs; ++i) {
      const Sample& s = data[static_cast<std::size_t>(draw.uniform_int(
          0, static_cast<std::int64_t>(data.size()) - 1))];
      for (std::size_t j = 0; j < d_feat; ++j) hx(i, j) = (*s.h)(s.row, j);
      std::vector<double> enc =
          language::encode_text(s.text, state.text_table);
      for (std::size_t j = 0; j < tx.cols(); ++j) tx(i, j) = enc[j];
      batch.foreground.push_back(1);
      batch.texts.push_back(s.text);
    }
    state.proj_video.zero_grads();
    state.proj_text.zero_grads();
    numkit::StackTape tape_v, tape_t;
    std::vector<double> norms_v, norms_t;
    batch.z_video =
        numkit::normalize_rows(state.proj_video.forward(hx, tape_v), &norms_v);
    batch.z_text =
        numkit::normalize_rows(state.proj_text.forward(tx, tape_t), &norms_t);
    losses::ContrastiveResult res =
        losses::masked_loss(batch, state.temperature);
    if (!std::isfinite(res.value))
      throw NumericError("grounding probe: non-finite loss");
    state.proj_video.backward(
        tape_v,
        numkit::normalize_rows_backward(batch.z_video, norms_v, res.d_z_video));
    state.proj_text.backward(
        tape_t,
        numkit::normalize_rows_backward(batch.z_text, norms_t, res.d_z_text));
    numkit::sgd_step(groups, 0, sgd);
  }
  state.proj_video.set_training(false);
  state.proj_text.set_training(false);
}

}  // namespace clap::evalkit
