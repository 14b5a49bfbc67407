#include "clap/evalkit/fewshot.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace clap::evalkit {

std::vector<int> EpisodeSpec::novel_classes() const {
  std::vector<int> novel = val_classes;
  novel.insert(novel.end(), test_classes.begin(), test_classes.end());
  std::sort(novel.begin(), novel.end());
  return novel;
}

void EpisodeSpec::validate() const {
  std::set<int> seen;
  for (const auto* part : {&base_classes, &val_classes, &test_classes}) {
    for (int c : *part) {
      if (!seen.insert(c).second)
        throw ConfigError("episode spec: class partitions overlap");
    }
  }
  if (shots < 1) throw ConfigError("episode spec: shots must be >= 1");
  if (episodes < 1) throw ConfigError("episode spec: episodes must be >= 1");
  if (novel_classes().empty())
    throw ConfigError("episode spec: no novel classes");
}

namespace {

std::vector<double> class_prototype(
    const trainer::FeatureTable& features,
    const std::vector<const corpus::UntrimmedVideo*>& support) {
  std::vector<double> proto;
  std::size_t count = 0;
  for (const auto* v : support) {
    auto it = features.by_video.find(v->id);
    if (it == features.by_video.end())
      throw DataError("missing features for video " + v->id);
    const numkit::DenseMatrix& h = it->second;
    if (proto.empty()) proto.assign(h.cols(), 0.0);
    for (const corpus::Segment& s : v->segments) {
      if (!s.is_foreground()) continue;
      for (int t = static_cast<int>(s.t_start); t < s.t_end; ++t) {
        for (std::size_t j = 0; j < h.cols(); ++j) proto[j] += h(t, j);
        ++count;
      }
    }
  }
  if (count == 0) throw DataError("prototype: no foreground seconds");
  for (double& x : proto) x /= static_cast<double>(count);
  return proto;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  double na = numkit::l2_norm(a);
  double nb = numkit::l2_norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return numkit::dot(a, b) / (na * nb);
}

MapSuite suite_scale(MapSuite s, double k) {
  s.map_050 *= k;
  s.map_075 *= k;
  s.map_095 *= k;
  s.amap *= k;
  return s;
}

MapSuite suite_add(MapSuite a, const MapSuite& b) {
  a.map_050 += b.map_050;
  a.map_075 += b.map_075;
  a.map_095 += b.map_095;
  a.amap += b.amap;
  return a;
}

}  // namespace

FewshotResult fewshot_protocol(const trainer::FeatureTable& features,
                               const corpus::Corpus& corpus,
                               const EpisodeSpec& spec,
                               const WindowConfig& windows) {
  spec.validate();
  std::vector<int> novel = spec.novel_classes();

  std::map<int, std::vector<const corpus::UntrimmedVideo*>> by_class;
  for (const corpus::UntrimmedVideo& v : corpus.videos)
    by_class[v.primary_class].push_back(&v);

  for (int c : novel) {
    auto it = by_class.find(c);
    std::size_t n = it == by_class.end() ? 0 : it->second.size();
    if (n < static_cast<std::size_t>(spec.shots) + 1)
      throw DataError("few-shot: class " + std::to_string(c) + " has " +
                      std::to_string(n) + " videos, needs at least " +
                      std::to_string(spec.shots + 1));
  }

  Rng master(spec.seed);
  FewshotResult result;
  result.per_episode.reserve(spec.episodes);
  for (int e = 0; e < spec.episodes; ++e) {
    Rng rng = master.fork("episode", static_cast<std::uint64_t>(e));
    std::map<int, std::vector<double>> prototypes;
    std::vector<const corpus::UntrimmedVideo*> queries;
    for (int c : novel) {
      std::vector<const corpus::UntrimmedVideo*> pool = by_class[c];
      // partial shuffle: the first `shots` entries become the support set
      for (int i = 0; i < spec.shots; ++i) {
        std::size_t j = static_cast<std::size_t>(rng.uniform_int(
            i, static_cast<std::int64_t>(pool.size()) - 1));
        std::swap(pool[i], pool[j]);
      }
      std::vector<const corpus::UntrimmedVideo*> support(
          pool.begin(), pool.begin() + spec.shots);
      prototypes[c] = class_prototype(features, support);
      queries.insert(queries.end(), pool.begin() + spec.shots, pool.end());
    }
    std::sort(queries.begin(), queries.end(),
              [](const auto* a, const auto* b) { return a->id < b->id; });

    std::vector<Detection> all;
    for (const auto* v : queries) {
      const numkit::DenseMatrix& h = features.by_video.at(v->id);
      int duration = static_cast<int>(h.rows());
      numkit::DenseMatrix prefix(duration + 1, h.cols(), 0.0);
      for (int t = 0; t < duration; ++t)
        for (std::size_t j = 0; j < h.cols(); ++j)
          prefix(t + 1, j) = prefix(t, j) + h(t, j);

      std::vector<Detection> video_dets;
      for (int c : novel) {
        std::vector<Detection> dets;
        const std::vector<double>& proto = prototypes[c];
        for (int scale : windows.scales) {
          if (scale < 1 || scale > duration) continue;
          for (int a = 0; a + scale <= duration; a += windows.stride) {
            int b = a + scale;
            std::vector<double> mean(h.cols());
            for (std::size_t j = 0; j < h.cols(); ++j)
              mean[j] = (prefix(b, j) - prefix(a, j)) / scale;
            dets.push_back({v->id,
                            {static_cast<double>(a), static_cast<double>(b)},
                            c, cosine(mean, proto)});
          }
        }
        std::vector<Detection> kept = nms(std::move(dets),
                                          windows.nms_threshold);
        video_dets.insert(video_dets.end(), kept.begin(), kept.end());
      }
      std::sort(video_dets.begin(), video_dets.end(),
                [](const Detection& a, const Detection& b) {
                  if (a.score != b.score) return a.score > b.score;
                  if (a.interval.t_start != b.interval.t_start)
                    return a.interval.t_start < b.interval.t_start;
                  return a.class_id < b.class_id;
                });
      if (static_cast<int>(video_dets.size()) > windows.top_k_per_video)
        video_dets.resize(windows.top_k_per_video);
      all.insert(all.end(), video_dets.begin(), video_dets.end());
    }
    std::vector<GroundTruth> gts = foreground_ground_truth(queries);
    result.per_episode.push_back(map_suite(all, gts));
  }

  MapSuite sum{};
  for (const MapSuite& s : result.per_episode) sum = suite_add(sum, s);
  result.mean = suite_scale(sum, 1.0 / result.per_episode.size());
  MapSuite var{};
  if (result.per_episode.size() > 1) {
    for (const MapSuite& s : result.per_episode) {
      MapSuite d = s;
      d.map_050 -= result.mean.map_050;
      d.map_075 -= result.mean.map_075;
      d.map_095 -= result.mean.map_095;
      d.amap -= result.mean.amap;
      var.map_050 += d.map_050 * d.map_050;
      var.map_075 += d.map_075 * d.map_075;
      var.map_095 += d.map_095 * d.map_095;
      var.amap += d.amap * d.amap;
    }
    var = suite_scale(var, 1.0 / (result.per_episode.size() - 1));
  }
  result.stddev = {std::sqrt(var.map_050), std::sqrt(var.map_075),
                   std::sqrt(var.map_095), std::sqrt(var.amap)};
  return result;
}

}  // namespace clap::evalkit
