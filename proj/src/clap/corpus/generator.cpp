#include "clap/corpus/generator.hpp"

#include <algorithm>
#include <cmath>

#include "clap/numkit/dense.hpp"

namespace clap::corpus {

void GeneratorConfig::validate() const {
  if (n_videos < 1) throw ConfigError("generator: n_videos must be >= 1");
  if (n_classes < 1) throw ConfigError("generator: n_classes must be >= 1");
  if (d_raw < 1) throw ConfigError("generator: d_raw must be >= 1");
  if (mean_duration_s < 4)
    throw ConfigError("generator: mean_duration_s must be >= 4");
  if (min_segments < 1 || max_segments < min_segments)
    throw ConfigError("generator: bad segment count range");
  if (min_segment_len_s < 1 || max_segment_len_s < min_segment_len_s)
    throw ConfigError("generator: bad segment length range");
  if (max_gap_s < 1) throw ConfigError("generator: max_gap_s must be >= 1");
  if (sigma_fg < 0.0 || sigma_bg < 0.0)
    throw ConfigError("generator: noise scales must be >= 0");
  if (bg_offset_scale < 0.0)
    throw ConfigError("generator: bg_offset_scale must be >= 0");
  if (caption_vocab_size < n_classes)
    throw ConfigError("generator: caption_vocab_size must be >= n_classes");
  if (caption_coverage < 0.0 || caption_coverage > 1.0)
    throw ConfigError("generator: caption_coverage must be in [0, 1]");
  if (caption_min_tokens < 1 || caption_max_tokens < caption_min_tokens)
    throw ConfigError("generator: bad caption token range");
}

void validate_video(const UntrimmedVideo& v) {
  if (v.duration_s < 1) throw DataError("video " + v.id + ": empty timeline");
  if (static_cast<int>(v.clip_features.size()) != v.duration_s)
    throw DataError("video " + v.id +
                    ": clip_features length != duration_s");
  for (const auto& f : v.clip_features) {
    for (double x : f)
      if (!std::isfinite(x))
        throw DataError("video " + v.id + ": non-finite clip feature");
  }
  double prev_end = 0.0;
  double fg_total = 0.0;
  std::vector<Segment> segs = v.segments;
  std::sort(segs.begin(), segs.end(),
            [](const Segment& a, const Segment& b) {
              return a.t_start < b.t_start;
            });
  for (const Segment& s : segs) {
    if (!(s.t_start >= 0.0 && s.t_start < s.t_end &&
          s.t_end <= v.duration_s))
      throw DataError("video " + v.id + ": segment outside timeline");
    if (s.t_start < prev_end)
      throw DataError("video " + v.id + ": overlapping segments");
    prev_end = s.t_end;
    if (s.is_foreground()) fg_total += s.length();
  }
  // At least one background second unless foreground covers everything.
  double bg_total = static_cast<double>(v.duration_s) - fg_total;
  if (bg_total > 0.0 && bg_total < 1.0)
    throw DataError("video " + v.id + ": no full background second left");
  for (const TimedCaption& c : v.captions) {
    if (!(c.t_start < c.t_end))
      throw DataError("video " + v.id + ": degenerate caption interval");
    if (c.text.empty())
      throw DataError("video " + v.id + ": empty caption text");
  }
}

std::vector<std::string> make_class_names(int n_classes) {
  std::vector<std::string> names;
  names.reserve(n_classes);
  for (int c = 0; c < n_classes; ++c) {
    std::string idx = std::to_string(c);
    while (idx.size() < 3) idx.insert(idx.begin(), '0');
    names.push_back("action_" + idx);
  }
  return names;
}

namespace {

std::vector<double> unit_gaussian_vector(int dim, Rng& rng) {
  std::vector<double> v(dim);
  for (double& x : v) x = rng.gaussian();
  double n = numkit::l2_norm(v);
  if (n > 0.0)
    for (double& x : v) x /= n;
  return v;
}

}  // namespace

Corpus generate_corpus(const GeneratorConfig& cfg) {
  cfg.validate();
  Rng master(cfg.seed);

  std::vector<std::vector<double>> prototypes(cfg.n_classes);
  {
    Rng pr = master.fork("class_prototypes");
    for (int c = 0; c < cfg.n_classes; ++c)
      prototypes[c] = unit_gaussian_vector(cfg.d_raw, pr);
  }
  std::vector<double> bg_prototype;
  {
    Rng br = master.fork("background_prototype");
    bg_prototype = unit_gaussian_vector(cfg.d_raw, br);
  }
  int shard_size = cfg.caption_vocab_size / cfg.n_classes;

  Corpus corpus;
  corpus.class_names = make_class_names(cfg.n_classes);
  corpus.videos.reserve(cfg.n_videos);

  for (int v = 0; v < cfg.n_videos; ++v) {
    Rng rng = master.fork("video", static_cast<std::uint64_t>(v));
    UntrimmedVideo video;
    {
      std::string idx = std::to_string(v);
      while (idx.size() < 5) idx.insert(idx.begin(), '0');
      video.id = "video_" + idx;
    }
    int lo = std::max(4, (cfg.mean_duration_s * 3) / 5);
    int hi = std::max(lo, (cfg.mean_duration_s * 7) / 5);
    video.duration_s = static_cast<int>(rng.uniform_int(lo, hi));
    video.primary_class =
        static_cast<int>(rng.uniform_int(0, cfg.n_classes - 1));

    // Foreground layout: alternating background gaps and action segments,
    // always leaving at least one trailing background second.
    int target = static_cast<int>(
        rng.uniform_int(cfg.min_segments, cfg.max_segments));
    std::vector<Segment> fg;
    int pos = 0;
    for (int s = 0; s < target; ++s) {
      int gap = static_cast<int>(rng.uniform_int(1, cfg.max_gap_s));
      int len = static_cast<int>(
          rng.uniform_int(cfg.min_segment_len_s, cfg.max_segment_len_s));
      if (pos + gap + len + 1 > video.duration_s) break;
      fg.push_back({static_cast<double>(pos + gap),
                    static_cast<double>(pos + gap + len),
                    video.primary_class});
      pos += gap + len;
    }
    if (fg.empty()) {
      int len = std::min(cfg.min_segment_len_s, video.duration_s - 2);
      if (len < 1) len = 1;
      fg.push_back({1.0, static_cast<double>(1 + len), video.primary_class});
    }

    // Full tiling: explicit background segments around the foreground.
    double cursor = 0.0;
    for (const Segment& s : fg) {
      if (s.t_start > cursor)
        video.segments.push_back({cursor, s.t_start, std::nullopt});
      video.segments.push_back(s);
      cursor = s.t_end;
    }
    if (cursor < video.duration_s)
      video.segments.push_back(
          {cursor, static_cast<double>(video.duration_s), std::nullopt});

    std::vector<double> bg_offset(cfg.d_raw);
    for (double& x : bg_offset) x = cfg.bg_offset_scale * rng.gaussian();

    video.clip_features.resize(video.duration_s);
    for (int t = 0; t < video.duration_s; ++t) {
      const Segment* owner = nullptr;
      for (const Segment& s : video.segments) {
        if (t >= s.t_start && t < s.t_end) {
          owner = &s;
          break;
        }
      }
      std::vector<double> feat(cfg.d_raw);
      if (owner != nullptr && owner->is_foreground()) {
        const auto& proto = prototypes[*owner->class_id];
        for (int j = 0; j < cfg.d_raw; ++j)
          feat[j] = proto[j] + cfg.sigma_fg * rng.gaussian();
      } else {
        for (int j = 0; j < cfg.d_raw; ++j)
          feat[j] =
              bg_prototype[j] + bg_offset[j] + cfg.sigma_bg * rng.gaussian();
      }
      video.clip_features[t] = std::move(feat);
    }

    for (const Segment& s : fg) {
      if (!rng.bernoulli(cfg.caption_coverage)) continue;
      int n_tokens = static_cast<int>(
          rng.uniform_int(cfg.caption_min_tokens, cfg.caption_max_tokens));
      std::string text;
      int base = *s.class_id * shard_size;
      for (int k = 0; k < n_tokens; ++k) {
        int tok = base + static_cast<int>(rng.uniform_int(0, shard_size - 1));
        if (!text.empty()) text += ' ';
        text += "w" + std::to_string(tok);
      }
      video.captions.push_back({s.t_start, s.t_end, std::move(text)});
    }

    validate_video(video);
    corpus.videos.push_back(std::move(video));
  }
  return corpus;
}

}  // namespace clap::corpus
