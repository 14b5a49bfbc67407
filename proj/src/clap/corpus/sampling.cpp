#include "clap/corpus/sampling.hpp"

#include <cmath>

namespace clap::corpus {

std::vector<ClipSample> sample_clips(const UntrimmedVideo& video,
                                     int clips_per_segment, SampleMode mode,
                                     Rng* rng) {
  if (clips_per_segment < 1)
    throw UsageError("sample_clips: clips_per_segment must be >= 1");
  if (mode == SampleMode::kTrain && rng == nullptr)
    throw UsageError("sample_clips: train mode needs an rng");

  std::vector<ClipSample> out;
  out.reserve(video.segments.size() * clips_per_segment);
  for (const Segment& seg : video.segments) {
    int start = static_cast<int>(std::floor(seg.t_start));
    int len = static_cast<int>(std::floor(seg.t_end - seg.t_start));
    if (len < 1) continue;
    for (int i = 0; i < clips_per_segment; ++i) {
      int offset;
      if (mode == SampleMode::kTrain) {
        offset = static_cast<int>(rng->uniform_int(0, len - 1));
      } else {
        offset = static_cast<int>(
            (static_cast<long long>(i) * len) / clips_per_segment);
      }
      int t = start + offset;
      ClipSample clip;
      clip.video_id = video.id;
      clip.t_start = t;
      clip.t_end = t + 1;
      clip.raw_feature = video.clip_features.at(t);
      clip.is_foreground = seg.is_foreground();
      clip.class_id = seg.class_id;
      out.push_back(std::move(clip));
    }
  }
  return out;
}

}  // namespace clap::corpus
