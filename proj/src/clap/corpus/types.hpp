#pragma once

#include <optional>
#include <string>
#include <vector>

#include "clap/common.hpp"

namespace clap::corpus {

// Labeled span on a video timeline. Background spans carry no class id.
struct Segment {
  double t_start = 0.0;
  double t_end = 0.0;
  std::optional<int> class_id;

  bool is_foreground() const { return class_id.has_value(); }
  double length() const { return t_end - t_start; }
};

struct TimedCaption {
  double t_start = 0.0;
  double t_end = 0.0;
  std::string text;
};

// A timeline of per-second features plus labeled segments and timed
// captions. Segments tile the timeline without overlapping; every
// foreground segment carries a class id.
struct UntrimmedVideo {
  std::string id;
  int duration_s = 0;
  int primary_class = 0;
  std::vector<std::vector<double>> clip_features;  // one vector per second
  std::vector<Segment> segments;
  std::vector<TimedCaption> captions;
};

// One sampled one-second clip. class_id is present iff is_foreground.
struct ClipSample {
  std::string video_id;
  double t_start = 0.0;
  double t_end = 0.0;
  std::vector<double> raw_feature;
  bool is_foreground = false;
  std::optional<int> class_id;
};

struct Corpus {
  std::vector<UntrimmedVideo> videos;
  std::vector<std::string> class_names;
};

// Throws DataError describing the first violated invariant.
void validate_video(const UntrimmedVideo& video);

}  // namespace clap::corpus
