#pragma once

#include "clap/corpus/types.hpp"
#include "clap/rng.hpp"

namespace clap::corpus {

enum class SampleMode { kTrain, kEval };

// Draws clips_per_segment one-second clips from every segment of the video
// (foreground and background alike). Train mode samples start offsets
// uniformly at random with replacement; eval mode places them at uniform
// spacing, offset_i = floor(i * len / n), consuming no randomness. Segments
// shorter than clips_per_segment seconds repeat positions either way.
std::vector<ClipSample> sample_clips(const UntrimmedVideo& video,
                                     int clips_per_segment, SampleMode mode,
                                     Rng* rng);

}  // namespace clap::corpus
