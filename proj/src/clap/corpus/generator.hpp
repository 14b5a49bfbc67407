#pragma once

#include <cstdint>

#include "clap/corpus/types.hpp"
#include "clap/rng.hpp"

namespace clap::corpus {

// Synthetic untrimmed-video corpus. Each action class gets a latent unit
// prototype; foreground seconds are noisy copies of their class prototype,
// background seconds share one global prototype plus a per-video offset.
// Captions are drawn from a class-specific vocabulary shard so the text
// carries class signal; background spans are never captioned.
struct GeneratorConfig {
  int n_videos = 200;
  int n_classes = 10;
  int d_raw = 32;
  int mean_duration_s = 30;
  int min_segments = 1;
  int max_segments = 4;
  int min_segment_len_s = 2;
  int max_segment_len_s = 8;
  int max_gap_s = 5;
  double sigma_fg = 0.35;
  double sigma_bg = 0.35;
  double bg_offset_scale = 0.25;
  int caption_vocab_size = 400;
  double caption_coverage = 0.6;
  int caption_min_tokens = 3;
  int caption_max_tokens = 8;
  std::uint64_t seed = 1;

  void validate() const;  // throws ConfigError
};

// Deterministic for a given config. Every video derives its own rng stream
// from (seed, video index), so parallel and serial generation agree.
Corpus generate_corpus(const GeneratorConfig& cfg);

std::vector<std::string> make_class_names(int n_classes);

}  // namespace clap::corpus
