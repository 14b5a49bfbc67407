#pragma once

#include "clap/evalkit/localize.hpp"

namespace clap::evalkit {

// Class partitions for episodic evaluation. Novel classes (val + test) stay
// unseen during post-pre-training; the protocol checks that against the
// checkpoint's recorded training videos.
struct EpisodeSpec {
  std::vector<int> base_classes;
  std::vector<int> val_classes;
  std::vector<int> test_classes;
  int shots = 5;
  int episodes = 20;
  std::uint64_t seed = 1;

  std::vector<int> novel_classes() const;
  void validate() const;
};

struct FewshotResult {
  std::vector<MapSuite> per_episode;
  MapSuite mean;
  MapSuite stddev;  // sample std over episodes
};

// Per episode: K support videos per novel class form mean-foreground
// prototypes; query videos are scored window-by-window by cosine to each
// prototype and localized like TAL.
FewshotResult fewshot_protocol(const trainer::FeatureTable& features,
                               const corpus::Corpus& corpus,
                               const EpisodeSpec& spec,
                               const WindowConfig& windows);

}  // namespace clap::evalkit
