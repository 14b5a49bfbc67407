#pragma once

#include <string>
#include <vector>

#include "clap/corpus/types.hpp"

namespace clap::corpus {

// JSONL, one video per line:
//   {"id", "duration_s", "primary_class", "clip_features", "segments", "captions"}
// Feature values round-trip bit-exactly.
void save_corpus(const std::vector<UntrimmedVideo>& videos,
                 const std::string& path);
std::vector<UntrimmedVideo> load_corpus(const std::string& path);

// JSON array of class-name strings indexed by class id.
void save_class_vocab(const std::vector<std::string>& names,
                      const std::string& path);
std::vector<std::string> load_class_vocab(const std::string& path);

}  // namespace clap::corpus
