#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "clap/corpus/types.hpp"
#include "clap/numkit/dense.hpp"
#include "clap/rng.hpp"

namespace clap::language {

enum class TextOrigin { kSynthetic, kCaption };

struct TextDescription {
  std::string text;
  TextOrigin origin = TextOrigin::kSynthetic;
  bool is_foreground = false;
};

// Frozen text encoder: a seeded random embedding table addressed by token
// hash, pooled by averaging. Never updated by training.
struct TextEncoderTable {
  std::size_t vocab_hash_size = 0;
  numkit::DenseMatrix table;  // (vocab_hash_size, d_text)

  static TextEncoderTable seeded(std::size_t vocab_hash_size,
                                 std::size_t d_text, std::uint64_t seed);

  std::size_t d_text() const { return table.cols(); }
  std::uint64_t checksum() const;
};

enum class PromptVariant {
  kClap,        // 0.5 caption / prompt mixing for every clip
  kPromptOnly,  // synthetic prompts only
  kClapDagger,  // background always prompts; foreground mixes
};

struct PromptPolicy {
  double caption_probability = 0.5;
  PromptVariant variant = PromptVariant::kClap;
};

// "foreground of <action>" / "background of <action>".
TextDescription generate_prompt(const std::string& action_name,
                                bool is_foreground);

// Among captions overlapping the clip, the one whose interval center is
// nearest the clip center; ties broken by lowest t_start then input order.
// Absent when nothing overlaps.
std::optional<corpus::TimedCaption> assign_caption(
    const corpus::ClipSample& clip,
    const std::vector<corpus::TimedCaption>& captions);

// Full description procedure under a policy. Background prompts name the
// temporally nearest foreground segment's action, falling back to the
// video's primary class.
TextDescription describe_clip(const corpus::ClipSample& clip,
                              const corpus::UntrimmedVideo& video,
                              const std::vector<std::string>& class_names,
                              const PromptPolicy& policy, Rng& rng);

// FNV-1a 64 over the token bytes, reduced modulo the table size.
std::uint64_t token_hash(std::string_view token);

// Lowercase, split on whitespace, hash each token, average the table rows.
std::vector<double> encode_text(const std::string& text,
                                const TextEncoderTable& table);

}  // namespace clap::language
