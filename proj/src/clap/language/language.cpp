#include "clap/language/language.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace clap::language {

TextEncoderTable TextEncoderTable::seeded(std::size_t vocab_hash_size,
                                          std::size_t d_text,
                                          std::uint64_t seed) {
  if (vocab_hash_size == 0 || d_text == 0)
    throw ConfigError("text table: zero dimensions");
  TextEncoderTable t;
  t.vocab_hash_size = vocab_hash_size;
  t.table = numkit::DenseMatrix(vocab_hash_size, d_text);
  Rng rng = Rng(seed).fork("text_table");
  double scale = 1.0 / std::sqrt(static_cast<double>(d_text));
  for (double& x : t.table.data()) x = scale * rng.gaussian();
  return t;
}

std::uint64_t TextEncoderTable::checksum() const {
  return numkit::checksum(table.data());
}

TextDescription generate_prompt(const std::string& action_name,
                                bool is_foreground) {
  if (action_name.empty())
    throw UsageError("generate_prompt: empty action name");
  TextDescription d;
  d.text = (is_foreground ? "foreground of " : "background of ") + action_name;
  d.origin = TextOrigin::kSynthetic;
  d.is_foreground = is_foreground;
  return d;
}

std::optional<corpus::TimedCaption> assign_caption(
    const corpus::ClipSample& clip,
    const std::vector<corpus::TimedCaption>& captions) {
  double clip_center = 0.5 * (clip.t_start + clip.t_end);
  const corpus::TimedCaption* best = nullptr;
  double best_dist = 0.0;
  for (const corpus::TimedCaption& c : captions) {
    double overlap =
        std::min(clip.t_end, c.t_end) - std::max(clip.t_start, c.t_start);
    if (overlap <= 0.0) continue;
    double center = 0.5 * (c.t_start + c.t_end);
    double dist = std::fabs(center - clip_center);
    if (best == nullptr || dist < best_dist ||
        (dist == best_dist && c.t_start < best->t_start)) {
      best = &c;
      best_dist = dist;
    }
  }
  if (best == nullptr) return std::nullopt;
  return *best;
}

namespace {

// Action name for a background clip: nearest foreground segment by
// interval distance, ties to the earlier segment.
int background_action_class(const corpus::ClipSample& clip,
                            const corpus::UntrimmedVideo& video) {
  const corpus::Segment* best = nullptr;
  double best_dist = 0.0;
  for (const corpus::Segment& s : video.segments) {
    if (!s.is_foreground()) continue;
    double dist = std::max({0.0, s.t_start - clip.t_end,
                            clip.t_start - s.t_end});
    if (best == nullptr || dist < best_dist) {
      best = &s;
      best_dist = dist;
    }
  }
  return best != nullptr ? *best->class_id : video.primary_class;
}

}  // namespace

TextDescription describe_clip(const corpus::ClipSample& clip,
                              const corpus::UntrimmedVideo& video,
                              const std::vector<std::string>& class_names,
                              const PromptPolicy& policy, Rng& rng) {
  int action_class = clip.is_foreground ? *clip.class_id
                                        : background_action_class(clip, video);
  if (action_class < 0 || action_class >= static_cast<int>(class_names.size()))
    throw DataError("describe_clip: class id outside vocabulary");
  const std::string& action = class_names[action_class];

  bool try_caption = false;
  switch (policy.variant) {
    case PromptVariant::kPromptOnly:
      break;
    case PromptVariant::kClapDagger:
      try_caption =
          clip.is_foreground && rng.bernoulli(policy.caption_probability);
      break;
    case PromptVariant::kClap:
      try_caption = rng.bernoulli(policy.caption_probability);
      break;
  }
  if (try_caption) {
    if (auto cap = assign_caption(clip, video.captions)) {
      return {cap->text, TextOrigin::kCaption, clip.is_foreground};
    }
  }
  return generate_prompt(action, clip.is_foreground);
}

std::uint64_t token_hash(std::string_view token) { return fnv1a64(token); }

std::vector<double> encode_text(const std::string& text,
                                const TextEncoderTable& table) {
  if (table.vocab_hash_size == 0) throw UsageError("encode_text: empty table");
  std::vector<double> acc(table.d_text(), 0.0);
  std::size_t n_tokens = 0;
  std::string token;
  auto flush = [&] {
    if (token.empty()) return;
    std::size_t row = static_cast<std::size_t>(token_hash(token) %
                                               table.vocab_hash_size);
    for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += table.table(row, j);
    ++n_tokens;
    token.clear();
  };
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      flush();
    } else {
      token += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    }
  }
  flush();
  if (n_tokens == 0) throw UsageError("encode_text: empty text");
  for (double& x : acc) x /= static_cast<double>(n_tokens);
  return acc;
}

}  // namespace clap::language
