#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "clap/corpus/types.hpp"
#include "clap/language/language.hpp"
#include "clap/numkit/layers.hpp"

namespace clap::model {

struct Dims {
  int d_raw = 32;
  int d_hidden = 64;
  int d_feat = 32;
  int d_embed = 16;
  int d_text = 24;
  int n_classes = 10;
  int encoder_blocks = 2;
  int proj_pairs = 1;
  int vocab_hash_size = 512;

  void validate() const;
};

struct ModelMeta {
  std::uint64_t seed = 0;
  std::string objective;
  std::string config_hash;
  std::vector<std::string> trained_video_ids;
};

// Trainable dual encoder: video backbone, video/text projections into the
// shared embedding space, and the region/class heads. The text table is
// frozen for the lifetime of the model.
struct ModelState {
  Dims dims;
  double temperature = 0.07;
  numkit::LayerStack video_encoder;  // affine+relu blocks, d_raw -> d_feat
  numkit::LayerStack proj_video;     // standardize + affine, d_feat -> d_embed
  numkit::LayerStack proj_text;      // standardize + affine, d_text -> d_embed
  numkit::LayerStack head_class;     // affine, d_feat -> n_classes
  numkit::LayerStack head_region;    // affine, d_feat -> 2
  language::TextEncoderTable text_table;
  ModelMeta meta;

  static ModelState init(const Dims& dims, double temperature,
                         std::uint64_t seed);

  void set_training(bool t);
  // Backbone parameters only; the frozen-extraction assertions use this.
  std::uint64_t encoder_checksum() const;
  std::uint64_t full_checksum() const;
};

struct VideoEmbedding {
  std::vector<double> h;  // d_feat, the representation downstream tasks use
  std::vector<double> z;  // d_embed, unit norm
};

// Single-clip eval-mode forwards.
VideoEmbedding embed_video(const ModelState& state,
                           const corpus::ClipSample& clip);
std::vector<double> embed_text(const ModelState& state,
                               const language::TextDescription& desc);

struct HeadLogits {
  std::vector<double> class_logits;   // n_classes
  std::vector<double> region_logits;  // 2
};

HeadLogits head_logits(const ModelState& state, std::span<const double> h);

}  // namespace clap::model
