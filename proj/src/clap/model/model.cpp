#include "clap/model/model.hpp"

namespace clap::model {

void Dims::validate() const {
  if (d_raw < 1 || d_hidden < 1 || d_feat < 1 || d_embed < 1 || d_text < 1)
    throw ConfigError("model dims: all dimensions must be >= 1");
  if (n_classes < 1) throw ConfigError("model dims: n_classes must be >= 1");
  if (encoder_blocks < 1)
    throw ConfigError("model dims: encoder_blocks must be >= 1");
  if (proj_pairs < 1) throw ConfigError("model dims: proj_pairs must be >= 1");
  if (vocab_hash_size < 1)
    throw ConfigError("model dims: vocab_hash_size must be >= 1");
}

ModelState ModelState::init(const Dims& dims, double temperature,
                            std::uint64_t seed) {
  dims.validate();
  if (!(temperature > 0.0))
    throw ConfigError("model: temperature must be positive");
  ModelState s;
  s.dims = dims;
  s.temperature = temperature;
  s.meta.seed = seed;
  Rng rng = Rng(seed).fork("model_init");

  // Backbone: encoder_blocks of affine+relu, hidden width d_hidden,
  // final width d_feat.
  int in = dims.d_raw;
  for (int b = 0; b < dims.encoder_blocks; ++b) {
    int out = (b + 1 == dims.encoder_blocks) ? dims.d_feat : dims.d_hidden;
    s.video_encoder.push(numkit::AffineLayer::glorot(in, out, rng));
    s.video_encoder.push(numkit::ReluLayer{});
    in = out;
  }

  auto make_projection = [&](int d_in, int d_out, int pairs) {
    numkit::LayerStack stack;
    int cur = d_in;
    for (int p = 0; p < pairs; ++p) {
      int next = (p + 1 == pairs) ? d_out : d_out;
      stack.push(numkit::StandardizeLayer(cur));
      stack.push(numkit::AffineLayer::glorot(cur, next, rng));
      cur = next;
    }
    return stack;
  };
  s.proj_video = make_projection(dims.d_feat, dims.d_embed, dims.proj_pairs);
  s.proj_text = make_projection(dims.d_text, dims.d_embed, dims.proj_pairs);

  s.head_class.push(
      numkit::AffineLayer::glorot(dims.d_feat, dims.n_classes, rng));
  s.head_region.push(numkit::AffineLayer::glorot(dims.d_feat, 2, rng));

  s.text_table = language::TextEncoderTable::seeded(
      static_cast<std::size_t>(dims.vocab_hash_size),
      static_cast<std::size_t>(dims.d_text), seed);
  return s;
}

void ModelState::set_training(bool t) {
  video_encoder.set_training(t);
  proj_video.set_training(t);
  proj_text.set_training(t);
  head_class.set_training(t);
  head_region.set_training(t);
}

std::uint64_t ModelState::encoder_checksum() const {
  return video_encoder.state_checksum();
}

std::uint64_t ModelState::full_checksum() const {
  std::uint64_t h = video_encoder.state_checksum();
  h = fnv1a64_u64(proj_video.state_checksum(), h);
  h = fnv1a64_u64(proj_text.state_checksum(), h);
  h = fnv1a64_u64(head_class.state_checksum(), h);
  h = fnv1a64_u64(head_region.state_checksum(), h);
  h = fnv1a64_u64(text_table.checksum(), h);
  return h;
}

VideoEmbedding embed_video(const ModelState& state,
                           const corpus::ClipSample& clip) {
  if (static_cast<int>(clip.raw_feature.size()) != state.dims.d_raw)
    throw ConfigError("embed_video: clip feature dimension mismatch");
  numkit::DenseMatrix x(1, clip.raw_feature.size());
  for (std::size_t j = 0; j < clip.raw_feature.size(); ++j)
    x(0, j) = clip.raw_feature[j];
  numkit::DenseMatrix h = state.video_encoder.forward_eval(x);
  numkit::DenseMatrix u = state.proj_video.forward_eval(h);
  numkit::DenseMatrix z = numkit::normalize_rows(u);
  VideoEmbedding e;
  e.h.assign(h.row(0).begin(), h.row(0).end());
  e.z.assign(z.row(0).begin(), z.row(0).end());
  return e;
}

std::vector<double> embed_text(const ModelState& state,
                               const language::TextDescription& desc) {
  std::vector<double> enc = language::encode_text(desc.text, state.text_table);
  numkit::DenseMatrix t(1, enc.size());
  for (std::size_t j = 0; j < enc.size(); ++j) t(0, j) = enc[j];
  numkit::DenseMatrix v = state.proj_text.forward_eval(t);
  numkit::DenseMatrix z = numkit::normalize_rows(v);
  return {z.row(0).begin(), z.row(0).end()};
}

HeadLogits head_logits(const ModelState& state, std::span<const double> h) {
  if (static_cast<int>(h.size()) != state.dims.d_feat)
    throw ConfigError("head_logits: feature dimension mismatch");
  numkit::DenseMatrix x(1, h.size());
  for (std::size_t j = 0; j < h.size(); ++j) x(0, j) = h[j];
  numkit::DenseMatrix c = state.head_class.forward_eval(x);
  numkit::DenseMatrix r = state.head_region.forward_eval(x);
  HeadLogits out;
  out.class_logits.assign(c.row(0).begin(), c.row(0).end());
  out.region_logits.assign(r.row(0).begin(), r.row(0).end());
  return out;
}

}  // namespace clap::model
