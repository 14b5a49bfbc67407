#include "clap/trainer/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"

namespace clap::trainer {

using nlohmann::json;

const char* objective_name(TrainObjective o) {
  switch (o) {
    case TrainObjective::kTac: return "tac";
    case TrainObjective::kClapClip: return "clap-clip";
    case TrainObjective::kClapMask: return "clap-mask";
    case TrainObjective::kClap: return "clap";
    case TrainObjective::kClapDagger: return "clap-dagger";
    case TrainObjective::kClapNoCls: return "clap-no-cls";
  }
  return "?";
}

TrainObjective parse_objective(const std::string& name) {
  if (name == "tac") return TrainObjective::kTac;
  if (name == "clap-clip") return TrainObjective::kClapClip;
  if (name == "clap-mask") return TrainObjective::kClapMask;
  if (name == "clap") return TrainObjective::kClap;
  if (name == "clap-dagger") return TrainObjective::kClapDagger;
  if (name == "clap-no-cls") return TrainObjective::kClapNoCls;
  throw ConfigError("unknown objective '" + name + "'");
}

bool has_contrastive_term(TrainObjective o) {
  return o != TrainObjective::kTac;
}

losses::Objective loss_objective(TrainObjective o) {
  switch (o) {
    case TrainObjective::kTac: return losses::Objective::kTac;
    case TrainObjective::kClapClip: return losses::Objective::kClapClip;
    case TrainObjective::kClapMask: return losses::Objective::kClapMask;
    case TrainObjective::kClap: return losses::Objective::kClap;
    case TrainObjective::kClapDagger: return losses::Objective::kClap;
    case TrainObjective::kClapNoCls: return losses::Objective::kClapNoCls;
  }
  return losses::Objective::kClap;
}

language::PromptPolicy policy_for(TrainObjective o,
                                  double caption_probability) {
  language::PromptPolicy p;
  p.caption_probability = caption_probability;
  switch (o) {
    case TrainObjective::kClapClip:
    case TrainObjective::kClapMask:
      p.variant = language::PromptVariant::kPromptOnly;
      break;
    case TrainObjective::kClapDagger:
      p.variant = language::PromptVariant::kClapDagger;
      break;
    default:
      p.variant = language::PromptVariant::kClap;
      break;
  }
  return p;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("trainer: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("trainer: batch_size must be >= 1");
  if (has_contrastive_term(objective) && batch_size < 2)
    throw ConfigError(
        "trainer: contrastive objectives need batch_size >= 2");
  if (clips_per_segment < 1)
    throw ConfigError("trainer: clips_per_segment must be >= 1");
  if (caption_probability < 0.0 || caption_probability > 1.0)
    throw ConfigError("trainer: caption_probability must be in [0, 1]");
  if (!(temperature > 0.0))
    throw ConfigError("trainer: temperature must be positive");
  if (checkpoint_every_epochs < 0)
    throw ConfigError("trainer: checkpoint_every_epochs must be >= 0");
  sgd.validate();
}

AssembledBatch assemble_batch(
    const std::vector<const corpus::UntrimmedVideo*>& videos,
    const std::vector<std::string>& class_names, const TrainConfig& cfg,
    Rng& rng) {
  if (videos.empty()) throw ConfigError("assemble_batch: no training videos");
  language::PromptPolicy policy =
      policy_for(cfg.objective, cfg.caption_probability);
  bool contrastive = has_contrastive_term(cfg.objective);

  AssembledBatch out;
  out.clips.reserve(cfg.batch_size);
  while (static_cast<int>(out.clips.size()) < cfg.batch_size) {
    const corpus::UntrimmedVideo* video = videos[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(videos.size()) - 1))];
    std::vector<corpus::ClipSample> clips = corpus::sample_clips(
        *video, cfg.clips_per_segment, corpus::SampleMode::kTrain, &rng);
    if (clips.empty()) continue;
    corpus::ClipSample clip = clips[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(clips.size()) - 1))];
    out.labels.region.push_back(clip.is_foreground ? 1 : 0);
    out.labels.cls.push_back(clip.class_id.value_or(-1));
    if (contrastive)
      out.descriptions.push_back(
          language::describe_clip(clip, *video, class_names, policy, rng));
    out.clips.push_back(std::move(clip));
  }
  return out;
}

namespace {

numkit::DenseMatrix clips_to_matrix(
    const std::vector<corpus::ClipSample>& clips) {
  if (clips.empty()) throw UsageError("empty clip batch");
  numkit::DenseMatrix x(clips.size(), clips[0].raw_feature.size());
  for (std::size_t i = 0; i < clips.size(); ++i) {
    if (clips[i].raw_feature.size() != x.cols())
      throw ConfigError("clip batch: inconsistent feature dimension");
    for (std::size_t j = 0; j < x.cols(); ++j)
      x(i, j) = clips[i].raw_feature[j];
  }
  return x;
}

numkit::DenseMatrix texts_to_matrix(
    const std::vector<language::TextDescription>& descs,
    const language::TextEncoderTable& table) {
  numkit::DenseMatrix t(descs.size(), table.d_text());
  for (std::size_t i = 0; i < descs.size(); ++i) {
    std::vector<double> enc = language::encode_text(descs[i].text, table);
    for (std::size_t j = 0; j < t.cols(); ++j) t(i, j) = enc[j];
  }
  return t;
}

bool corpus_has_foreground(
    const std::vector<const corpus::UntrimmedVideo*>& videos) {
  for (const auto* v : videos)
    for (const corpus::Segment& s : v->segments)
      if (s.is_foreground()) return true;
  return false;
}

std::string dump_batch_for_diagnostics(const AssembledBatch& batch) {
  json clips = json::array();
  for (const corpus::ClipSample& c : batch.clips) {
    clips.push_back({{"video_id", c.video_id},
                     {"t_start", c.t_start},
                     {"t_end", c.t_end},
                     {"is_foreground", c.is_foreground}});
  }
  return json{{"clips", std::move(clips)}}.dump();
}

}  // namespace

BuiltBatch build_batch(const model::ModelState& state,
                       const std::vector<const corpus::UntrimmedVideo*>& videos,
                       const std::vector<std::string>& class_names,
                       const TrainConfig& cfg, Rng& rng) {
  AssembledBatch raw = assemble_batch(videos, class_names, cfg, rng);
  BuiltBatch built;
  built.labels = raw.labels;
  built.batch.foreground.reserve(raw.clips.size());
  for (const corpus::ClipSample& c : raw.clips)
    built.batch.foreground.push_back(c.is_foreground ? 1 : 0);
  if (!raw.descriptions.empty()) {
    numkit::DenseMatrix x = clips_to_matrix(raw.clips);
    numkit::DenseMatrix h = state.video_encoder.forward_eval(x);
    built.batch.z_video =
        numkit::normalize_rows(state.proj_video.forward_eval(h));
    numkit::DenseMatrix t = texts_to_matrix(raw.descriptions, state.text_table);
    built.batch.z_text =
        numkit::normalize_rows(state.proj_text.forward_eval(t));
    for (const language::TextDescription& d : raw.descriptions)
      built.batch.texts.push_back(d.text);
  }
  return built;
}

TrainResult train(const corpus::Corpus& corpus_data,
                  const std::vector<std::string>& train_video_ids,
                  const model::Dims& dims, const TrainConfig& cfg,
                  const CheckpointSink& sink) {
  cfg.validate();
  std::vector<const corpus::UntrimmedVideo*> videos;
  videos.reserve(train_video_ids.size());
  for (const std::string& id : train_video_ids) {
    auto it = std::find_if(
        corpus_data.videos.begin(), corpus_data.videos.end(),
        [&](const corpus::UntrimmedVideo& v) { return v.id == id; });
    if (it == corpus_data.videos.end())
      throw DataError("train: video id not in corpus: " + id);
    videos.push_back(&*it);
  }
  if (videos.empty()) throw ConfigError("train: empty training split");
  if (has_contrastive_term(cfg.objective) && !corpus_has_foreground(videos))
    throw ConfigError(
        "train: contrastive objectives need at least one foreground segment");

  bool contrastive = has_contrastive_term(cfg.objective);
  losses::Objective objective = loss_objective(cfg.objective);

  TrainResult result{model::ModelState::init(dims, cfg.temperature, cfg.seed),
                     {}};
  model::ModelState& state = result.state;
  state.meta.objective = objective_name(cfg.objective);
  state.meta.trained_video_ids = train_video_ids;
  state.set_training(true);

  long long total_slots = 0;
  for (const auto* v : videos)
    total_slots +=
        static_cast<long long>(v->segments.size()) * cfg.clips_per_segment;
  int steps_per_epoch = static_cast<int>(
      std::max(1LL, total_slots / std::max(1, cfg.batch_size)));

  numkit::GroupedParams backbone{numkit::ParamGroup::kBackbone,
                                 state.video_encoder.param_refs()};
  numkit::GroupedParams heads{numkit::ParamGroup::kHeads, {}};
  for (auto* stack :
       {&state.proj_video, &state.proj_text, &state.head_class,
        &state.head_region}) {
    auto refs = stack->param_refs();
    heads.params.insert(heads.params.end(), refs.begin(), refs.end());
  }
  std::vector<numkit::GroupedParams> groups{std::move(backbone),
                                            std::move(heads)};

  Rng run(cfg.seed);
  int global_step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double epoch_total = 0.0;
    for (int s = 0; s < steps_per_epoch; ++s, ++global_step) {
      Rng step_rng =
          run.fork("step", static_cast<std::uint64_t>(global_step));
      AssembledBatch raw =
          assemble_batch(videos, corpus_data.class_names, cfg, step_rng);

      state.video_encoder.zero_grads();
      state.proj_video.zero_grads();
      state.proj_text.zero_grads();
      state.head_class.zero_grads();
      state.head_region.zero_grads();

      numkit::DenseMatrix x = clips_to_matrix(raw.clips);
      numkit::StackTape tape_encoder, tape_pv, tape_pt, tape_hc, tape_hr;
      numkit::DenseMatrix h = state.video_encoder.forward(x, tape_encoder);

      losses::ContrastiveBatch batch;
      for (const corpus::ClipSample& c : raw.clips)
        batch.foreground.push_back(c.is_foreground ? 1 : 0);
      std::vector<double> norms_v, norms_t;
      if (contrastive) {
        numkit::DenseMatrix u = state.proj_video.forward(h, tape_pv);
        batch.z_video = numkit::normalize_rows(u, &norms_v);
        numkit::DenseMatrix t =
            texts_to_matrix(raw.descriptions, state.text_table);
        numkit::DenseMatrix v = state.proj_text.forward(t, tape_pt);
        batch.z_text = numkit::normalize_rows(v, &norms_t);
        for (const language::TextDescription& d : raw.descriptions)
          batch.texts.push_back(d.text);
      } else {
        batch.z_video = numkit::DenseMatrix(raw.clips.size(), 0);
        batch.z_text = numkit::DenseMatrix(raw.clips.size(), 0);
      }

      numkit::DenseMatrix class_logits = state.head_class.forward(h, tape_hc);
      numkit::DenseMatrix region_logits =
          state.head_region.forward(h, tape_hr);

      losses::TotalResult loss =
          losses::total_loss(batch, class_logits, region_logits, raw.labels,
                             objective, cfg.temperature,
                             cfg.dedupe_negatives);
      if (!std::isfinite(loss.report.l_total))
        throw NumericError("train: non-finite loss at step " +
                           std::to_string(global_step) +
                           "; offending batch: " +
                           dump_batch_for_diagnostics(raw));

      numkit::DenseMatrix dh(h.rows(), h.cols(), 0.0);
      if (contrastive) {
        numkit::DenseMatrix du = numkit::normalize_rows_backward(
            batch.z_video, norms_v, loss.d_z_video);
        numkit::add_inplace(dh, state.proj_video.backward(tape_pv, du));
        numkit::DenseMatrix dv = numkit::normalize_rows_backward(
            batch.z_text, norms_t, loss.d_z_text);
        state.proj_text.backward(tape_pt, dv);  // text table stays frozen
      }
      if (objective != losses::Objective::kClapNoCls) {
        numkit::add_inplace(
            dh, state.head_class.backward(tape_hc, loss.d_class_logits));
        numkit::add_inplace(
            dh, state.head_region.backward(tape_hr, loss.d_region_logits));
      }
      state.video_encoder.backward(tape_encoder, dh);

      numkit::sgd_step(groups, epoch, cfg.sgd);

      StepRecord rec;
      rec.step = global_step;
      rec.epoch = epoch;
      rec.lr_backbone = cfg.sgd.lr(epoch, numkit::ParamGroup::kBackbone);
      rec.lr_heads = cfg.sgd.lr(epoch, numkit::ParamGroup::kHeads);
      rec.report = loss.report;
      epoch_total += loss.report.l_total;
      result.log.steps.push_back(std::move(rec));
    }
    result.log.epochs.push_back(
        {epoch, steps_per_epoch, epoch_total / steps_per_epoch});
    if (sink && cfg.checkpoint_every_epochs > 0 &&
        (epoch + 1) % cfg.checkpoint_every_epochs == 0 &&
        epoch + 1 < cfg.epochs) {
      state.set_training(false);
      sink(state, epoch, false);
      state.set_training(true);
    }
  }
  state.set_training(false);
  if (sink) sink(state, cfg.epochs - 1, true);
  return result;
}

FeatureTable extract_features(const model::ModelState& state,
                              const corpus::Corpus& corpus_data) {
  if (state.video_encoder.training())
    throw UsageError("extract_features: model must be in eval mode");
  std::uint64_t before = state.encoder_checksum();
  FeatureTable table;
  for (const corpus::UntrimmedVideo& v : corpus_data.videos) {
    if (static_cast<int>(v.clip_features.empty()
                             ? 0
                             : v.clip_features[0].size()) != state.dims.d_raw)
      throw ConfigError("extract_features: corpus d_raw " +
                        std::to_string(v.clip_features.empty()
                                           ? 0
                                           : v.clip_features[0].size()) +
                        " does not match model d_raw " +
                        std::to_string(state.dims.d_raw));
    numkit::DenseMatrix x(v.duration_s, state.dims.d_raw);
    for (int t = 0; t < v.duration_s; ++t)
      for (int j = 0; j < state.dims.d_raw; ++j)
        x(t, j) = v.clip_features[t][j];
    table.by_video[v.id] = state.video_encoder.forward_eval(x);
  }
  if (state.encoder_checksum() != before)
    throw UsageError("extract_features: encoder parameters changed");
  return table;
}

void save_features(const FeatureTable& features, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open feature file for writing: " + path);
  for (const auto& [id, m] : features.by_video) {
    json rows = json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
      json row = json::array();
      for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
      rows.push_back(std::move(row));
    }
    out << json{{"video_id", id}, {"features", std::move(rows)}} << '\n';
  }
}

FeatureTable load_features(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("missing input artifact: feature file " + path);
  FeatureTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      json j = json::parse(line);
      auto rows = j.at("features").get<std::vector<std::vector<double>>>();
      table.by_video[j.at("video_id").get<std::string>()] =
          numkit::DenseMatrix::from_rows(rows);
    } catch (const json::exception& e) {
      throw DataError("feature file parse error at line " +
                      std::to_string(line_no) + ": " + e.what());
    }
  }
  return table;
}

}  // namespace clap::trainer
