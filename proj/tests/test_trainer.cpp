#include <cmath>

#include "clap/corpus/generator.hpp"
#include "clap/trainer/trainer.hpp"
#include "doctest.h"

using namespace clap;
using namespace clap::trainer;

namespace {

corpus::Corpus tiny_corpus(std::uint64_t seed, int n_videos = 10) {
  corpus::GeneratorConfig cfg;
  cfg.n_videos = n_videos;
  cfg.n_classes = 3;
  cfg.d_raw = 8;
  cfg.mean_duration_s = 16;
  cfg.seed = seed;
  return corpus::generate_corpus(cfg);
}

model::Dims tiny_dims() {
  model::Dims d;
  d.d_raw = 8;
  d.d_hidden = 12;
  d.d_feat = 8;
  d.d_embed = 6;
  d.d_text = 8;
  d.n_classes = 3;
  d.vocab_hash_size = 64;
  return d;
}

TrainConfig tiny_train(TrainObjective objective, std::uint64_t seed,
                       int epochs = 2) {
  TrainConfig cfg;
  cfg.objective = objective;
  cfg.epochs = epochs;
  cfg.batch_size = 8;
  cfg.seed = seed;
  return cfg;
}

std::vector<std::string> all_ids(const corpus::Corpus& c) {
  std::vector<std::string> ids;
  for (const auto& v : c.videos) ids.push_back(v.id);
  return ids;
}

std::vector<const corpus::UntrimmedVideo*> all_videos(
    const corpus::Corpus& c) {
  std::vector<const corpus::UntrimmedVideo*> out;
  for (const auto& v : c.videos) out.push_back(&v);
  return out;
}

}  // namespace

TEST_CASE("batches mix foreground and background pairs") {
  corpus::Corpus corpus = tiny_corpus(3, 12);
  model::ModelState state = model::ModelState::init(tiny_dims(), 0.07, 1);
  TrainConfig cfg = tiny_train(TrainObjective::kClap, 1);
  int batches_with_both = 0;
  Rng master(5);
  for (int b = 0; b < 100; ++b) {
    Rng rng = master.fork("batch", b);
    BuiltBatch built =
        build_batch(state, all_videos(corpus), corpus.class_names, cfg, rng);
    std::size_t fg = built.batch.foreground_count();
    if (fg > 0 && fg < built.batch.size()) ++batches_with_both;
    for (std::size_t i = 0; i < built.labels.region.size(); ++i)
      CHECK((built.labels.cls[i] >= 0) == (built.labels.region[i] == 1));
    for (std::size_t i = 0; i < built.batch.size(); ++i) {
      CHECK(numkit::l2_norm(built.batch.z_video.row(i)) ==
            doctest::Approx(1.0).epsilon(1e-9));
      CHECK(numkit::l2_norm(built.batch.z_text.row(i)) ==
            doctest::Approx(1.0).epsilon(1e-9));
    }
  }
  CHECK(batches_with_both == 100);
}

TEST_CASE("clap-mask batches use synthetic descriptions only") {
  corpus::Corpus corpus = tiny_corpus(7);
  TrainConfig cfg = tiny_train(TrainObjective::kClapMask, 2);
  Rng rng(9);
  AssembledBatch batch =
      assemble_batch(all_videos(corpus), corpus.class_names, cfg, rng);
  REQUIRE(batch.descriptions.size() == batch.clips.size());
  for (const language::TextDescription& d : batch.descriptions)
    CHECK(d.origin == language::TextOrigin::kSynthetic);
}

TEST_CASE("training smoke run finishes with finite losses") {
  corpus::Corpus corpus = tiny_corpus(11);
  TrainResult result = train(corpus, all_ids(corpus), tiny_dims(),
                             tiny_train(TrainObjective::kClap, 4));
  CHECK(!result.log.steps.empty());
  for (const StepRecord& r : result.log.steps)
    CHECK(std::isfinite(r.report.l_total));
  CHECK(result.log.epochs.size() == 2);
}

TEST_CASE("training is deterministic for a fixed seed") {
  corpus::Corpus corpus = tiny_corpus(13);
  TrainConfig cfg = tiny_train(TrainObjective::kClap, 21);
  TrainResult a = train(corpus, all_ids(corpus), tiny_dims(), cfg);
  TrainResult b = train(corpus, all_ids(corpus), tiny_dims(), cfg);
  CHECK(a.state.full_checksum() == b.state.full_checksum());
  REQUIRE(a.log.steps.size() == b.log.steps.size());
  for (std::size_t i = 0; i < a.log.steps.size(); ++i)
    CHECK(a.log.steps[i].report.l_total == b.log.steps[i].report.l_total);
}

TEST_CASE("tac training leaves the text projection at its init state") {
  corpus::Corpus corpus = tiny_corpus(17);
  model::ModelState init = model::ModelState::init(tiny_dims(), 0.07, 33);
  TrainConfig cfg = tiny_train(TrainObjective::kTac, 33);
  TrainResult result = train(corpus, all_ids(corpus), tiny_dims(), cfg);
  CHECK(result.state.proj_text.state_checksum() ==
        init.proj_text.state_checksum());
  CHECK(result.state.proj_video.state_checksum() ==
        init.proj_video.state_checksum());
  CHECK(result.state.video_encoder.state_checksum() !=
        init.video_encoder.state_checksum());
}

TEST_CASE("the text table is frozen across a training run") {
  corpus::Corpus corpus = tiny_corpus(19);
  model::ModelState init = model::ModelState::init(tiny_dims(), 0.07, 5);
  TrainResult result = train(corpus, all_ids(corpus), tiny_dims(),
                             tiny_train(TrainObjective::kClap, 5));
  CHECK(result.state.text_table.checksum() == init.text_table.checksum());
}

TEST_CASE("the recorded learning-rate trace follows the schedule exactly") {
  corpus::Corpus corpus = tiny_corpus(23);
  TrainConfig cfg = tiny_train(TrainObjective::kClap, 6, 5);
  TrainResult result = train(corpus, all_ids(corpus), tiny_dims(), cfg);
  for (const StepRecord& r : result.log.steps) {
    CHECK(r.lr_backbone ==
          cfg.sgd.lr(r.epoch, numkit::ParamGroup::kBackbone));
    CHECK(r.lr_heads == cfg.sgd.lr(r.epoch, numkit::ParamGroup::kHeads));
  }
}

TEST_CASE("mean epoch loss decreases over training for most seeds") {
  int improved = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    corpus::Corpus corpus = tiny_corpus(seed, 12);
    TrainConfig cfg = tiny_train(TrainObjective::kClap, seed, 4);
    TrainResult result = train(corpus, all_ids(corpus), tiny_dims(), cfg);
    if (result.log.epochs.back().mean_total <
        result.log.epochs.front().mean_total)
      ++improved;
  }
  CHECK(improved >= 4);
}

TEST_CASE("contrastive training requires foreground somewhere") {
  corpus::Corpus corpus;
  corpus.class_names = {"a"};
  corpus::UntrimmedVideo v;
  v.id = "bg_only";
  v.duration_s = 6;
  v.primary_class = 0;
  v.clip_features.assign(6, std::vector<double>(8, 0.1));
  v.segments.push_back({0.0, 6.0, std::nullopt});
  corpus.videos.push_back(v);
  CHECK_THROWS_AS(train(corpus, {"bg_only"}, tiny_dims(),
                        tiny_train(TrainObjective::kClap, 1)),
                  ConfigError);
  CHECK_NOTHROW(train(corpus, {"bg_only"}, tiny_dims(),
                      tiny_train(TrainObjective::kTac, 1)));
}

TEST_CASE("a diverging run aborts with a numeric error") {
  corpus::Corpus corpus = tiny_corpus(29);
  TrainConfig cfg = tiny_train(TrainObjective::kClap, 2, 3);
  cfg.sgd.base_lr_backbone = 1e14;
  cfg.sgd.base_lr_heads = 1e14;
  CHECK_THROWS_AS(train(corpus, all_ids(corpus), tiny_dims(), cfg),
                  NumericError);
}

TEST_CASE("contrastive objectives reject batch_size 1") {
  TrainConfig cfg = tiny_train(TrainObjective::kClap, 1);
  cfg.batch_size = 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.objective = TrainObjective::kTac;
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("feature extraction is shaped, repeatable, and moves with training") {
  corpus::Corpus corpus = tiny_corpus(31);
  model::ModelState init = model::ModelState::init(tiny_dims(), 0.07, 8);
  init.set_training(false);
  FeatureTable at_init = extract_features(init, corpus);
  for (const auto& v : corpus.videos) {
    const numkit::DenseMatrix& m = at_init.by_video.at(v.id);
    CHECK(m.rows() == static_cast<std::size_t>(v.duration_s));
    CHECK(m.cols() == 8);
  }
  FeatureTable again = extract_features(init, corpus);
  for (const auto& [id, m] : at_init.by_video)
    CHECK(m == again.by_video.at(id));

  TrainResult result = train(corpus, all_ids(corpus), tiny_dims(),
                             tiny_train(TrainObjective::kClap, 8));
  FeatureTable trained = extract_features(result.state, corpus);
  bool any_different = false;
  for (const auto& [id, m] : at_init.by_video)
    if (!(m == trained.by_video.at(id))) any_different = true;
  CHECK(any_different);
}

TEST_CASE("checkpoint cadence invokes the sink and always writes the final") {
  corpus::Corpus corpus = tiny_corpus(37);
  TrainConfig cfg = tiny_train(TrainObjective::kClap, 3, 4);
  cfg.checkpoint_every_epochs = 2;
  std::vector<std::pair<int, bool>> calls;
  train(corpus, all_ids(corpus), tiny_dims(), cfg,
        [&](const model::ModelState&, int epoch, bool final) {
          calls.push_back({epoch, final});
        });
  REQUIRE(calls.size() == 2);
  CHECK(calls[0] == std::pair{1, false});
  CHECK(calls[1] == std::pair{3, true});
}

TEST_CASE("objective names round-trip") {
  for (TrainObjective o :
       {TrainObjective::kTac, TrainObjective::kClapClip,
        TrainObjective::kClapMask, TrainObjective::kClap,
        TrainObjective::kClapDagger, TrainObjective::kClapNoCls})
    CHECK(parse_objective(objective_name(o)) == o);
  CHECK_THROWS_AS(parse_objective("bogus"), ConfigError);
}
