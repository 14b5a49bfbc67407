#include "clap/pipeline/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "clap/corpus/io.hpp"

namespace clap::pipeline {

using nlohmann::json;

std::vector<int> Manifest::novel_classes() const {
  std::vector<int> novel = val_classes;
  novel.insert(novel.end(), test_classes.begin(), test_classes.end());
  std::sort(novel.begin(), novel.end());
  return novel;
}

Manifest build_manifest(const corpus::Corpus& corpus, const RunConfig& cfg) {
  Manifest m;
  m.seed = cfg.seed;
  m.config_hash = cfg.config_hash;
  Rng master(cfg.seed);

  std::vector<std::string> ids;
  ids.reserve(corpus.videos.size());
  for (const corpus::UntrimmedVideo& v : corpus.videos) ids.push_back(v.id);
  {
    Rng rng = master.fork("video_split");
    for (std::size_t i = ids.size(); i-- > 1;) {
      std::size_t j = static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(i)));
      std::swap(ids[i], ids[j]);
    }
  }
  std::size_t n_train = std::max<std::size_t>(
      1, static_cast<std::size_t>(cfg.split.train_fraction *
                                  static_cast<double>(ids.size())));
  if (n_train >= ids.size() && ids.size() > 1) n_train = ids.size() - 1;
  m.train_videos.assign(ids.begin(), ids.begin() + n_train);
  m.val_videos.assign(ids.begin() + n_train, ids.end());
  std::sort(m.train_videos.begin(), m.train_videos.end());
  std::sort(m.val_videos.begin(), m.val_videos.end());

  int n_classes = cfg.generator.n_classes;
  std::vector<int> classes(n_classes);
  for (int c = 0; c < n_classes; ++c) classes[c] = c;
  {
    Rng rng = master.fork("class_split");
    for (std::size_t i = classes.size(); i-- > 1;) {
      std::size_t j = static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(i)));
      std::swap(classes[i], classes[j]);
    }
  }
  int n_base = std::max(
      1, static_cast<int>(cfg.split.base_class_fraction * n_classes));
  if (n_base >= n_classes && n_classes > 1) n_base = n_classes - 1;
  int rest = n_classes - n_base;
  int n_val = (rest + 1) / 2;
  m.base_classes.assign(classes.begin(), classes.begin() + n_base);
  m.val_classes.assign(classes.begin() + n_base,
                       classes.begin() + n_base + n_val);
  m.test_classes.assign(classes.begin() + n_base + n_val, classes.end());
  std::sort(m.base_classes.begin(), m.base_classes.end());
  std::sort(m.val_classes.begin(), m.val_classes.end());
  std::sort(m.test_classes.begin(), m.test_classes.end());
  return m;
}

namespace {

std::string ids_checksum(const std::vector<std::string>& ids) {
  std::uint64_t h = kFnvOffset;
  for (const std::string& id : ids) {
    h = fnv1a64(id, h);
    h = fnv1a64_u64(0x1f, h);
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "fnv1a:%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

void save_manifest(const Manifest& m, const std::string& path) {
  json j{{"schema_version", kManifestSchemaVersion},
         {"seed", m.seed},
         {"config_hash", m.config_hash},
         {"version", kVersion},
         {"train_videos", m.train_videos},
         {"val_videos", m.val_videos},
         {"base_classes", m.base_classes},
         {"val_classes", m.val_classes},
         {"test_classes", m.test_classes},
         {"checksums",
          {{"train_videos", ids_checksum(m.train_videos)},
           {"val_videos", ids_checksum(m.val_videos)}}}};
  std::ofstream out(path);
  if (!out) throw DataError("cannot open manifest for writing: " + path);
  out << j.dump(2) << '\n';
}

Manifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("missing input artifact: manifest " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("manifest parse error: " + std::string(e.what()));
  }
  try {
    if (j.at("schema_version").get<int>() != kManifestSchemaVersion)
      throw DataError("manifest: unsupported schema version");
    Manifest m;
    m.seed = j.at("seed").get<std::uint64_t>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.train_videos = j.at("train_videos").get<std::vector<std::string>>();
    m.val_videos = j.at("val_videos").get<std::vector<std::string>>();
    m.base_classes = j.at("base_classes").get<std::vector<int>>();
    m.val_classes = j.at("val_classes").get<std::vector<int>>();
    m.test_classes = j.at("test_classes").get<std::vector<int>>();
    if (j.contains("checksums")) {
      const json& c = j.at("checksums");
      if (c.at("train_videos").get<std::string>() !=
              ids_checksum(m.train_videos) ||
          c.at("val_videos").get<std::string>() != ids_checksum(m.val_videos))
        throw DataError("manifest: checksum mismatch");
    }
    return m;
  } catch (const json::exception& e) {
    throw DataError("manifest field error: " + std::string(e.what()));
  }
}

DataPaths derive_paths(const std::string& corpus_path) {
  std::string stem = corpus_path;
  const std::string ext = ".jsonl";
  if (stem.size() > ext.size() &&
      stem.compare(stem.size() - ext.size(), ext.size(), ext) == 0)
    stem.resize(stem.size() - ext.size());
  return {corpus_path, stem + ".classes.json", stem + ".manifest.json"};
}

void generate_corpus_files(const RunConfig& cfg,
                           const std::string& corpus_path) {
  corpus::Corpus corpus = corpus::generate_corpus(cfg.generator);
  Manifest manifest = build_manifest(corpus, cfg);
  DataPaths paths = derive_paths(corpus_path);
  corpus::save_corpus(corpus.videos, paths.corpus);
  corpus::save_class_vocab(corpus.class_names, paths.classes);
  save_manifest(manifest, paths.manifest);
}

std::vector<const corpus::UntrimmedVideo*> select_videos(
    const corpus::Corpus& corpus, const std::vector<std::string>& ids) {
  std::vector<const corpus::UntrimmedVideo*> out;
  out.reserve(ids.size());
  for (const std::string& id : ids) {
    auto it = std::find_if(
        corpus.videos.begin(), corpus.videos.end(),
        [&](const corpus::UntrimmedVideo& v) { return v.id == id; });
    if (it == corpus.videos.end())
      throw DataError("manifest video id not in corpus: " + id);
    out.push_back(&*it);
  }
  return out;
}

std::vector<std::string> training_video_ids(const corpus::Corpus& corpus,
                                            const Manifest& manifest,
                                            const RunConfig& cfg) {
  std::vector<std::string> ids;
  if (cfg.train_split == "all") {
    ids = manifest.train_videos;
    ids.insert(ids.end(), manifest.val_videos.begin(),
               manifest.val_videos.end());
    std::sort(ids.begin(), ids.end());
  } else {
    ids = manifest.train_videos;
  }
  if (cfg.class_partition == "base") {
    std::set<int> base(manifest.base_classes.begin(),
                       manifest.base_classes.end());
    std::vector<std::string> kept;
    for (const std::string& id : ids) {
      for (const corpus::UntrimmedVideo& v : corpus.videos) {
        if (v.id == id) {
          if (base.count(v.primary_class)) kept.push_back(id);
          break;
        }
      }
    }
    ids = std::move(kept);
  }
  return ids;
}

model::ModelState run_training(const corpus::Corpus& corpus,
                               const Manifest& manifest, const RunConfig& cfg,
                               trainer::TrainLog* log_out,
                               const trainer::CheckpointSink& sink) {
  std::vector<std::string> ids = training_video_ids(corpus, manifest, cfg);
  trainer::TrainResult result =
      trainer::train(corpus, ids, cfg.dims(), cfg.trainer_cfg, sink);
  result.state.meta.config_hash = cfg.config_hash;
  if (log_out) *log_out = std::move(result.log);
  return std::move(result.state);
}

void write_train_log(const trainer::TrainLog& log, const RunConfig& cfg,
                     const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open train log for writing: " + path);
  for (const trainer::StepRecord& r : log.steps) {
    json j{{"step", r.step},
           {"epoch", r.epoch},
           {"lr_backbone", r.lr_backbone},
           {"lr_heads", r.lr_heads},
           {"l_total", r.report.l_total}};
    if (r.report.l_ce) j["l_ce"] = *r.report.l_ce;
    if (r.report.l_clip) j["l_clip"] = *r.report.l_clip;
    if (r.report.l_mask) j["l_mask"] = *r.report.l_mask;
    out << j << '\n';
  }
  for (const trainer::EpochSummary& s : log.epochs) {
    out << json{{"epoch_summary", true},
                {"epoch", s.epoch},
                {"steps", s.steps},
                {"mean_l_total", s.mean_total},
                {"config_hash", cfg.config_hash},
                {"version", kVersion}}
        << '\n';
  }
}

namespace {

void stamp_report(json& report, const RunConfig& cfg) {
  report["config_hash"] = cfg.config_hash;
  report["version"] = kVersion;
}

json suite_to_json(const evalkit::MapSuite& s) {
  return json{{"mAP@0.5", s.map_050},
              {"mAP@0.75", s.map_075},
              {"mAP@0.95", s.map_095},
              {"AmAP", s.amap}};
}

}  // namespace

json eval_tal_report(const model::ModelState& state,
                     const corpus::Corpus& corpus, const Manifest& manifest,
                     const RunConfig& cfg,
                     std::vector<evalkit::Detection>* dets_out) {
  trainer::FeatureTable features = trainer::extract_features(state, corpus);
  auto train_videos = select_videos(corpus, manifest.train_videos);
  auto val_videos = select_videos(corpus, manifest.val_videos);
  evalkit::LinearProbe probe = evalkit::fit_probe(
      features, train_videos, state.dims.n_classes, cfg.eval.probe);
  std::vector<evalkit::Detection> dets =
      evalkit::localize_tal(features, val_videos, probe, cfg.eval.windows);
  std::vector<evalkit::GroundTruth> gts =
      evalkit::foreground_ground_truth(val_videos);
  evalkit::MapSuite suite = evalkit::map_suite(dets, gts, cfg.eval.amap_grid);
  json report = suite_to_json(suite);
  report["amap_grid"] =
      cfg.eval.amap_grid == evalkit::AmapGrid::kPaper ? "paper"
                                                      : "activitynet";
  report["n_detections"] = dets.size();
  report["n_ground_truths"] = gts.size();
  stamp_report(report, cfg);
  if (dets_out) *dets_out = std::move(dets);
  return report;
}

json eval_fewshot_report(const model::ModelState& state,
                         const corpus::Corpus& corpus,
                         const Manifest& manifest, const RunConfig& cfg) {
  // Episodic evaluation is only meaningful when the checkpoint never saw
  // novel-class videos; the manifest makes that checkable.
  std::set<int> novel;
  for (int c : manifest.novel_classes()) novel.insert(c);
  std::set<std::string> trained(state.meta.trained_video_ids.begin(),
                                state.meta.trained_video_ids.end());
  for (const corpus::UntrimmedVideo& v : corpus.videos) {
    if (novel.count(v.primary_class) && trained.count(v.id))
      throw DataError("few-shot: checkpoint was trained on novel-class video " +
                      v.id + "; train with class_partition=base");
  }

  evalkit::EpisodeSpec spec;
  spec.base_classes = manifest.base_classes;
  spec.val_classes = manifest.val_classes;
  spec.test_classes = manifest.test_classes;
  spec.shots = cfg.eval.shots;
  spec.episodes = cfg.eval.episodes;
  spec.seed = cfg.seed;

  trainer::FeatureTable features = trainer::extract_features(state, corpus);
  evalkit::FewshotResult result = evalkit::fewshot_protocol(
      features, corpus, spec, cfg.eval.windows);

  json per_episode = json::array();
  for (const evalkit::MapSuite& s : result.per_episode)
    per_episode.push_back(suite_to_json(s));
  json report{{"episodes", spec.episodes},
              {"shots", spec.shots},
              {"novel_classes", manifest.novel_classes()},
              {"mean", suite_to_json(result.mean)},
              {"std", suite_to_json(result.stddev)},
              {"per_episode", std::move(per_episode)}};
  stamp_report(report, cfg);
  return report;
}

json eval_grounding_report(const model::ModelState& state,
                           const corpus::Corpus& corpus,
                           const Manifest& manifest, const RunConfig& cfg) {
  trainer::FeatureTable features = trainer::extract_features(state, corpus);
  auto val_videos = select_videos(corpus, manifest.val_videos);
  std::vector<evalkit::GroundingQuery> queries =
      evalkit::grounding_queries(val_videos);
  if (queries.empty())
    throw DataError("grounding: validation split has no captions");

  bool fit = cfg.eval.grounding_probe == "always";
  if (cfg.eval.grounding_probe == "auto") {
    fit = !state.meta.objective.empty() &&
          !trainer::has_contrastive_term(
              trainer::parse_objective(state.meta.objective));
  }
  model::ModelState working = state;
  if (fit) {
    auto train_videos = select_videos(corpus, manifest.train_videos);
    evalkit::fit_grounding_probe(working, features, train_videos,
                                 corpus.class_names, cfg.eval.probe);
  }

  evalkit::GroundingMetrics metrics = evalkit::evaluate_grounding(
      features, working, queries, cfg.eval.windows);
  evalkit::GroundingMetrics baseline = evalkit::grounding_random_baseline(
      features, working, queries, cfg.eval.windows, cfg.seed);

  json report{{"recall@0.5", metrics.recall_050},
              {"recall@0.7", metrics.recall_070},
              {"mIoU", metrics.mean_iou},
              {"n_queries", metrics.n_queries},
              {"probe_fitted", fit},
              {"random_baseline",
               {{"recall@0.5", baseline.recall_050},
                {"recall@0.7", baseline.recall_070},
                {"mIoU", baseline.mean_iou}}}};
  stamp_report(report, cfg);
  return report;
}

json analyze_features_report(const model::ModelState& state,
                             const corpus::Corpus& corpus,
                             const Manifest& manifest, const RunConfig& cfg,
                             evalkit::Histogram* histogram_out) {
  trainer::FeatureTable features = trainer::extract_features(state, corpus);
  auto val_videos = select_videos(corpus, manifest.val_videos);
  Rng rng = Rng(cfg.seed).fork("feature_analysis");
  evalkit::DistanceAnalysis analysis = evalkit::feature_distance_analysis(
      features, val_videos, rng, cfg.eval.histogram_bins);
  json report{{"median_difference", analysis.median},
              {"count", analysis.differences.size()},
              {"skipped_videos", analysis.skipped_videos}};
  stamp_report(report, cfg);
  if (histogram_out) *histogram_out = std::move(analysis.histogram);
  return report;
}

}  // namespace clap::pipeline
