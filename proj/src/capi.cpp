#include "clap/capi.h"

#include <cstdlib>
#include <cstring>
#include <memory>

#include "clap/corpus/io.hpp"
#include "clap/pipeline/pipeline.hpp"

using namespace clap;

struct clap_corpus {
  corpus::Corpus data;
};

struct clap_model {
  model::ModelState state;
};

namespace {

thread_local std::string g_last_error;

template <typename F>
clap_status guarded(F&& fn) {
  try {
    fn();
    g_last_error.clear();
    return CLAP_OK;
  } catch (const ConfigError& e) {
    g_last_error = e.what();
    return CLAP_ERROR_CONFIG;
  } catch (const DataError& e) {
    g_last_error = e.what();
    return CLAP_ERROR_DATA;
  } catch (const NumericError& e) {
    g_last_error = e.what();
    return CLAP_ERROR_NUMERIC;
  } catch (const UsageError& e) {
    g_last_error = e.what();
    return CLAP_ERROR_USAGE;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return CLAP_ERROR_INTERNAL;
  }
}

pipeline::RunConfig config_from(const char* config_json) {
  if (config_json == nullptr || config_json[0] == '\0')
    return pipeline::default_run_config();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(config_json);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config parse error: " + std::string(e.what()));
  }
  return pipeline::parse_run_config(j);
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void require(bool ok, const char* what) {
  if (!ok) throw UsageError(std::string("null argument: ") + what);
}

}  // namespace

extern "C" {

const char* clap_version(void) { return kVersion; }

const char* clap_last_error(void) { return g_last_error.c_str(); }

void clap_string_free(char* s) { std::free(s); }

clap_status clap_config_normalize(const char* config_json, char** out_json) {
  return guarded([&] {
    require(out_json != nullptr, "out_json");
    pipeline::RunConfig cfg = config_from(config_json);
    *out_json = dup_string(pipeline::effective_config_json(cfg).dump(2));
  });
}

clap_status clap_generate_corpus(const char* config_json,
                                 const char* out_corpus_path) {
  return guarded([&] {
    require(out_corpus_path != nullptr, "out_corpus_path");
    pipeline::generate_corpus_files(config_from(config_json),
                                    out_corpus_path);
  });
}

clap_status clap_corpus_open(const char* corpus_path,
                             const char* classes_path, clap_corpus** out) {
  return guarded([&] {
    require(corpus_path != nullptr, "corpus_path");
    require(classes_path != nullptr, "classes_path");
    require(out != nullptr, "out");
    auto handle = std::make_unique<clap_corpus>();
    handle->data.videos = corpus::load_corpus(corpus_path);
    handle->data.class_names = corpus::load_class_vocab(classes_path);
    *out = handle.release();
  });
}

void clap_corpus_close(clap_corpus* corpus) { delete corpus; }

int64_t clap_corpus_video_count(const clap_corpus* corpus) {
  return corpus == nullptr
             ? -1
             : static_cast<int64_t>(corpus->data.videos.size());
}

clap_status clap_model_open(const char* checkpoint_path, clap_model** out) {
  return guarded([&] {
    require(checkpoint_path != nullptr, "checkpoint_path");
    require(out != nullptr, "out");
    auto handle = std::make_unique<clap_model>();
    handle->state = model::load_checkpoint(checkpoint_path);
    *out = handle.release();
  });
}

void clap_model_close(clap_model* model) { delete model; }

clap_status clap_train(const char* config_json, const clap_corpus* corpus,
                       const char* manifest_path,
                       const char* out_checkpoint_path,
                       const char* out_log_path) {
  return guarded([&] {
    require(corpus != nullptr, "corpus");
    require(manifest_path != nullptr, "manifest_path");
    require(out_checkpoint_path != nullptr, "out_checkpoint_path");
    pipeline::RunConfig cfg = config_from(config_json);
    pipeline::Manifest manifest = pipeline::load_manifest(manifest_path);
    trainer::TrainLog log;
    std::string checkpoint_path = out_checkpoint_path;
    trainer::CheckpointSink sink = [&](const model::ModelState& state,
                                       int epoch, bool final) {
      std::string path = final ? checkpoint_path
                               : checkpoint_path + ".epoch" +
                                     std::to_string(epoch) + ".json";
      model::save_checkpoint(state, path);
    };
    pipeline::run_training(corpus->data, manifest, cfg, &log, sink);
    if (out_log_path != nullptr)
      pipeline::write_train_log(log, cfg, out_log_path);
  });
}

clap_status clap_extract_features(const clap_model* model,
                                  const clap_corpus* corpus,
                                  const char* out_features_path) {
  return guarded([&] {
    require(model != nullptr, "model");
    require(corpus != nullptr, "corpus");
    require(out_features_path != nullptr, "out_features_path");
    trainer::FeatureTable features =
        trainer::extract_features(model->state, corpus->data);
    trainer::save_features(features, out_features_path);
  });
}

clap_status clap_eval_tal(const char* config_json, const clap_model* model,
                          const clap_corpus* corpus,
                          const char* manifest_path,
                          const char* out_detections_path,
                          char** out_report_json) {
  return guarded([&] {
    require(model != nullptr, "model");
    require(corpus != nullptr, "corpus");
    require(manifest_path != nullptr, "manifest_path");
    require(out_report_json != nullptr, "out_report_json");
    pipeline::RunConfig cfg = config_from(config_json);
    pipeline::Manifest manifest = pipeline::load_manifest(manifest_path);
    std::vector<evalkit::Detection> dets;
    nlohmann::json report = pipeline::eval_tal_report(
        model->state, corpus->data, manifest, cfg, &dets);
    if (out_detections_path != nullptr)
      evalkit::save_detections(dets, out_detections_path);
    *out_report_json = dup_string(report.dump(2));
  });
}

clap_status clap_eval_fewshot(const char* config_json,
                              const clap_model* model,
                              const clap_corpus* corpus,
                              const char* manifest_path,
                              char** out_report_json) {
  return guarded([&] {
    require(model != nullptr, "model");
    require(corpus != nullptr, "corpus");
    require(manifest_path != nullptr, "manifest_path");
    require(out_report_json != nullptr, "out_report_json");
    pipeline::RunConfig cfg = config_from(config_json);
    pipeline::Manifest manifest = pipeline::load_manifest(manifest_path);
    nlohmann::json report = pipeline::eval_fewshot_report(
        model->state, corpus->data, manifest, cfg);
    *out_report_json = dup_string(report.dump(2));
  });
}

clap_status clap_eval_grounding(const char* config_json,
                                const clap_model* model,
                                const clap_corpus* corpus,
                                const char* manifest_path,
                                char** out_report_json) {
  return guarded([&] {
    require(model != nullptr, "model");
    require(corpus != nullptr, "corpus");
    require(manifest_path != nullptr, "manifest_path");
    require(out_report_json != nullptr, "out_report_json");
    pipeline::RunConfig cfg = config_from(config_json);
    pipeline::Manifest manifest = pipeline::load_manifest(manifest_path);
    nlohmann::json report = pipeline::eval_grounding_report(
        model->state, corpus->data, manifest, cfg);
    *out_report_json = dup_string(report.dump(2));
  });
}

clap_status clap_analyze_features(const char* config_json,
                                  const clap_model* model,
                                  const clap_corpus* corpus,
                                  const char* manifest_path,
                                  const char* out_histogram_csv_path,
                                  char** out_report_json) {
  return guarded([&] {
    require(model != nullptr, "model");
    require(corpus != nullptr, "corpus");
    require(manifest_path != nullptr, "manifest_path");
    require(out_histogram_csv_path != nullptr, "out_histogram_csv_path");
    require(out_report_json != nullptr, "out_report_json");
    pipeline::RunConfig cfg = config_from(config_json);
    pipeline::Manifest manifest = pipeline::load_manifest(manifest_path);
    evalkit::Histogram hist;
    nlohmann::json report = pipeline::analyze_features_report(
        model->state, corpus->data, manifest, cfg, &hist);
    evalkit::write_histogram_csv(hist, out_histogram_csv_path);
    *out_report_json = dup_string(report.dump(2));
  });
}

clap_status clap_repro_ablation(const char* config_json,
                                const char* out_dir) {
  return guarded([&] {
    require(out_dir != nullptr, "out_dir");
    pipeline::run_ablation(config_from(config_json), out_dir);
  });
}

}  // extern "C"
