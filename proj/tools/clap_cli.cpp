// Command-line front end. Talks to the pipeline exclusively through the C
// API in clap/capi.h; flags are merged into the JSON config document before
// it crosses the boundary.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "clap/capi.h"
#include "json.hpp"

namespace {

using nlohmann::json;

struct CommonOpts {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> objective;
  bool print_config = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool with_objective) {
  cmd->add_option("--config", opts.config_path, "JSON config file");
  cmd->add_option("--seed", opts.seed, "override the top-level seed");
  if (with_objective)
    cmd->add_option(
        "--objective", opts.objective,
        "tac | clap-clip | clap-mask | clap | clap-dagger | clap-no-cls");
  cmd->add_flag("--print-config", opts.print_config,
                "print the effective merged config and exit");
}

// File config + flag overrides -> one JSON document for the C API.
int build_config(const CommonOpts& opts, std::string& out, bool* printed) {
  json j = json::object();
  if (!opts.config_path.empty()) {
    std::ifstream in(opts.config_path);
    if (!in) {
      std::cerr << "error: cannot open config file " << opts.config_path
                << "\n";
      return CLAP_ERROR_DATA;
    }
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      std::cerr << "error: config parse error: " << e.what() << "\n";
      return CLAP_ERROR_CONFIG;
    }
  }
  if (opts.seed) j["seed"] = *opts.seed;
  if (opts.objective) j["trainer"]["objective"] = *opts.objective;
  out = j.dump();

  char* normalized = nullptr;
  clap_status st = clap_config_normalize(out.c_str(), &normalized);
  if (st != CLAP_OK) {
    std::cerr << "error: " << clap_last_error() << "\n";
    return st;
  }
  if (opts.print_config) {
    std::cout << normalized << "\n";
    *printed = true;
  }
  clap_string_free(normalized);
  return CLAP_OK;
}

int fail(clap_status st) {
  std::cerr << "error: " << clap_last_error() << "\n";
  return st;
}

std::string classes_path_for(const std::string& corpus_path,
                             const std::string& override_path) {
  if (!override_path.empty()) return override_path;
  std::string stem = corpus_path;
  const std::string ext = ".jsonl";
  if (stem.size() > ext.size() &&
      stem.compare(stem.size() - ext.size(), ext.size(), ext) == 0)
    stem.resize(stem.size() - ext.size());
  return stem + ".classes.json";
}

std::string manifest_path_for(const std::string& corpus_path,
                              const std::string& override_path) {
  if (!override_path.empty()) return override_path;
  std::string stem = corpus_path;
  const std::string ext = ".jsonl";
  if (stem.size() > ext.size() &&
      stem.compare(stem.size() - ext.size(), ext.size(), ext) == 0)
    stem.resize(stem.size() - ext.size());
  return stem + ".manifest.json";
}

struct CorpusHandle {
  clap_corpus* ptr = nullptr;
  ~CorpusHandle() { clap_corpus_close(ptr); }
};

struct ModelHandle {
  clap_model* ptr = nullptr;
  ~ModelHandle() { clap_model_close(ptr); }
};

int write_report(const char* report, const std::string& path) {
  if (path.empty()) {
    std::cout << report << "\n";
    return 0;
  }
  std::ofstream out(path);
  if (!out) {
    std::cerr << "error: cannot write report to " << path << "\n";
    return CLAP_ERROR_DATA;
  }
  out << report << "\n";
  return 0;
}

// Shared skeleton of the eval-* subcommands.
template <typename EvalFn>
int run_eval(const CommonOpts& opts, const std::string& corpus_path,
             const std::string& classes_override,
             const std::string& manifest_override,
             const std::string& checkpoint_path, const std::string& out_path,
             EvalFn&& eval) {
  std::string config;
  bool printed = false;
  if (int rc = build_config(opts, config, &printed)) return rc;
  if (printed) return 0;
  CorpusHandle corpus;
  clap_status st =
      clap_corpus_open(corpus_path.c_str(),
                       classes_path_for(corpus_path, classes_override).c_str(),
                       &corpus.ptr);
  if (st != CLAP_OK) return fail(st);
  ModelHandle model;
  st = clap_model_open(checkpoint_path.c_str(), &model.ptr);
  if (st != CLAP_OK) return fail(st);
  char* report = nullptr;
  st = eval(config.c_str(), model.ptr, corpus.ptr,
            manifest_path_for(corpus_path, manifest_override).c_str(),
            &report);
  if (st != CLAP_OK) return fail(st);
  int rc = write_report(report, out_path);
  clap_string_free(report);
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"contrastive language-action pre-training pipeline"};
  app.require_subcommand(1);

  // gen-data
  CommonOpts gen_opts;
  std::string gen_out;
  CLI::App* gen = app.add_subcommand(
      "gen-data", "generate a synthetic corpus, class vocab, and manifest");
  add_common(gen, gen_opts, false);
  gen->add_option("--out", gen_out, "output corpus .jsonl path")->required();

  // train
  CommonOpts train_opts;
  std::string train_corpus, train_classes, train_manifest, train_out,
      train_log;
  CLI::App* train = app.add_subcommand("train", "post-pre-train a model");
  add_common(train, train_opts, true);
  train->add_option("--corpus", train_corpus, "corpus .jsonl")->required();
  train->add_option("--classes", train_classes, "class vocab json");
  train->add_option("--manifest", train_manifest, "split manifest json");
  train->add_option("--out", train_out, "output checkpoint path")->required();
  train->add_option("--log", train_log, "output train log (jsonl)");

  // extract
  CommonOpts extract_opts;
  std::string ex_corpus, ex_classes, ex_ckpt, ex_out;
  CLI::App* extract =
      app.add_subcommand("extract", "write per-second backbone features");
  add_common(extract, extract_opts, false);
  extract->add_option("--corpus", ex_corpus, "corpus .jsonl")->required();
  extract->add_option("--classes", ex_classes, "class vocab json");
  extract->add_option("--checkpoint", ex_ckpt, "model checkpoint")
      ->required();
  extract->add_option("--out", ex_out, "output features .jsonl")->required();

  // eval-tal
  CommonOpts tal_opts;
  std::string tal_corpus, tal_classes, tal_manifest, tal_ckpt, tal_out,
      tal_dets;
  CLI::App* tal = app.add_subcommand(
      "eval-tal", "temporal action localization mAP suite");
  add_common(tal, tal_opts, false);
  tal->add_option("--corpus", tal_corpus, "corpus .jsonl")->required();
  tal->add_option("--classes", tal_classes, "class vocab json");
  tal->add_option("--manifest", tal_manifest, "split manifest json");
  tal->add_option("--checkpoint", tal_ckpt, "model checkpoint")->required();
  tal->add_option("--out", tal_out, "report json path (stdout if omitted)");
  tal->add_option("--detections", tal_dets, "also write detections jsonl");

  // eval-fewshot
  CommonOpts fs_opts;
  std::string fs_corpus, fs_classes, fs_manifest, fs_ckpt, fs_out;
  CLI::App* fewshot = app.add_subcommand(
      "eval-fewshot", "episodic novel-class localization");
  add_common(fewshot, fs_opts, false);
  fewshot->add_option("--corpus", fs_corpus, "corpus .jsonl")->required();
  fewshot->add_option("--classes", fs_classes, "class vocab json");
  fewshot->add_option("--manifest", fs_manifest, "split manifest json");
  fewshot->add_option("--checkpoint", fs_ckpt, "model checkpoint")
      ->required();
  fewshot->add_option("--out", fs_out, "report json path");

  // eval-grounding
  CommonOpts gr_opts;
  std::string gr_corpus, gr_classes, gr_manifest, gr_ckpt, gr_out;
  CLI::App* grounding = app.add_subcommand(
      "eval-grounding", "text-query temporal grounding recall");
  add_common(grounding, gr_opts, false);
  grounding->add_option("--corpus", gr_corpus, "corpus .jsonl")->required();
  grounding->add_option("--classes", gr_classes, "class vocab json");
  grounding->add_option("--manifest", gr_manifest, "split manifest json");
  grounding->add_option("--checkpoint", gr_ckpt, "model checkpoint")
      ->required();
  grounding->add_option("--out", gr_out, "report json path");

  // analyze-features
  CommonOpts an_opts;
  std::string an_corpus, an_classes, an_manifest, an_ckpt, an_out, an_csv;
  CLI::App* analyze = app.add_subcommand(
      "analyze-features", "fg2bg - fg2fg distance histogram");
  add_common(analyze, an_opts, false);
  analyze->add_option("--corpus", an_corpus, "corpus .jsonl")->required();
  analyze->add_option("--classes", an_classes, "class vocab json");
  analyze->add_option("--manifest", an_manifest, "split manifest json");
  analyze->add_option("--checkpoint", an_ckpt, "model checkpoint")
      ->required();
  analyze->add_option("--out", an_out, "report json path");
  analyze->add_option("--csv", an_csv, "histogram csv path")->required();

  // repro-ablation
  CommonOpts ab_opts;
  std::string ab_out;
  CLI::App* ablation = app.add_subcommand(
      "repro-ablation", "run the variant x task x seed comparison matrix");
  add_common(ablation, ab_opts, false);
  ablation->add_option("--out", ab_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : CLAP_ERROR_CONFIG;
  }

  if (gen->parsed()) {
    std::string config;
    bool printed = false;
    if (int rc = build_config(gen_opts, config, &printed)) return rc;
    if (printed) return 0;
    clap_status st = clap_generate_corpus(config.c_str(), gen_out.c_str());
    return st == CLAP_OK ? 0 : fail(st);
  }

  if (train->parsed()) {
    std::string config;
    bool printed = false;
    if (int rc = build_config(train_opts, config, &printed)) return rc;
    if (printed) return 0;
    CorpusHandle corpus;
    clap_status st = clap_corpus_open(
        train_corpus.c_str(),
        classes_path_for(train_corpus, train_classes).c_str(), &corpus.ptr);
    if (st != CLAP_OK) return fail(st);
    st = clap_train(config.c_str(), corpus.ptr,
                    manifest_path_for(train_corpus, train_manifest).c_str(),
                    train_out.c_str(),
                    train_log.empty() ? nullptr : train_log.c_str());
    return st == CLAP_OK ? 0 : fail(st);
  }

  if (extract->parsed()) {
    std::string config;
    bool printed = false;
    if (int rc = build_config(extract_opts, config, &printed)) return rc;
    if (printed) return 0;
    CorpusHandle corpus;
    clap_status st = clap_corpus_open(
        ex_corpus.c_str(), classes_path_for(ex_corpus, ex_classes).c_str(),
        &corpus.ptr);
    if (st != CLAP_OK) return fail(st);
    ModelHandle model;
    st = clap_model_open(ex_ckpt.c_str(), &model.ptr);
    if (st != CLAP_OK) return fail(st);
    st = clap_extract_features(model.ptr, corpus.ptr, ex_out.c_str());
    return st == CLAP_OK ? 0 : fail(st);
  }

  if (tal->parsed()) {
    return run_eval(
        tal_opts, tal_corpus, tal_classes, tal_manifest, tal_ckpt, tal_out,
        [&](const char* cfg, const clap_model* m, const clap_corpus* c,
            const char* manifest, char** report) {
          return clap_eval_tal(cfg, m, c, manifest,
                               tal_dets.empty() ? nullptr : tal_dets.c_str(),
                               report);
        });
  }

  if (fewshot->parsed()) {
    return run_eval(fs_opts, fs_corpus, fs_classes, fs_manifest, fs_ckpt,
                    fs_out, clap_eval_fewshot);
  }

  if (grounding->parsed()) {
    return run_eval(gr_opts, gr_corpus, gr_classes, gr_manifest, gr_ckpt,
                    gr_out, clap_eval_grounding);
  }

  if (analyze->parsed()) {
    return run_eval(
        an_opts, an_corpus, an_classes, an_manifest, an_ckpt, an_out,
        [&](const char* cfg, const clap_model* m, const clap_corpus* c,
            const char* manifest, char** report) {
          return clap_analyze_features(cfg, m, c, manifest, an_csv.c_str(),
                                       report);
        });
  }

  if (ablation->parsed()) {
    std::string config;
    bool printed = false;
    if (int rc = build_config(ab_opts, config, &printed)) return rc;
    if (printed) return 0;
    clap_status st = clap_repro_ablation(config.c_str(), ab_out.c_str());
    return st == CLAP_OK ? 0 : fail(st);
  }

  return 0;
}
