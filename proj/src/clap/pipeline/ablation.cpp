#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>

#include "clap/pipeline/pipeline.hpp"

namespace clap::pipeline {

namespace {

RunConfig with_seed(RunConfig cfg, std::uint64_t seed) {
  cfg.seed = seed;
  cfg.generator.seed = seed;
  cfg.trainer_cfg.seed = seed;
  cfg.eval.probe.seed = seed;
  cfg.config_hash = hash_of_config(effective_config_json(cfg));
  return cfg;
}

std::string format_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Row {
  std::string variant;
  std::string task;
  std::string seed;
  std::string metric;
  std::string value;   // empty on failure
  std::string status;  // "ok" or "error: ..."
};

const std::vector<std::string>& task_metrics(const std::string& task) {
  static const std::vector<std::string> tal{"mAP@0.5", "mAP@0.75", "mAP@0.95",
                                            "AmAP"};
  static const std::vector<std::string> grounding{"recall@0.5", "recall@0.7",
                                                  "mIoU"};
  if (task == "grounding") return grounding;
  return tal;  // tal and fewshot share the suite
}

}  // namespace

void run_ablation(const RunConfig& cfg, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::vector<Row> rows;

  for (std::uint64_t seed : cfg.ablation.seeds) {
    RunConfig seed_cfg = with_seed(cfg, seed);
    corpus::Corpus corpus = corpus::generate_corpus(seed_cfg.generator);
    Manifest manifest = build_manifest(corpus, seed_cfg);

    for (const std::string& variant : cfg.ablation.variants) {
      // Checkpoints are trained lazily: tal/grounding use the full train
      // split, fewshot needs a base-class-only run.
      std::optional<model::ModelState> full_state, base_state;
      auto variant_cfg = [&](const char* partition) {
        RunConfig c = seed_cfg;
        c.trainer_cfg.objective = trainer::parse_objective(variant);
        c.train_split = "train";
        c.class_partition = partition;
        return c;
      };
      auto get_full = [&]() -> const model::ModelState& {
        if (!full_state)
          full_state =
              run_training(corpus, manifest, variant_cfg("all"), nullptr);
        return *full_state;
      };
      auto get_base = [&]() -> const model::ModelState& {
        if (!base_state)
          base_state =
              run_training(corpus, manifest, variant_cfg("base"), nullptr);
        return *base_state;
      };

      for (const std::string& task : cfg.ablation.tasks) {
        std::string seed_str = std::to_string(seed);
        try {
          nlohmann::json report;
          nlohmann::json metrics;
          if (task == "tal") {
            report = eval_tal_report(get_full(), corpus, manifest, seed_cfg);
            metrics = report;
          } else if (task == "fewshot") {
            RunConfig c = variant_cfg("base");
            report = eval_fewshot_report(get_base(), corpus, manifest, c);
            metrics = report.at("mean");
          } else {
            report =
                eval_grounding_report(get_full(), corpus, manifest, seed_cfg);
            metrics = report;
          }
          for (const std::string& name : task_metrics(task)) {
            rows.push_back({variant, task, seed_str, name,
                            format_value(metrics.at(name).get<double>()),
                            "ok"});
          }
        } catch (const Error& e) {
          for (const std::string& name : task_metrics(task))
            rows.push_back({variant, task, seed_str, name, "",
                            std::string("error: ") + e.what()});
        }
      }
    }
  }

  // Aggregates over the seeds that succeeded, in config order.
  for (const std::string& variant : cfg.ablation.variants) {
    for (const std::string& task : cfg.ablation.tasks) {
      for (const std::string& name : task_metrics(task)) {
        std::vector<double> values;
        for (const Row& r : rows) {
          if (r.variant == variant && r.task == task && r.metric == name &&
              r.status == "ok")
            values.push_back(std::stod(r.value));
        }
        if (values.empty()) continue;
        double mean = 0.0;
        for (double v : values) mean += v;
        mean /= static_cast<double>(values.size());
        double var = 0.0;
        if (values.size() > 1) {
          for (double v : values) var += (v - mean) * (v - mean);
          var /= static_cast<double>(values.size() - 1);
        }
        rows.push_back({variant, task, "mean", name, format_value(mean),
                        "ok"});
        rows.push_back(
            {variant, task, "std", name, format_value(std::sqrt(var)), "ok"});
      }
    }
  }

  std::string csv_path =
      (std::filesystem::path(out_dir) / "ablation.csv").string();
  std::ofstream out(csv_path);
  if (!out) throw DataError("cannot open ablation csv for writing: " + csv_path);
  out << "variant,task,seed,metric,value,status\n";
  for (const Row& r : rows) {
    out << r.variant << ',' << r.task << ',' << r.seed << ',' << r.metric
        << ',' << r.value << ',' << r.status << '\n';
  }

  nlohmann::json summary{{"config_hash", cfg.config_hash},
                         {"version", kVersion},
                         {"seeds", cfg.ablation.seeds},
                         {"variants", cfg.ablation.variants},
                         {"tasks", cfg.ablation.tasks},
                         {"rows", rows.size()}};
  std::ofstream sum_out(
      (std::filesystem::path(out_dir) / "summary.json").string());
  sum_out << summary.dump(2) << '\n';
}

}  // namespace clap::pipeline
