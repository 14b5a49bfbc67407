/* C interface to the contrastive language-action pre-training pipeline.
 *
 * All functions return a clap_status; non-zero values match the CLI exit
 * codes (2 config error, 3 data error, 4 numeric abort). On failure,
 * clap_last_error() returns a message describing what went wrong (valid
 * until the next API call on the same thread).
 *
 * Configuration is passed as a JSON document (see README for the schema);
 * NULL or "" selects the built-in defaults. Strings returned through
 * out-parameters are heap-allocated and must be released with
 * clap_string_free().
 */
#ifndef CLAP_CAPI_H
#define CLAP_CAPI_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum clap_status {
  CLAP_OK = 0,
  CLAP_ERROR_CONFIG = 2,
  CLAP_ERROR_DATA = 3,
  CLAP_ERROR_NUMERIC = 4,
  CLAP_ERROR_USAGE = 5,
  CLAP_ERROR_INTERNAL = 6
} clap_status;

const char* clap_version(void);
const char* clap_last_error(void);
void clap_string_free(char* s);

/* Validates a config document and returns the fully merged effective
 * config (defaults filled in, unknown keys rejected). */
clap_status clap_config_normalize(const char* config_json, char** out_json);

/* Writes <out>, <stem>.classes.json and <stem>.manifest.json. */
clap_status clap_generate_corpus(const char* config_json,
                                 const char* out_corpus_path);

/* Opaque handles. */
typedef struct clap_corpus clap_corpus;
typedef struct clap_model clap_model;

clap_status clap_corpus_open(const char* corpus_path,
                             const char* classes_path, clap_corpus** out);
void clap_corpus_close(clap_corpus* corpus);
int64_t clap_corpus_video_count(const clap_corpus* corpus);

clap_status clap_model_open(const char* checkpoint_path, clap_model** out);
void clap_model_close(clap_model* model);

/* Post-pre-trains on the manifest's training split and writes the final
 * checkpoint; out_log_path (optional, may be NULL) receives the JSONL
 * training log. */
clap_status clap_train(const char* config_json, const clap_corpus* corpus,
                       const char* manifest_path,
                       const char* out_checkpoint_path,
                       const char* out_log_path);

/* Per-second backbone features for every video, as JSONL. */
clap_status clap_extract_features(const clap_model* model,
                                  const clap_corpus* corpus,
                                  const char* out_features_path);

/* Evaluation protocols. Each returns a JSON report through
 * out_report_json. eval_tal optionally writes the detections file;
 * analyze_features writes the histogram CSV. */
clap_status clap_eval_tal(const char* config_json, const clap_model* model,
                          const clap_corpus* corpus,
                          const char* manifest_path,
                          const char* out_detections_path, /* may be NULL */
                          char** out_report_json);

clap_status clap_eval_fewshot(const char* config_json,
                              const clap_model* model,
                              const clap_corpus* corpus,
                              const char* manifest_path,
                              char** out_report_json);

clap_status clap_eval_grounding(const char* config_json,
                                const clap_model* model,
                                const clap_corpus* corpus,
                                const char* manifest_path,
                                char** out_report_json);

clap_status clap_analyze_features(const char* config_json,
                                  const clap_model* model,
                                  const clap_corpus* corpus,
                                  const char* manifest_path,
                                  const char* out_histogram_csv_path,
                                  char** out_report_json);

/* Full (variant x task x seed) comparison matrix; writes ablation.csv and
 * summary.json into out_dir. Per-cell failures are recorded in the CSV and
 * the run continues. */
clap_status clap_repro_ablation(const char* config_json, const char* out_dir);

#ifdef __cplusplus
}
#endif

#endif /* CLAP_CAPI_H */
