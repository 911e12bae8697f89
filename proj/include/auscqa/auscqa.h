/* Copyright 2026 The auscqa Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* C interface to the auscqa library.
 *
 * Every call returns an auscqa_status. On failure the message is available
 * from auscqa_last_error() on the calling thread until the next call.
 * Strings returned through char** out-parameters are owned by the caller
 * and released with auscqa_string_free(). Configuration and results are
 * JSON documents; a NULL or empty config means "all defaults".
 */

#ifndef AUSCQA_AUSCQA_H_
#define AUSCQA_AUSCQA_H_

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(__GNUC__)
#define AUSCQA_API __attribute__((visibility("default")))
#else
#define AUSCQA_API
#endif

typedef enum {
  AUSCQA_OK = 0,
  AUSCQA_ERR_USAGE = 1,    /* bad arguments or configuration */
  AUSCQA_ERR_DATA = 2,     /* malformed or invalid input data */
  AUSCQA_ERR_IO = 3,       /* filesystem failure */
  AUSCQA_ERR_NUMERIC = 4,  /* non-finite values, shape mismatch */
  AUSCQA_ERR_INTERNAL = 5
} auscqa_status;

typedef struct auscqa_model auscqa_model;

/* Receives each training log record as a JSON object. */
typedef void (*auscqa_log_fn)(const char* record_json, void* user);

AUSCQA_API const char* auscqa_version(void);
AUSCQA_API const char* auscqa_last_error(void);
AUSCQA_API void auscqa_string_free(char* s);

/* Writes a synthetic corpus (clips/, manifest.jsonl, truth.jsonl,
 * synth_spec.json) to out_dir. summary_json: {patients, clips, manifest}. */
AUSCQA_API auscqa_status auscqa_synth(const char* spec_json, const char* out_dir,
                                      char** summary_json);

/* Decodes, downmixes, resamples to 16 kHz, truncates, normalizes and pads
 * one WAV recording, then writes it in the clip file format.
 * info_json: {samples, valid_len, seconds, tokens}. */
AUSCQA_API auscqa_status auscqa_preprocess(const char* in_path, const char* site,
                                           double max_seconds, const char* out_path,
                                           char** info_json);

/* Builds the vocabulary and pretrains the text decoder. train_config_json
 * is a training config; only its model.lm, split, seed and lm_* keys
 * matter. */
AUSCQA_API auscqa_status auscqa_pretrain_lm(const char* train_config_json,
                                            const char* manifest_path,
                                            const char* out_checkpoint);

/* Trains, then evaluates the best checkpoint and its gate-zero copy on the
 * test split. Clip paths resolve against data_root. report_json is the
 * report.json written to out_dir. */
AUSCQA_API auscqa_status auscqa_train(const char* train_config_json, const char* manifest_path,
                                      const char* data_root, const char* lm_checkpoint,
                                      const char* out_dir, auscqa_log_fn on_log, void* user,
                                      char** report_json);

/* One run per context length. result_json: {"rows": [...], "table": "..."}. */
AUSCQA_API auscqa_status auscqa_ablate(const char* train_config_json, const char* manifest_path,
                                       const char* data_root, const char* lm_checkpoint,
                                       const double* seconds, size_t n_seconds,
                                       const char* out_dir, const char* reuse_dir,
                                       auscqa_log_fn on_log, void* user, char** result_json);

AUSCQA_API auscqa_status auscqa_model_load(const char* checkpoint, auscqa_model** out);
AUSCQA_API void auscqa_model_free(auscqa_model* model);

/* Answers one question about a patient. clips_json is an array of
 * {"path", "site"} resolved against data_root. With use_audio == 0 the
 * decoder runs text-only. answer_json: {answer, prompt, prompt_ids}. */
AUSCQA_API auscqa_status auscqa_model_answer(const auscqa_model* model, const char* clips_json,
                                             const char* data_root, const char* question,
                                             int use_audio, char** answer_json);

/* Scores a predictions JSONL file. config_json: {"embed_dim", "embed_seed"}
 * for the token embedder behind the embedding score. report_json: the
 * MetricReport. When table is non-NULL it receives the plain-text table. */
AUSCQA_API auscqa_status auscqa_evaluate(const char* predictions_path, const char* config_json,
                                         char** report_json, char** table);

#ifdef __cplusplus
}
#endif

#endif /* AUSCQA_AUSCQA_H_ */
