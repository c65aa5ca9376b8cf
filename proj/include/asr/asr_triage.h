/* SPDX-License-Identifier: Apache-2.0 */
/* Copyright 2026 The asr-triage Authors */

/*
 * C interface to the asr-triage engine.
 *
 * Conventions
 *  - Every fallible call returns an asr_status; ASR_OK is zero.
 *  - On failure asr_last_error() describes the most recent error on the
 *    calling thread. The pointer stays valid until the next call on that thread.
 *  - Strings returned through char** out-parameters are heap allocated and
 *    must be released with asr_string_free().
 *  - Handles are opaque; close each one exactly once. Closing NULL is a no-op.
 *  - Structured inputs and outputs are UTF-8 JSON.
 */
#ifndef ASR_TRIAGE_H
#define ASR_TRIAGE_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define ASR_API __declspec(dllexport)
#else
#define ASR_API __attribute__((visibility("default")))
#endif

typedef enum asr_status {
    ASR_OK = 0,
    ASR_E_INVALID_ARGUMENT = 1,
    ASR_E_IO = 2,
    ASR_E_PARSE = 3,
    ASR_E_VALIDATION = 4,
    ASR_E_CONFIG = 5,
    ASR_E_NOT_FOUND = 6,
    ASR_E_CONFLICT = 7,
    ASR_E_UNAVAILABLE = 8,
    ASR_E_PAYLOAD_TOO_LARGE = 9,
    ASR_E_INTERNAL = 10
} asr_status;

typedef struct asr_scorer asr_scorer;
typedef struct asr_engine asr_engine;
typedef struct asr_server asr_server;

ASR_API const char* asr_version(void);
ASR_API const char* asr_last_error(void);
ASR_API const char* asr_status_name(asr_status status);
ASR_API void asr_string_free(char* s);

/* ---- corpus ---------------------------------------------------------- */

/* Writes n_normal + n_asr synthetic labelled records as corpus JSONL. */
ASR_API asr_status asr_synthesize(size_t n_normal, size_t n_asr, uint64_t seed, const char* out_path);
/* Same generator, written as an unlabelled threshold corpus (one text per line). */
ASR_API asr_status asr_synthesize_threshold(size_t n_normal, size_t n_asr, uint64_t seed, const char* out_path);

/* ---- models ---------------------------------------------------------- */

/* Trains kind ("bow", "rnn", "transformer") on a labelled corpus and writes
 * the weight file. options_json may be NULL. report_json (optional) receives
 * a JSON training report including the model id. */
ASR_API asr_status asr_train(const char* kind, const char* corpus_path, const char* weights_out,
                             const char* options_json, char** report_json);

/* Opens a native weight file of any kind. */
ASR_API asr_status asr_scorer_open(const char* weights_path, asr_scorer** out);
/* Opens an ONNX graph plus vocabulary through ONNX Runtime. window/overlap of
 * zero select the defaults (256/32). */
ASR_API asr_status asr_scorer_open_onnx(const char* graph_path, const char* vocab_path, size_t window,
                                        size_t overlap, asr_scorer** out);
ASR_API void asr_scorer_close(asr_scorer* scorer);
/* Borrowed strings, valid while the scorer is open. */
ASR_API const char* asr_scorer_model_id(const asr_scorer* scorer);
ASR_API const char* asr_scorer_kind(const asr_scorer* scorer);

/* Fragment score. detail_json (optional) receives segment scores and spans. */
ASR_API asr_status asr_scorer_score(const asr_scorer* scorer, const char* text, double* score, char** detail_json);

/* Exports a native transformer weight file as an ONNX graph plus vocabulary. */
ASR_API asr_status asr_export_onnx(const char* weights_path, const char* graph_out, const char* vocab_out);

/* ---- calibration ----------------------------------------------------- */

/* Scores a threshold corpus and writes a cutoff table for the given
 * percentages (NULL/0 selects the default grid). warnings_json (optional)
 * receives an array of sizing warnings. */
ASR_API asr_status asr_calibrate(const asr_scorer* scorer, const char* threshold_path, const double* percents,
                                 size_t n_percents, const char* table_out, char** warnings_json);

/* Efficacy of the scorer on a validation set at every entry of a cutoff
 * table. Writes a CSV report when report_csv is non-NULL; curve_json
 * (optional) receives the JSON variant. */
ASR_API asr_status asr_evaluate(const asr_scorer* scorer, const char* cutoffs_path, const char* validation_path,
                                const char* report_csv, char** curve_json);

/* ---- triage service -------------------------------------------------- */

/* Opens (and recovers) the review queue in data_dir. config_json may set
 * max_payload_bytes, default_page_size, max_page_size, snapshot_every. */
ASR_API asr_status asr_engine_open(const char* data_dir, const char* config_json, asr_engine** out);
ASR_API void asr_engine_close(asr_engine* engine);
/* Installs weights and their cutoff table with p as the active percentage. */
ASR_API asr_status asr_engine_configure(asr_engine* engine, const char* weights_path, const char* cutoffs_path,
                                        double p);
/* Same, reusing an open scorer (native or ONNX). */
ASR_API asr_status asr_engine_configure_scorer(asr_engine* engine, const asr_scorer* scorer,
                                               const char* cutoffs_path, double p);
ASR_API asr_status asr_engine_set_percent(asr_engine* engine, const char* model_id, double p);

/* {"response_id","item_id","text"} -> {"decisions":[...]} */
ASR_API asr_status asr_engine_submit(asr_engine* engine, const char* request_json, char** response_json);
/* status: "pending", "adjudicated" or NULL/"all". page_size 0 selects the default. */
ASR_API asr_status asr_engine_list(asr_engine* engine, const char* status, size_t page, size_t page_size,
                                   char** page_json);
/* {"outcome","category","reviewer_id"} -> updated item */
ASR_API asr_status asr_engine_adjudicate(asr_engine* engine, const char* fragment_id, const char* request_json,
                                         char** item_json);
/* Corpus JSONL of adjudications made at or after since_ms. */
ASR_API asr_status asr_engine_export(asr_engine* engine, int64_t since_ms, char** jsonl);
ASR_API asr_status asr_engine_metrics(asr_engine* engine, char** metrics_json);
ASR_API asr_status asr_engine_calibration(asr_engine* engine, char** calibration_json);

/* HTTP front end. port 0 picks a free port; bound_port receives it. The
 * server runs on a background thread until asr_server_stop(). */
ASR_API asr_status asr_server_start(asr_engine* engine, const char* host, int port, asr_server** out,
                                    int* bound_port);
/* Blocks until asr_server_stop() is called from another thread. */
ASR_API asr_status asr_server_wait(asr_server* server);
/* Stops serving; safe to call from any thread, more than once. */
ASR_API void asr_server_stop(asr_server* server);
/* Stops if needed and releases the handle. No thread may be waiting on it. */
ASR_API void asr_server_close(asr_server* server);

#ifdef __cplusplus
}
#endif

#endif /* ASR_TRIAGE_H */
