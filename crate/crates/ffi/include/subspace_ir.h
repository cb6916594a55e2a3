#ifndef SUBSPACE_IR_H
#define SUBSPACE_IR_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define QIR_FRAGMENT_DOCUMENT 0

#define QIR_FRAGMENT_PARAGRAPH 1

#define QIR_FRAGMENT_SENTENCE 2

#define QIR_WEIGHTING_TFIDF 0

#define QIR_WEIGHTING_TF 1

#define QIR_WEIGHTING_BINARY 2

#define QIR_DIM_HIGHEST 0

#define QIR_DIM_MEAN 1

#define QIR_DIM_ALL 2

#define QIR_TERM_WEIGHT_UNIFORM 0

#define QIR_TERM_WEIGHT_IDF 1

#define QIR_CONSTRUCTION_MIXTURE 0

#define QIR_CONSTRUCTION_SUPERPOSITION 1

typedef enum QirStatus {
  QIR_STATUS_OK = 0,
  QIR_STATUS_NULL_POINTER = 1,
  QIR_STATUS_INVALID_UTF8 = 2,
  QIR_STATUS_IO = 3,
  QIR_STATUS_PARSE = 4,
  QIR_STATUS_MISMATCH = 5,
  QIR_STATUS_EMPTY_QUERY = 6,
  QIR_STATUS_INVALID_ARGUMENT = 7,
  QIR_STATUS_OUT_OF_RANGE = 8,
  QIR_STATUS_INTERNAL = 9,
} QirStatus;

typedef struct QirEngine QirEngine;

typedef struct QirResults QirResults;

// Model parameters for one search. Enumerated fields take the `QIR_*`
// constants.
typedef struct QirConfig {
  uint32_t fragment;
  uint32_t doc_weighting;
  uint32_t query_weighting;
  uint32_t doc_dim;
  uint32_t query_dim;
  uint32_t term_weight;
  uint32_t construction;
  // BM25 candidates to re-rank.
  size_t candidates;
} QirConfig;

// Term-density build options, fixed for the lifetime of an engine.
typedef struct QirEngineOptions {
  size_t rank_cap;
  size_t sample_size;
  uint64_t seed;
} QirEngineOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static nul-terminated string.
const char *qir_version(void);

// Message for the last failed call on this thread, or null. The pointer is
// valid until the next library call on this thread.
const char *qir_last_error_message(void);

// Fills `out` with the default configuration.
//
// # Safety
// `out` must be null or point to writable memory for a `QirConfig`.
enum QirStatus qir_config_default(struct QirConfig *out);

// Fills `out` with the default engine options.
//
// # Safety
// `out` must be null or point to writable memory for a `QirEngineOptions`.
enum QirStatus qir_engine_options_default(struct QirEngineOptions *out);

// Builds an engine from a JSONL corpus file. `options` may be null for
// defaults. On success `*out` owns a handle released by [`qir_engine_free`].
//
// # Safety
// `path` must be null or a nul-terminated string; `options` null or valid;
// `out` null or writable.
enum QirStatus qir_engine_open_corpus(const char *path,
                                      const struct QirEngineOptions *options,
                                      struct QirEngine **out);

// Opens an index directory written by the command-line `index` step.
//
// # Safety
// As for [`qir_engine_open_corpus`].
enum QirStatus qir_engine_open_index(const char *dir,
                                     const struct QirEngineOptions *options,
                                     struct QirEngine **out);

// Registers a prebuilt term-density store. Fails with
// `QIR_STATUS_MISMATCH` when it was built for another index.
//
// # Safety
// `engine` must be null or a live handle; `path` null or nul-terminated.
enum QirStatus qir_engine_add_store(const struct QirEngine *engine, const char *path);

// Runs one query. `config` may be null for defaults. On success `*out`
// owns a result handle released by [`qir_results_free`].
//
// # Safety
// `engine` null or live; `query` null or nul-terminated; `config` null or
// valid; `out` null or writable.
enum QirStatus qir_engine_search(const struct QirEngine *engine,
                                 const char *query,
                                 const struct QirConfig *config,
                                 struct QirResults **out);

// Number of ranked documents; 0 for a null handle.
//
// # Safety
// `results` must be null or a live handle.
size_t qir_results_len(const struct QirResults *results);

// Document id at `rank` (0-based), owned by the handle; null when out of
// range.
//
// # Safety
// `results` must be null or a live handle.
const char *qir_results_doc_id(const struct QirResults *results, size_t rank);

// Score at `rank` (0-based).
//
// # Safety
// `results` null or live; `out` null or writable.
enum QirStatus qir_results_score(const struct QirResults *results, size_t rank, double *out);

// # Safety
// `results` must be null or a handle not yet freed.
void qir_results_free(struct QirResults *results);

// # Safety
// `engine` must be null or a handle not yet freed, with no search in flight.
void qir_engine_free(struct QirEngine *engine);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SUBSPACE_IR_H */
