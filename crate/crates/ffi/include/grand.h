#ifndef GRAND_H
#define GRAND_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  GRAND_STATUS_OK = 0,
  GRAND_STATUS_NULL_ARGUMENT = 1,
  GRAND_STATUS_INVALID_UTF8 = 2,
  GRAND_STATUS_IO = 3,
  GRAND_STATUS_PARSE = 4,
  GRAND_STATUS_CONFIG = 5,
  GRAND_STATUS_NOT_FOUND = 6,
  GRAND_STATUS_BUFFER_TOO_SMALL = 7,
  GRAND_STATUS_FAILED = 8,
  GRAND_STATUS_PANIC = 9,
} GrandStatus;

/**
 * A table of named vectors.
 */
typedef struct GrandEmbedding GrandEmbedding;

/**
 * A loaded knowledge graph.
 */
typedef struct GrandGraph GrandGraph;

/**
 * Test-set scores of a finished run.
 */
typedef struct {
  double accuracy;
  double micro_f1;
  double macro_f1;
} GrandScores;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next call into this library on the same thread.
 */
const char *grand_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *grand_version(void);

/**
 * Load an N-Triples file (optionally gzipped). Statements whose predicate
 * is `exclude_predicate` are dropped; pass null to keep everything.
 *
 * # Safety
 * `path` and `exclude_predicate` must be null or NUL-terminated strings;
 * `out` must be valid for writes.
 */
GrandStatus grand_graph_load(const char *path, const char *exclude_predicate, GrandGraph **out);

/**
 * # Safety
 * `g` must be a live handle from [`grand_graph_load`] or null.
 */
size_t grand_graph_entity_count(const GrandGraph *g);

/**
 * # Safety
 * `g` must be a live handle from [`grand_graph_load`] or null.
 */
size_t grand_graph_edge_count(const GrandGraph *g);

/**
 * # Safety
 * `g` must come from [`grand_graph_load`] and not be used afterwards.
 */
void grand_graph_free(GrandGraph *g);

/**
 * Load a vector file in word2vec text format.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` valid for writes.
 */
GrandStatus grand_embedding_load(const char *path, GrandEmbedding **out);

/**
 * # Safety
 * `e` must be a live handle from [`grand_embedding_load`] or null.
 */
size_t grand_embedding_dim(const GrandEmbedding *e);

/**
 * # Safety
 * `e` must be a live handle from [`grand_embedding_load`] or null.
 */
size_t grand_embedding_len(const GrandEmbedding *e);

/**
 * Copy the vector for `key` into `buf`, which holds `buf_len` floats.
 *
 * # Safety
 * `e` must be a live handle, `key` a NUL-terminated string and `buf` valid
 * for `buf_len` writes.
 */
GrandStatus grand_embedding_lookup(const GrandEmbedding *e,
                                   const char *key,
                                   float *buf,
                                   size_t buf_len);

/**
 * # Safety
 * `e` must come from [`grand_embedding_load`] and not be used afterwards.
 */
void grand_embedding_free(GrandEmbedding *e);

/**
 * Run the experiment described by a TOML config file. `scores` may be
 * null.
 *
 * # Safety
 * `config_path` must be a NUL-terminated string; `scores` must be null or
 * valid for writes.
 */
GrandStatus grand_run_experiment(const char *config_path, GrandScores *scores);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GRAND_H */
