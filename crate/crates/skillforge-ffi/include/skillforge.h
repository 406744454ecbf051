#ifndef SKILLFORGE_H
#define SKILLFORGE_H

/* Generated by cbindgen from skillforge-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible FFI call.
typedef enum SfStatus {
  SF_STATUS_OK = 0,
  // A required pointer argument was null.
  SF_STATUS_NULL_ARGUMENT = 1,
  // A string argument was not valid UTF-8.
  SF_STATUS_INVALID_UTF8 = 2,
  // The model file could not be read.
  SF_STATUS_IO = 3,
  // The model file is malformed.
  SF_STATUS_CORRUPT = 4,
  // The queried skill is not in the store.
  SF_STATUS_UNKNOWN_SKILL = 5,
  // An argument was out of range (k = 0, index out of bounds, …).
  SF_STATUS_INVALID_ARGUMENT = 6,
  // The output buffer is too small; the required size is reported.
  SF_STATUS_BUFFER_TOO_SMALL = 7,
  // An internal invariant failed.
  SF_STATUS_INTERNAL = 8,
} SfStatus;

// Opaque store handle.
typedef struct SfStore SfStore;

// One query result: the skill's store index and its similarity score.
typedef struct SfNeighbor {
  uint32_t index;
  float score;
} SfNeighbor;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Version string of the library; static storage, do not free.
const char *sf_version(void);

// Message describing the most recent failure on this thread; static until
// the next failing call, do not free.
const char *sf_last_error(void);

// Opens a vector-store file (binary or text format) and returns a handle
// through `out_store`.
//
// # Safety
// `path` must point to a NUL-terminated string and `out_store` to writable
// pointer storage; the returned handle must be released with
// [`sf_store_close`].
enum SfStatus sf_store_open(const char *path, struct SfStore **out_store);

// Releases a store handle. Null is a no-op.
//
// # Safety
// `store` must be a handle from [`sf_store_open`] that has not been closed.
void sf_store_close(struct SfStore *store);

// Number of skills in the store; 0 for a null handle.
//
// # Safety
// `store` must be a live handle or null.
uint32_t sf_store_size(const struct SfStore *store);

// Vector dimensionality; 0 for a null handle.
//
// # Safety
// `store` must be a live handle or null.
uint32_t sf_store_dim(const struct SfStore *store);

// Canonical skill string at `index`; borrowed from the store, valid until
// close. Null when the handle is null or the index is out of range.
//
// # Safety
// `store` must be a live handle or null.
const char *sf_store_skill(const struct SfStore *store, uint32_t index);

// Resolves a raw skill string (exact, then cleaned) to its store index.
//
// # Safety
// `store` must be a live handle; `skill` a NUL-terminated string;
// `out_index` writable.
enum SfStatus sf_store_resolve(const struct SfStore *store, const char *skill, uint32_t *out_index);

// Copies the embedding at `index` into `out` (capacity `out_cap` floats).
// Fails with `BufferTooSmall` when `out_cap` is less than the store
// dimensionality.
//
// # Safety
// `store` must be a live handle; `out` must point to at least `out_cap`
// writable floats.
enum SfStatus sf_store_embedding(const struct SfStore *store,
                                 uint32_t index,
                                 float *out,
                                 uint32_t out_cap);

// Writes up to `k` nearest skills to `query` into `out` and the result
// count into `out_len`. Fewer than `k` results are returned when the store
// has fewer candidates.
//
// # Safety
// `store` must be a live handle; `query` a NUL-terminated string; `out`
// must point to at least `out_cap` writable entries; `out_len` may be null.
enum SfStatus sf_store_top_k(const struct SfStore *store,
                             const char *query,
                             uint32_t k,
                             struct SfNeighbor *out,
                             uint32_t out_cap,
                             uint32_t *out_len);

// Writes up to `k` nearest skills to `v(b) − v(a) + v(c)` into `out`.
//
// # Safety
// As for [`sf_store_top_k`]; `a`, `b`, `c` must be NUL-terminated strings.
enum SfStatus sf_store_analogy(const struct SfStore *store,
                               const char *a,
                               const char *b,
                               const char *c,
                               uint32_t k,
                               struct SfNeighbor *out,
                               uint32_t out_cap,
                               uint32_t *out_len);

// Runs the skill-cleaning pipeline on `raw` and writes the NUL-terminated
// result into `buf`. `out_len` receives the required buffer size including
// the NUL, whether or not the copy succeeded. An empty result means the
// input cleans away to nothing.
//
// # Safety
// `raw` must be a NUL-terminated string; `buf` must point to at least
// `buf_cap` writable bytes; `out_len` may be null.
enum SfStatus sf_normalize(const char *raw, char *buf, uint32_t buf_cap, uint32_t *out_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SKILLFORGE_H */
