#ifndef SEARCHDEPTH_H
#define SEARCHDEPTH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SdStatus {
  SD_STATUS_OK = 0,
  SD_STATUS_NULL_POINTER = 1,
  SD_STATUS_INVALID_UTF8 = 2,
  SD_STATUS_INVALID_ARGUMENT = 3,
  SD_STATUS_SCHEMA = 4,
  SD_STATUS_IO = 5,
  SD_STATUS_BUFFER_TOO_SMALL = 6,
  SD_STATUS_PANIC = 7,
} SdStatus;

/**
 * BM25 index over a corpus file. Opaque to C.
 */
typedef struct SdIndex SdIndex;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer is
 * valid until the next call into this library on the same thread.
 */
const char *sd_last_error(void);

/**
 * Releases a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and must not be freed twice.
 */
void sd_string_free(char *s);

/**
 * Writes 1 when `pred` matches any of the `n_golds` aliases after
 * normalisation, else 0.
 *
 * # Safety
 * `pred` and each of `golds[0..n_golds]` must be NUL-terminated strings.
 */
enum SdStatus sd_exact_match(const char *pred,
                             const char *const *golds,
                             uintptr_t n_golds,
                             uint8_t *out);

/**
 * Best token F1 of `pred` against the aliases.
 *
 * # Safety
 * As for [`sd_exact_match`].
 */
enum SdStatus sd_token_f1(const char *pred,
                          const char *const *golds,
                          uintptr_t n_golds,
                          double *out);

/**
 * Format reward with the default constants.
 *
 * # Safety
 * `out` must be a writable pointer.
 */
enum SdStatus sd_format_reward(bool valid, bool is_terminal, double *out);

/**
 * Efficiency reward of step `t` (1-based) out of `depth`; `t_c` is -1 when
 * no intermediate answer was correct.
 *
 * # Safety
 * `out` must be a writable pointer.
 */
enum SdStatus sd_efficiency_reward(uintptr_t t, int64_t t_c, uintptr_t depth, double *out);

/**
 * F1 gain of step `t` (1-based) over the best earlier step.
 *
 * # Safety
 * `f1_by_step` must point to `n` readable doubles.
 */
enum SdStatus sd_quality_reward(const double *f1_by_step, uintptr_t n, uintptr_t t, double *out);

/**
 * Cumulative reward for stopping after 1..=max_depth searches. Fills
 * `out[0..max_depth]` and sets `written`. When `capacity` is too small
 * nothing is copied, `written` holds the required length and the call
 * returns `SD_STATUS_BUFFER_TOO_SMALL`.
 *
 * # Safety
 * `out` must point to `capacity` writable doubles; `written` must be writable.
 */
enum SdStatus sd_reward_curve(uintptr_t t_c,
                              uintptr_t max_depth,
                              bool include_outcome,
                              double *out,
                              uintptr_t capacity,
                              uintptr_t *written);

/**
 * Scores one trajectory (a JSON Lines record) against its question record
 * and returns the scored trajectory as JSON.
 *
 * # Safety
 * Both inputs must be NUL-terminated strings; `out` must be writable.
 */
enum SdStatus sd_score_trajectory_json(const char *trajectory_json,
                                       const char *record_json,
                                       char **out);

/**
 * Builds a BM25 index from a JSON Lines corpus file.
 *
 * # Safety
 * `corpus_path` must be a NUL-terminated string; `out` must be writable.
 */
enum SdStatus sd_index_open(const char *corpus_path, struct SdIndex **out);

/**
 * Number of documents in the index.
 *
 * # Safety
 * `index` must come from [`sd_index_open`]; `out` must be writable.
 */
enum SdStatus sd_index_len(const struct SdIndex *index, uintptr_t *out);

/**
 * Top `k` documents for `query` as a JSON array of `{"id", "score"}`.
 *
 * # Safety
 * `index` must come from [`sd_index_open`]; `query` must be a
 * NUL-terminated string; `out` must be writable.
 */
enum SdStatus sd_index_search_json(const struct SdIndex *index,
                                   const char *query,
                                   uintptr_t k,
                                   char **out);

/**
 * Releases an index. NULL is ignored.
 *
 * # Safety
 * `index` must come from [`sd_index_open`] and must not be freed twice.
 */
void sd_index_free(struct SdIndex *index);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SEARCHDEPTH_H */
