#ifndef GVERIFY_H
#define GVERIFY_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GvFormat {
  GV_FORMAT_TEXT = 0,
  GV_FORMAT_DOT = 1,
  GV_FORMAT_JSON = 2,
} GvFormat;

/**
 * Result of every fallible call. The first four match the CLI exit codes.
 */
typedef enum GvStatus {
  GV_STATUS_OK = 0,
  GV_STATUS_DIVERGENT = 1,
  GV_STATUS_INVALID_KB = 2,
  GV_STATUS_FAILURE = 3,
  GV_STATUS_NULL_ARGUMENT = 4,
  GV_STATUS_INVALID_ARGUMENT = 5,
  GV_STATUS_PANIC = 6,
} GvStatus;

typedef enum GvVerdict {
  GV_VERDICT_CONFORM = 0,
  GV_VERDICT_NOT_OPTIMAL = 1,
  GV_VERDICT_NON_CONFORM = 2,
} GvVerdict;

/**
 * A parsed knowledge base.
 */
typedef struct GvKb GvKb;

/**
 * A learned tree together with its factored form.
 */
typedef struct GvTree GvTree;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Last error message on this thread, or null. Valid until the next call
 * into this library from the same thread.
 */
const char *gv_last_error(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void gv_string_free(char *s);

/**
 * Parses KB source text.
 *
 * # Safety
 * `source` must be a NUL-terminated string; `out_kb` a writable pointer.
 */
enum GvStatus gv_kb_parse(const char *source, struct GvKb **out_kb);

/**
 * Reads and parses a KB file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out_kb` a writable pointer.
 */
enum GvStatus gv_kb_load(const char *path, struct GvKb **out_kb);

/**
 * # Safety
 * `kb` must come from `gv_kb_parse`/`gv_kb_load` and not have been freed.
 */
void gv_kb_free(struct GvKb *kb);

/**
 * Runs static and coverage validation. Returns `GV_STATUS_INVALID_KB`
 * when there are findings; the last error then lists them one per line.
 *
 * # Safety
 * `kb` must be a live handle; `findings` may be null.
 */
enum GvStatus gv_kb_validate(const struct GvKb *kb, size_t *findings);

/**
 * Number of variables, i.e. the expected length of value arrays.
 *
 * # Safety
 * `kb` must be a live handle; `n` writable.
 */
enum GvStatus gv_kb_variable_count(const struct GvKb *kb, size_t *n);

/**
 * Input-space sizes: full product, guard-respecting, realistic.
 *
 * # Safety
 * `kb` must be a live handle; the three outputs writable.
 */
enum GvStatus gv_kb_count(const struct GvKb *kb,
                          uint64_t *unconditioned,
                          uint64_t *conditional,
                          uint64_t *realistic);

/**
 * Class label of one input vector, as encoded value indices in variable
 * order (NA is the index just past a conditional variable's domain).
 *
 * # Safety
 * `values_ptr` must point to `len` readable elements; `label` writable.
 */
enum GvStatus gv_kb_label(const struct GvKb *kb,
                          const uint16_t *values_ptr,
                          size_t len,
                          char **label);

/**
 * Verdict on the proposed treatment encoded in the vector.
 *
 * # Safety
 * `values_ptr` must point to `len` readable elements; `verdict` writable.
 */
enum GvStatus gv_kb_critique(const struct GvKb *kb,
                             const uint16_t *values_ptr,
                             size_t len,
                             enum GvVerdict *verdict);

/**
 * Enumerates, labels, learns and factorizes. `jobs` of 0 means 1.
 *
 * # Safety
 * `kb` must be a live handle; `out_tree` writable.
 */
enum GvStatus gv_tree_build(const struct GvKb *kb, size_t jobs, struct GvTree **out_tree);

/**
 * # Safety
 * `tree` must come from `gv_tree_build` and not have been freed.
 */
void gv_tree_free(struct GvTree *tree);

/**
 * Node counts before and after factorization.
 *
 * # Safety
 * `tree` must be a live handle; both outputs writable.
 */
enum GvStatus gv_tree_node_count(const struct GvTree *tree, size_t *raw, size_t *factored);

/**
 * Renders the factored tree.
 *
 * # Safety
 * `tree` must be a live handle; `rendered` writable.
 */
enum GvStatus gv_tree_render(const struct GvTree *tree, enum GvFormat format, char **rendered);

/**
 * Checks the factored tree against `kb` on every realistic vector.
 * Returns `GV_STATUS_DIVERGENT` when they disagree anywhere; the last
 * error then names the first witness.
 *
 * # Safety
 * Both handles must be live; `divergences` may be null.
 */
enum GvStatus gv_tree_verify(const struct GvTree *tree,
                             const struct GvKb *kb,
                             uint64_t *divergences);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GVERIFY_H */
