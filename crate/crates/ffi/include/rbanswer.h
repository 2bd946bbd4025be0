#ifndef RBANSWER_H
#define RBANSWER_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RbAnswer {
  RB_ANSWER_ANSWERABLE = 0,
  RB_ANSWER_NOT_ANSWERABLE = 1,
  RB_ANSWER_UNKNOWN = 2,
} RbAnswer;

/**
 * Result of every fallible call.
 */
typedef enum RbStatus {
  RB_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  RB_STATUS_NULL_ARG = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  RB_STATUS_UTF8 = 2,
  /**
   * The problem text did not parse or validate.
   */
  RB_STATUS_PARSE = 3,
  /**
   * No query of that name (or index) in the problem.
   */
  RB_STATUS_NO_SUCH_QUERY = 4,
  /**
   * The decision pipeline reported an error.
   */
  RB_STATUS_DECIDE = 5,
  /**
   * Internal error; the library caught a panic.
   */
  RB_STATUS_PANIC = 6,
} RbStatus;

/**
 * A parsed problem file. Opaque to C.
 */
typedef struct RbProblem RbProblem;

/**
 * Decider settings. Obtain defaults from [`rb_options_default`].
 */
typedef struct RbOptions {
  /**
   * Make the query's constants accessible (also enabled by the file's own
   * `option accessible-constants true`).
   */
  bool accessible_constants;
  /**
   * Largest ID width sent straight to linearization.
   */
  uint32_t width_threshold;
  /**
   * Rounds for budgeted chases.
   */
  uint32_t round_budget;
  /**
   * Facts any single chase may hold.
   */
  uint64_t fact_budget;
} RbOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Default decider settings.
 */
struct RbOptions rb_options_default(void);

/**
 * Parse a problem file. On success `*out` receives a handle to release with
 * [`rb_problem_free`]; on failure `*out` is set to null.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum RbStatus rb_problem_parse(const char *text, struct RbProblem **out);

/**
 * Release a handle from [`rb_problem_parse`]. Null is ignored.
 *
 * # Safety
 * `problem` must be null or a handle not yet freed.
 */
void rb_problem_free(struct RbProblem *problem);

/**
 * Number of queries in the problem (0 for null).
 *
 * # Safety
 * `problem` must be null or a live handle.
 */
uintptr_t rb_problem_query_count(const struct RbProblem *problem);

/**
 * Name of the query at `index`, borrowed from the handle (valid until it is
 * freed).
 *
 * # Safety
 * `problem` must be a live handle and `out` a valid pointer.
 */
enum RbStatus rb_problem_query_name(const struct RbProblem *problem,
                                    uintptr_t index,
                                    const char **out);

/**
 * Decide the named query. `opts` may be null for defaults.
 *
 * # Safety
 * `problem` must be a live handle, `query` a NUL-terminated string, `opts`
 * null or valid, and `out` a valid pointer.
 */
enum RbStatus rb_decide_answer(const struct RbProblem *problem,
                               const char *query,
                               const struct RbOptions *opts,
                               enum RbAnswer *out);

/**
 * Decide the named query and return the verdict as JSON
 * (`{answer, class, pipeline, witness, stats}`). On success `*out_json`
 * receives a string to release with [`rb_string_free`].
 *
 * # Safety
 * As for [`rb_decide_answer`].
 */
enum RbStatus rb_decide_json(const struct RbProblem *problem,
                             const char *query,
                             const struct RbOptions *opts,
                             char **out_json);

/**
 * Message for the last failed call on this thread; empty after a success.
 * Valid until the next library call on the same thread.
 */
const char *rb_last_error_message(void);

/**
 * Release a string returned by the library. Null is ignored.
 *
 * # Safety
 * `s` must be null or a string from [`rb_decide_json`] not yet freed.
 */
void rb_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RBANSWER_H */
