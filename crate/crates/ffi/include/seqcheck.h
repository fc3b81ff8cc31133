#ifndef SEQCHECK_H
#define SEQCHECK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SeqcheckMode {
  /**
   * Decided by the input: DSL is strict, character strings are abstract.
   */
  SEQCHECK_MODE_AUTO = 0,
  SEQCHECK_MODE_STRICT = 1,
  SEQCHECK_MODE_ABSTRACT = 2,
} SeqcheckMode;

/**
 * Status code returned by every fallible function.
 */
typedef enum SeqcheckStatus {
  SEQCHECK_STATUS_OK = 0,
  SEQCHECK_STATUS_NULL_POINTER = 1,
  SEQCHECK_STATUS_INVALID_UTF8 = 2,
  SEQCHECK_STATUS_PARSE_ERROR = 3,
  SEQCHECK_STATUS_ENGINE_ERROR = 4,
  SEQCHECK_STATUS_INVALID_ARGUMENT = 5,
  SEQCHECK_STATUS_NOT_FINISHED = 6,
  SEQCHECK_STATUS_PANIC = 7,
} SeqcheckStatus;

/**
 * Verdict classes, numbered like the command-line exit codes.
 */
typedef enum SeqcheckVerdict {
  SEQCHECK_VERDICT_NO_DEADLOCK = 0,
  SEQCHECK_VERDICT_DEADLOCK = 2,
  SEQCHECK_VERDICT_ILLEGAL = 3,
} SeqcheckVerdict;

/**
 * Opaque incremental checking session.
 */
typedef struct SeqcheckSession SeqcheckSession;

typedef struct SeqcheckEnvelope {
  uint32_t tag;
  uint32_t source;
  uint32_t destination;
  uint32_t communicator;
} SeqcheckEnvelope;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static string.
 */
const char *seqcheck_version(void);

/**
 * Message describing the last failure on this thread, or NULL. The pointer
 * stays valid until the next call into this library on the same thread.
 */
const char *seqcheck_last_error(void);

/**
 * Creates a session. Returns NULL only on allocation failure.
 */
struct SeqcheckSession *seqcheck_session_new(enum SeqcheckMode mode);

/**
 * # Safety
 * `session` must be NULL or a pointer returned by [`seqcheck_session_new`]
 * that has not been freed.
 */
void seqcheck_session_free(struct SeqcheckSession *session);

/**
 * Appends abstract characters (UTF-8, whitespace ignored) to `rank`.
 * An empty string declares the process without adding messages.
 *
 * # Safety
 * `session` must be a live session handle and `chars` a NUL-terminated
 * string.
 */
enum SeqcheckStatus seqcheck_session_append_chars(struct SeqcheckSession *session,
                                                  uint32_t rank,
                                                  const char *chars);

/**
 * Appends `len` envelopes to `rank`. Send or receive is inferred from
 * whether `rank` is the source or the destination.
 *
 * # Safety
 * `session` must be a live session handle; `envelopes` must point to `len`
 * readable elements (it may be NULL when `len` is 0).
 */
enum SeqcheckStatus seqcheck_session_append_envelopes(struct SeqcheckSession *session,
                                                      uint32_t rank,
                                                      const struct SeqcheckEnvelope *envelopes,
                                                      size_t len);

/**
 * Marks `rank` as complete.
 *
 * # Safety
 * `session` must be a live session handle.
 */
enum SeqcheckStatus seqcheck_session_close(struct SeqcheckSession *session, uint32_t rank);

/**
 * Applies one line of the text event protocol (`append`, `close`, `end`).
 *
 * # Safety
 * `session` must be a live session handle and `line` a NUL-terminated
 * string.
 */
enum SeqcheckStatus seqcheck_session_event(struct SeqcheckSession *session, const char *line);

/**
 * Ends the stream and stores the verdict. Every process must be closed;
 * after a failed finish the session accepts no further events.
 *
 * # Safety
 * `session` must be a live session handle; `verdict` must be NULL or
 * writable.
 */
enum SeqcheckStatus seqcheck_session_finish(struct SeqcheckSession *session,
                                            enum SeqcheckVerdict *verdict);

/**
 * Verdict of a finished session.
 *
 * # Safety
 * `session` must be a live session handle; `verdict` must be NULL or
 * writable.
 */
enum SeqcheckStatus seqcheck_session_verdict(const struct SeqcheckSession *session,
                                             enum SeqcheckVerdict *verdict);

/**
 * JSON report of a finished session. Free `*json` with
 * [`seqcheck_string_free`].
 *
 * # Safety
 * `session` must be a live session handle; `json` must be writable.
 */
enum SeqcheckStatus seqcheck_session_report_json(const struct SeqcheckSession *session,
                                                 char **json);

/**
 * Checks a whole model given as text (DSL or abstract strings). `json` may
 * be NULL; otherwise it receives a report to free with
 * [`seqcheck_string_free`].
 *
 * # Safety
 * `text` must be a NUL-terminated string; `verdict` and `json` must each be
 * NULL or writable.
 */
enum SeqcheckStatus seqcheck_check_text(const char *text,
                                        enum SeqcheckMode mode,
                                        enum SeqcheckVerdict *verdict,
                                        char **json);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library that has not been
 * freed.
 */
void seqcheck_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SEQCHECK_H */
