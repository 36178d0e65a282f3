#ifndef PERSUADE_H
#define PERSUADE_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes shared by every function.
 */
typedef enum PersuadeStatus {
  PERSUADE_STATUS_OK = 0,
  PERSUADE_STATUS_NULL_POINTER = 1,
  PERSUADE_STATUS_INVALID_ARGUMENT = 2,
  PERSUADE_STATUS_CONTRACT = 3,
  PERSUADE_STATUS_SIZE_LIMIT = 4,
  PERSUADE_STATUS_PRECONDITION = 5,
  PERSUADE_STATUS_SOLVER = 6,
  PERSUADE_STATUS_NUMERICAL = 7,
  PERSUADE_STATUS_IO = 8,
  PERSUADE_STATUS_PARSE = 9,
  PERSUADE_STATUS_INTERNAL = 10,
  PERSUADE_STATUS_PANIC = 11,
  PERSUADE_STATUS_BUFFER_TOO_SMALL = 12,
} PersuadeStatus;

/**
 * Receiver tie-breaking selector.
 */
typedef enum PersuadeTie {
  /**
   * The rule stored in the game document, else lexicographic.
   */
  PERSUADE_TIE_STORED = 0,
  PERSUADE_TIE_LEXICOGRAPHIC = 1,
  PERSUADE_TIE_SENDER_FAVORING = 2,
} PersuadeTie;

typedef enum PersuadeVerdict {
  PERSUADE_VERDICT_EXACT = 0,
  PERSUADE_VERDICT_EPSILON_LOCAL = 1,
  PERSUADE_VERDICT_REFUTED = 2,
} PersuadeVerdict;

/**
 * Opaque game handle.
 */
typedef struct PersuadeGame PersuadeGame;

/**
 * Opaque joint-policy handle.
 */
typedef struct PersuadePolicy PersuadePolicy;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failure on this thread, or NULL. The pointer
 * stays valid until the next call into the library on this thread.
 */
const char *persuade_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *persuade_version(void);

/**
 * Parses a game document (`persuade-game/1` JSON).
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum PersuadeStatus persuade_game_from_json(const char *json, struct PersuadeGame **out);

/**
 * # Safety
 * `game` must come from `persuade_game_from_json` and not be freed twice.
 */
void persuade_game_free(struct PersuadeGame *game);

/**
 * Writes the game dimensions; any output pointer may be NULL.
 *
 * # Safety
 * `game` must be a live handle; non-NULL outputs must be writable.
 */
enum PersuadeStatus persuade_game_dims(const struct PersuadeGame *game,
                                       size_t *senders,
                                       size_t *states,
                                       size_t *signals,
                                       size_t *actions);

/**
 * Parses a policy document (`persuade-policy/1` JSON).
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum PersuadeStatus persuade_policy_from_json(const char *json, struct PersuadePolicy **out);

/**
 * Builds a joint policy from `n · |Ω| · |S|` probabilities laid out sender
 * by sender, each sender's matrix row-major.
 *
 * # Safety
 * `data` must point to `len` readable doubles; `out` must be valid.
 */
enum PersuadeStatus persuade_policy_from_array(const struct PersuadeGame *game,
                                               const double *data,
                                               size_t len,
                                               struct PersuadePolicy **out);

/**
 * # Safety
 * `policy` must come from this library and not be freed twice.
 */
void persuade_policy_free(struct PersuadePolicy *policy);

/**
 * Serializes a policy to JSON. Free the result with `persuade_string_free`.
 *
 * # Safety
 * `policy` must be a live handle and `out` a valid pointer.
 */
enum PersuadeStatus persuade_policy_to_json(const struct PersuadePolicy *policy, char **out);

/**
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void persuade_string_free(char *s);

/**
 * Exact ex-ante utilities: `out[j]` for each sender, then the receiver.
 * `out_len` must be at least `n + 1`.
 *
 * # Safety
 * Handles must be live; `out` must hold `out_len` doubles.
 */
enum PersuadeStatus persuade_ex_ante(const struct PersuadeGame *game,
                                     const struct PersuadePolicy *policy,
                                     enum PersuadeTie tie,
                                     double *out,
                                     size_t out_len);

/**
 * Exact Nash check. Writes the verdict and the largest improvement.
 *
 * # Safety
 * Handles must be live; outputs must be valid pointers.
 */
enum PersuadeStatus persuade_verify_nash(const struct PersuadeGame *game,
                                         const struct PersuadePolicy *policy,
                                         enum PersuadeTie tie,
                                         enum PersuadeVerdict *verdict,
                                         double *max_improvement);

/**
 * Sampled ε-local check with the default sample count.
 *
 * # Safety
 * Handles must be live; outputs must be valid pointers.
 */
enum PersuadeStatus persuade_local_verify(const struct PersuadeGame *game,
                                          const struct PersuadePolicy *policy,
                                          enum PersuadeTie tie,
                                          double eps,
                                          uint64_t seed,
                                          enum PersuadeVerdict *verdict,
                                          double *max_improvement);

/**
 * Best response of `sender`. Writes the supremum utility and, when
 * `policy_out` is non-NULL, a realizing `|Ω|×|S|` policy (row-major).
 *
 * # Safety
 * Handles must be live; `policy_out` must hold `policy_len` doubles.
 */
enum PersuadeStatus persuade_best_response(const struct PersuadeGame *game,
                                           const struct PersuadePolicy *policy,
                                           size_t sender,
                                           enum PersuadeTie tie,
                                           double *utility,
                                           double *policy_out,
                                           size_t policy_len);

/**
 * Full-revelation equilibrium profile as a new policy handle.
 *
 * # Safety
 * `game` must be live and `out` a valid pointer.
 */
enum PersuadeStatus persuade_full_revelation(const struct PersuadeGame *game,
                                             struct PersuadePolicy **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PERSUADE_H */
