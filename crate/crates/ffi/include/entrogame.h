#ifndef ENTROGAME_H
#define ENTROGAME_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum EgStatus {
  EG_STATUS_OK = 0,
  EG_STATUS_NULL_POINTER = 1,
  EG_STATUS_INVALID_ARGUMENT = 2,
  EG_STATUS_DOMAIN = 3,
  EG_STATUS_NOT_ERGODIC = 4,
  EG_STATUS_NOT_MIXABLE = 5,
  EG_STATUS_ZERO_PROBABILITY = 6,
  EG_STATUS_TOO_LARGE = 7,
  EG_STATUS_NO_MINIMIZER = 8,
  EG_STATUS_DEGENERATE_POOL = 9,
  EG_STATUS_INVARIANT_VIOLATION = 10,
  EG_STATUS_INTERNAL = 11,
} EgStatus;

/**
 * Built-in games.
 */
typedef enum EgGameKind {
  EG_GAME_KIND_LOG_LOSS = 0,
  EG_GAME_KIND_SQUARE_LOSS = 1,
  EG_GAME_KIND_ABSOLUTE_LOSS = 2,
} EgGameKind;

/**
 * Opaque aggregator handle; remembers the outcomes it has been fed.
 */
typedef struct EgAggregator EgAggregator;

/**
 * Opaque game handle.
 */
typedef struct EgGame EgGame;

/**
 * Opaque source handle.
 */
typedef struct EgSource EgSource;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *eg_last_error_message(void);

/**
 * Built-in game; `kind` is an `EgGameKind` value.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum EgStatus eg_game_new(uint32_t kind, struct EgGame **out);

/**
 * Game from a JSON loss table: `{"kind":"table","grid":[..],"loss0":[..],"loss1":[..]}`.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` valid for writes.
 */
enum EgStatus eg_game_from_json(const char *json, struct EgGame **out);

/**
 * # Safety
 * `game` must come from `eg_game_new`/`eg_game_from_json` and not be freed twice.
 */
void eg_game_free(struct EgGame *game);

/**
 * `λ(outcome, gamma)` in nats; may be `+inf`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum EgStatus eg_loss_eval(const struct EgGame *game, uint8_t outcome, double gamma, double *out);

/**
 * Source from a JSON descriptor (`bernoulli`, `markov` or `hmm`).
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` valid for writes.
 */
enum EgStatus eg_source_from_json(const char *json, struct EgSource **out);

/**
 * # Safety
 * `source` must come from `eg_source_from_json` and not be freed twice.
 */
void eg_source_free(struct EgSource *source);

/**
 * Probability of the string `w[0..len]` under the stationary law.
 *
 * # Safety
 * `w` must point to `len` readable bytes (each 0 or 1).
 */
enum EgStatus eg_string_probability(const struct EgSource *source,
                                    const uint8_t *w,
                                    size_t len,
                                    double *out);

/**
 * `P(1 | history)`.
 *
 * # Safety
 * `history` must point to `len` readable bytes (each 0 or 1).
 */
enum EgStatus eg_conditional_next_probability(const struct EgSource *source,
                                              const uint8_t *history,
                                              size_t len,
                                              double *out);

/**
 * Exact n-step generalized entropy `H_n`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum EgStatus eg_n_step_entropy(const struct EgGame *game,
                                const struct EgSource *source,
                                size_t n,
                                double *out);

/**
 * Entropy-rate estimate. `converged_at` receives the index from which
 * `H_{1|n}` is stationary, or -1 when the cap was reached first.
 *
 * # Safety
 * Pointers must be valid.
 */
enum EgStatus eg_entropy_rate(const struct EgGame *game,
                              const struct EgSource *source,
                              double tol,
                              size_t n_cap,
                              double *rate,
                              int64_t *converged_at);

/**
 * Prediction minimizing the expected loss when the next bit is 1 with
 * probability `p1`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum EgStatus eg_optimal_prediction(const struct EgGame *game, double p1, double *out);

/**
 * Curvature test at learning rate `eta` with `resolution` curve points.
 *
 * # Safety
 * Pointers must be valid.
 */
enum EgStatus eg_mixability_test(const struct EgGame *game,
                                 double eta,
                                 size_t resolution,
                                 bool *mixable);

/**
 * Largest mixable learning rate found by bisection; `found` is false when
 * the game fails the test everywhere in the searched range.
 *
 * # Safety
 * Pointers must be valid.
 */
enum EgStatus eg_max_mixability_eta(const struct EgGame *game,
                                    size_t resolution,
                                    double tol,
                                    double *eta,
                                    bool *found);

/**
 * Aggregator over the pool described by `pool_json`
 * (`{"experts":[...],"eta":1.0}`). Fails with `EG_STATUS_NOT_MIXABLE` when the
 * game is not mixable at the pool's learning rate.
 *
 * # Safety
 * `game` must be valid, `pool_json` NUL-terminated and `out` valid for writes.
 */
enum EgStatus eg_aggregator_new(const struct EgGame *game,
                                const char *pool_json,
                                struct EgAggregator **out);

/**
 * The aggregator's prediction for the next outcome.
 *
 * # Safety
 * Pointers must be valid.
 */
enum EgStatus eg_aggregator_predict(const struct EgAggregator *agg, double *out);

/**
 * Feeds the next outcome.
 *
 * # Safety
 * `agg` must be a live aggregator handle.
 */
enum EgStatus eg_aggregator_update(struct EgAggregator *agg, uint8_t outcome);

/**
 * Number of experts in the pool.
 *
 * # Safety
 * `agg` must be a live aggregator handle.
 */
size_t eg_aggregator_len(const struct EgAggregator *agg);

/**
 * Copies the normalized expert weights into `out[0..len]`; `len` must equal
 * the pool size.
 *
 * # Safety
 * `out` must be valid for `len` writes.
 */
enum EgStatus eg_aggregator_weights(const struct EgAggregator *agg, double *out, size_t len);

/**
 * # Safety
 * `agg` must come from `eg_aggregator_new` and not be freed twice.
 */
void eg_aggregator_free(struct EgAggregator *agg);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ENTROGAME_H */
