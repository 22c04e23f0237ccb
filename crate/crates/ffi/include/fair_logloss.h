#ifndef FAIR_LOGLOSS_H
#define FAIR_LOGLOSS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FllStatus {
  FLL_STATUS_OK = 0,
  FLL_STATUS_NULL_POINTER = 1,
  FLL_STATUS_INVALID_ARGUMENT = 2,
  FLL_STATUS_DATA_ERROR = 3,
  FLL_STATUS_ZERO_GROUP_RATE = 4,
  FLL_STATUS_DEGENERATE_DENOMINATOR = 5,
  FLL_STATUS_CRITERION_MISMATCH = 6,
  FLL_STATUS_NUMERICAL = 7,
  FLL_STATUS_PANIC = 8,
} FllStatus;

typedef enum FllCriterion {
  FLL_CRITERION_NONE = 0,
  FLL_CRITERION_DEMOGRAPHIC_PARITY = 1,
  FLL_CRITERION_EQUALIZED_OPPORTUNITY = 2,
  FLL_CRITERION_EQUALIZED_ODDS = 3,
} FllCriterion;

/**
 * Which side of a constraint an example falls on.
 */
typedef enum FllSide {
  FLL_SIDE_GAMMA1 = 0,
  FLL_SIDE_GAMMA0 = 1,
  FLL_SIDE_NEITHER = 2,
} FllSide;

/**
 * Opaque encoded dataset.
 */
typedef struct FllDataset FllDataset;

/**
 * Opaque trained model.
 */
typedef struct FllModel FllModel;

typedef struct FllTrainOptions {
  double reg_c;
  size_t max_iters;
  double grad_tol;
  double objective_tol;
} FllTrainOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *fll_version(void);

/**
 * Message of the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *fll_last_error(void);

struct FllTrainOptions fll_train_options_default(void);

/**
 * Copies an encoded dataset into a new handle.
 *
 * # Safety
 * Array arguments must be valid for the stated lengths and `out` writable.
 */
enum FllStatus fll_dataset_new(const double *features,
                               size_t n_rows,
                               size_t n_features,
                               const uint8_t *groups,
                               const uint8_t *labels,
                               struct FllDataset **out);

/**
 * # Safety
 * `dataset` must be null or a handle from [`fll_dataset_new`] not yet freed.
 */
void fll_dataset_free(struct FllDataset *dataset);

/**
 * # Safety
 * `dataset` must be a live handle, `options` null (defaults) or readable,
 * and `out` writable.
 */
enum FllStatus fll_train(const struct FllDataset *dataset,
                         enum FllCriterion criterion,
                         const struct FllTrainOptions *options,
                         struct FllModel **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum FllStatus fll_model_load(const char *path, struct FllModel **out);

/**
 * # Safety
 * `model` must be a live handle and `path` a NUL-terminated string.
 */
enum FllStatus fll_model_save(const struct FllModel *model, const char *path);

/**
 * # Safety
 * `model` must be null or a handle not yet freed.
 */
void fll_model_free(struct FllModel *model);

/**
 * Number of encoded features the model expects, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t fll_model_n_features(const struct FllModel *model);

/**
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum FllStatus fll_model_criterion(const struct FllModel *model, enum FllCriterion *out);

/**
 * Writes up to `capacity` multipliers into `out` and the total count into
 * `count`.
 *
 * # Safety
 * `model` must be a live handle, `out` valid for `capacity` writes and
 * `count` writable.
 */
enum FllStatus fll_model_lambdas(const struct FllModel *model,
                                 double *out,
                                 size_t capacity,
                                 size_t *count);

/**
 * Probability of a positive decision and the thresholded label for one row.
 *
 * # Safety
 * `x` must be valid for `n_features` reads; outputs may be null to skip.
 */
enum FllStatus fll_predict(const struct FllModel *model,
                           const double *x,
                           size_t n_features,
                           uint8_t group,
                           double *prob_out,
                           uint8_t *label_out);

/**
 * Probabilities for `n_rows` rows. Label-dependent models marginalize over
 * the unknown label.
 *
 * # Safety
 * Arrays must be valid for the stated lengths; `probs_out` for `n_rows`
 * writes.
 */
enum FllStatus fll_predict_batch(const struct FllModel *model,
                                 const double *features,
                                 size_t n_rows,
                                 size_t n_features,
                                 const uint8_t *groups,
                                 double *probs_out);

/**
 * Logistic function of a score.
 */
double fll_base_probability(double score);

/**
 * Clamped probability of a positive decision for one side of a constraint.
 *
 * # Safety
 * `out` must be writable.
 */
enum FllStatus fll_predictor_probability(double rho,
                                         enum FllSide side,
                                         double lambda,
                                         double p_gamma1,
                                         double p_gamma0,
                                         double *out);

/**
 * Approximator probability for a clamped predictor probability `p`.
 *
 * # Safety
 * `out` must be writable.
 */
enum FllStatus fll_approximator_probability(double p,
                                            enum FllSide side,
                                            double lambda,
                                            double p_gamma1,
                                            double p_gamma0,
                                            double *out);

/**
 * Multiplier equalizing the clamped means of two groups of probabilities.
 *
 * # Safety
 * `e1` and `e0` must be valid for `n1` and `n0` reads; `out` writable.
 */
enum FllStatus fll_solve_lambda(const double *e1,
                                size_t n1,
                                const double *e0,
                                size_t n0,
                                double p_gamma1,
                                double p_gamma0,
                                double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FAIR_LOGLOSS_H */
