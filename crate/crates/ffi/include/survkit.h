#ifndef SURVKIT_H
#define SURVKIT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SurvkitStatus {
  SURVKIT_STATUS_OK = 0,
  SURVKIT_STATUS_NULL_POINTER = 1,
  SURVKIT_STATUS_INVALID_INPUT = 2,
  SURVKIT_STATUS_CONFIG = 3,
  SURVKIT_STATUS_IO = 4,
  SURVKIT_STATUS_MODEL_FILE = 5,
  SURVKIT_STATUS_FIT_FAILED = 6,
  SURVKIT_STATUS_PANIC = 7,
} SurvkitStatus;

/*
 Survival dataset: covariates, observed times and event indicators.
 */
typedef struct SurvkitDataset SurvkitDataset;

/*
 Fitted survival model.
 */
typedef struct SurvkitModel SurvkitModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version as a static NUL-terminated string.
 */
const char *survkit_version(void);

/*
 Message describing the last failed call on this thread; empty after a
 successful call. The pointer is valid until the next survkit call on the
 same thread.
 */
const char *survkit_last_error(void);

/*
 Build a dataset from a row-major `n_rows x n_features` matrix, `n_rows`
 observed times and `n_rows` event flags.

 # Safety
 Each non-null pointer must reference the stated number of readable
 elements; `out` must be writable.
 */
enum SurvkitStatus survkit_dataset_new(const double *features,
                                       size_t n_rows,
                                       size_t n_features,
                                       const double *times,
                                       const uint8_t *events,
                                       struct SurvkitDataset **out);

/*
 Simulate `n` rows with the named risk (`linear`, `square`, `gaussian`)
 and calibrated censoring.

 # Safety
 `risk` must be a NUL-terminated string; `out` must be writable.
 */
enum SurvkitStatus survkit_dataset_simulate(const char *risk,
                                            size_t n,
                                            uint64_t seed,
                                            double event_rate,
                                            struct SurvkitDataset **out);

/*
 # Safety
 `dataset` must be null or a live dataset handle.
 */
size_t survkit_dataset_num_rows(const struct SurvkitDataset *dataset);

/*
 # Safety
 `dataset` must be null or a live dataset handle.
 */
size_t survkit_dataset_num_features(const struct SurvkitDataset *dataset);

/*
 Copy the dataset into caller buffers sized `rows x features`, `rows`
 and `rows`. Any output pointer may be null to skip it.

 # Safety
 Non-null output pointers must reference enough writable elements.
 */
enum SurvkitStatus survkit_dataset_copy(const struct SurvkitDataset *dataset,
                                        double *features_out,
                                        double *times_out,
                                        uint8_t *events_out);

/*
 # Safety
 `dataset` must be null or a handle not yet freed.
 */
void survkit_dataset_free(struct SurvkitDataset *dataset);

/*
 Fit a model of kind `coxph`, `mtlr` or `nmtlr`.

 `config_json` holds the model's hyperparameters as a JSON object (null
 for defaults). `num_intervals` sets the MTLR time grid size; 0 picks it
 from the number of events.

 # Safety
 `kind` and non-null `config_json` must be NUL-terminated strings;
 `dataset` must be a live handle; `out` must be writable.
 */
enum SurvkitStatus survkit_model_fit(const char *kind,
                                     const struct SurvkitDataset *dataset,
                                     const char *config_json,
                                     size_t num_intervals,
                                     struct SurvkitModel **out);

/*
 Load a model file written by `survkit train` or [`survkit_model_save`].

 # Safety
 `path` must be a NUL-terminated string; `out` must be writable.
 */
enum SurvkitStatus survkit_model_load(const char *path, struct SurvkitModel **out);

/*
 # Safety
 `model` must be a live handle and `path` a NUL-terminated string.
 */
enum SurvkitStatus survkit_model_save(const struct SurvkitModel *model, const char *path);

/*
 # Safety
 `json` must be a NUL-terminated string; `out` must be writable.
 */
enum SurvkitStatus survkit_model_from_json(const char *json, struct SurvkitModel **out);

/*
 Serialize a model to a newly allocated string, released with
 [`survkit_string_free`]. Returns null on failure.

 # Safety
 `model` must be null or a live handle.
 */
char *survkit_model_to_json(const struct SurvkitModel *model);

/*
 # Safety
 `s` must be null or a string returned by this library, not yet freed.
 */
void survkit_string_free(char *s);

/*
 # Safety
 `model` must be null or a live handle.
 */
size_t survkit_model_num_features(const struct SurvkitModel *model);

/*
 Risk scores (higher means earlier expected failure) for `n_rows` rows.

 # Safety
 `features` must reference `n_rows * n_features` readable values and
 `risks_out` `n_rows` writable values.
 */
enum SurvkitStatus survkit_model_predict_risk(const struct SurvkitModel *model,
                                              const double *features,
                                              size_t n_rows,
                                              size_t n_features,
                                              double *risks_out);

/*
 Survival probabilities at `n_times` times, written row-major as
 `n_rows x n_times`.

 # Safety
 Pointers must reference the stated number of elements.
 */
enum SurvkitStatus survkit_model_predict_survival(const struct SurvkitModel *model,
                                                  const double *features,
                                                  size_t n_rows,
                                                  size_t n_features,
                                                  const double *times,
                                                  size_t n_times,
                                                  double *survival_out);

/*
 C-index and integrated Brier score of `model` on `test`; censoring
 weights come from `train`. The Brier grid has `points` times.

 # Safety
 Handles must be live; `c_index_out` and `ibs_out` must be writable.
 */
enum SurvkitStatus survkit_model_evaluate(const struct SurvkitModel *model,
                                          const struct SurvkitDataset *test,
                                          const struct SurvkitDataset *train,
                                          size_t points,
                                          double *c_index_out,
                                          double *ibs_out);

/*
 # Safety
 `model` must be null or a handle not yet freed.
 */
void survkit_model_free(struct SurvkitModel *model);

/*
 Concordance index of `risks` against observed `times` and `events`.

 # Safety
 Input pointers must reference `n` readable values; `out` must be writable.
 */
enum SurvkitStatus survkit_c_index(const double *times,
                                   const uint8_t *events,
                                   const double *risks,
                                   size_t n,
                                   double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SURVKIT_H */
