#ifndef LASERFAULT_H
#define LASERFAULT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Number of classes; score buffers hold this many doubles per window.
#define LF_NUM_CLASSES 4

// Steps per model input window.
#define LF_WINDOW_LEN 100

// Model family codes returned by [`lf_model_kind`].
typedef enum LfModelKind {
  LF_MODEL_KIND_LSTM = 0,
  LF_MODEL_KIND_KNN = 1,
  LF_MODEL_KIND_LOGREG = 2,
  LF_MODEL_KIND_RF = 3,
} LfModelKind;

typedef enum LfStatus {
  LF_STATUS_OK = 0,
  LF_STATUS_NULL_POINTER = 1,
  LF_STATUS_INVALID_ARGUMENT = 2,
  LF_STATUS_DOMAIN = 3,
  LF_STATUS_IO = 4,
  LF_STATUS_FORMAT = 5,
  LF_STATUS_VERSION_MISMATCH = 6,
  LF_STATUS_NUMERIC = 7,
  LF_STATUS_MODEL = 8,
  LF_STATUS_PANIC = 9,
} LfStatus;

// Opaque trained model loaded from a checkpoint file.
typedef struct LfModel LfModel;

// Opaque rule-based threshold detector.
typedef struct LfThresholdDetector LfThresholdDetector;

typedef struct LfLaserParams {
  double optical_power_mw;
  double threshold_current_ma;
  double temperature_k;
  double wavelength_nm;
} LfLaserParams;

typedef struct LfCoefficients {
  double beta_ma;
  double derating_exponent;
  double scale_parameter;
  double activation_energy_ev;
} LfCoefficients;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the calling thread's last error message into `buf` (NUL
// terminated, truncated to `len`) and returns the full message length
// without the terminator. `buf` may be null to query the length.
//
// # Safety
// `buf` must be null or valid for `len` bytes.
size_t lf_last_error_message(char *buf, size_t len);

// Degradation rate `k` (1/h) for a laser and coefficient set.
//
// # Safety
// Pointers must be valid or null.
enum LfStatus lf_rate_k(const struct LfLaserParams *laser_params,
                        const struct LfCoefficients *coefficients,
                        double *out_k);

// Operating current `I0 + beta * exp(k * t)` in mA.
//
// # Safety
// `out_current` must be valid or null.
enum LfStatus lf_current_at(double t_hours,
                            double threshold_current_ma,
                            double beta_ma,
                            double k_per_hour,
                            double *out_current);

// Resamples `series` to exactly `out_len` values (block means or repetition).
//
// # Safety
// `series` must hold `len` doubles and `out_values` `out_len` doubles.
enum LfStatus lf_compress_window(const double *series,
                                 size_t len,
                                 double *out_values,
                                 size_t out_len);

// Threshold detector with default rule parameters.
//
// # Safety
// `out_detector` must be valid or null.
enum LfStatus lf_threshold_detector_new(struct LfThresholdDetector **out_detector);

// Threshold detector with explicit rule parameters.
//
// # Safety
// `out_detector` must be valid or null.
enum LfStatus lf_threshold_detector_with(double eol_current_increase_fraction,
                                         double sudden_jump_step_fraction,
                                         size_t rapid_crossing_index_bound,
                                         struct LfThresholdDetector **out_detector);

// # Safety
// `detector` must come from `lf_threshold_detector_new`/`_with` and not be
// used afterwards. Null is ignored.
void lf_threshold_detector_free(struct LfThresholdDetector *detector);

// Classifies one current series; writes the mode code (0..=3).
//
// # Safety
// `currents` must hold `len` doubles; other pointers valid or null.
enum LfStatus lf_threshold_classify(const struct LfThresholdDetector *detector,
                                    const double *currents,
                                    size_t len,
                                    double threshold_current_ma,
                                    uint8_t *out_mode);

// Row-major 4x4 confusion counts, `out_counts[truth * 4 + predicted]`.
//
// # Safety
// `truth` and `predicted` must hold `n` bytes; `out_counts` 16 values.
enum LfStatus lf_confusion_matrix(const uint8_t *truth,
                                  const uint8_t *predicted,
                                  size_t n,
                                  uint64_t *out_counts);

// One-vs-rest ROC AUC for `class_code`; `scores` is `n` rows of 4.
//
// # Safety
// `truth` must hold `n` bytes and `scores` `4 * n` doubles.
enum LfStatus lf_roc_auc(const uint8_t *truth,
                         const double *scores,
                         size_t n,
                         uint8_t class_code,
                         double *out_auc);

// One-vs-rest precision-recall AUC for `class_code`.
//
// # Safety
// As for [`lf_roc_auc`].
enum LfStatus lf_pr_auc(const uint8_t *truth,
                        const double *scores,
                        size_t n,
                        uint8_t class_code,
                        double *out_auc);

// Loads a checkpoint written by `laserfault train`.
//
// # Safety
// `path` must be a NUL-terminated UTF-8 string; `out_model` valid or null.
enum LfStatus lf_model_load(const char *path, struct LfModel **out_model);

// # Safety
// `model` must come from `lf_model_load` and not be used afterwards.
// Null is ignored.
void lf_model_free(struct LfModel *model);

// # Safety
// Pointers must be valid or null.
enum LfStatus lf_model_kind(const struct LfModel *model, enum LfModelKind *out_kind);

// Classifies one current series of any length (resampled to
// `LF_WINDOW_LEN` steps). Writes the mode code and 4 class scores.
//
// # Safety
// `currents` must hold `len` doubles and `out_scores` 4 doubles; other
// pointers valid or null.
enum LfStatus lf_model_predict(const struct LfModel *model,
                               const struct LfLaserParams *laser_params,
                               const double *currents,
                               size_t len,
                               uint8_t *out_mode,
                               double *out_scores);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LASERFAULT_H */
