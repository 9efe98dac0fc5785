#ifndef PET_SGM_H
#define PET_SGM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PsStatus {
  PS_STATUS_OK = 0,
  PS_STATUS_NULL_POINTER = 1,
  PS_STATUS_INVALID_ARGUMENT = 2,
  PS_STATUS_IO = 3,
  PS_STATUS_FORMAT = 4,
  PS_STATUS_DOMAIN = 5,
  PS_STATUS_DIVERGED = 6,
  PS_STATUS_PANIC = 7,
} PsStatus;

typedef enum PsUnits {
  PS_UNITS_ARBITRARY = 0,
  PS_UNITS_COUNTS = 1,
  PS_UNITS_NORMALIZED = 2,
} PsUnits;

typedef enum PsNormMode {
  PS_NORM_MODE_UNIT_RANGE = 0,
  PS_NORM_MODE_SYMMETRIC_RANGE = 1,
  PS_NORM_MODE_MEAN_DIVIDE = 2,
} PsNormMode;

typedef enum PsInputCombo {
  PS_INPUT_COMBO_T1W = 0,
  PS_INPUT_COMBO_T1W_T2F = 1,
  PS_INPUT_COMBO_T1W_LOW_DOSE = 2,
  PS_INPUT_COMBO_T1W_T2F_LOW_DOSE = 3,
} PsInputCombo;

typedef struct PsLabelMap PsLabelMap;

typedef struct PsModel PsModel;

typedef struct PsVolume PsVolume;

// Agreement of one synthetic volume with its acquired counterpart.
// `icc` is NaN when it is undefined.
typedef struct PsSubjectMetrics {
  double congruence_index;
  double cmae;
  double delta_suvr_mean;
  double delta_suvr_std;
  double icc;
} PsSubjectMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. Valid until the
// next failing call on the same thread.
const char *ps_last_error(void);

const char *ps_version(void);

// Copies `nx * ny * nz` samples (x fastest) into a new volume.
enum PsStatus ps_volume_new(const size_t *dims,
                            const double *spacing,
                            enum PsUnits unit,
                            const float *data,
                            struct PsVolume **out_volume);

enum PsStatus ps_volume_read(const char *path, struct PsVolume **out_volume);

// Writes `<stem>.json` and `<stem>.raw`.
enum PsStatus ps_volume_write(const struct PsVolume *volume, const char *stem);

void ps_volume_free(struct PsVolume *volume);

enum PsStatus ps_volume_dims(const struct PsVolume *volume, size_t *out_dims);

// Borrowed view of the samples, valid while the volume lives.
enum PsStatus ps_volume_data(const struct PsVolume *volume,
                             const float **out_data,
                             size_t *out_len);

enum PsStatus ps_labels_read(const char *path, struct PsLabelMap **out_labels);

void ps_labels_free(struct PsLabelMap *labels);

// Default phantom with the given seed and left temporal hypometabolism
// `left_tc_fraction`. Any output pointer may be null to skip it.
enum PsStatus ps_phantom_generate(uint64_t seed,
                                  double left_tc_fraction,
                                  struct PsVolume **out_t1w,
                                  struct PsVolume **out_t2f,
                                  struct PsVolume **out_pet,
                                  struct PsLabelMap **out_labels);

enum PsStatus ps_thin_dose(const struct PsVolume *pet,
                           double fraction,
                           uint64_t seed,
                           struct PsVolume **out_volume);

// Normalizes a volume; `out_offset` and `out_scale` (nullable) receive the
// inverse-transform record.
enum PsStatus ps_normalize(const struct PsVolume *volume,
                           enum PsNormMode mode,
                           struct PsVolume **out_volume,
                           double *out_offset,
                           double *out_scale);

enum PsStatus ps_asymmetry_index(double left, double right, double *out_ai);

// Joint congruence over `n` paired asymmetry values.
enum PsStatus ps_congruence_index(const double *synth,
                                  const double *acquired,
                                  size_t n,
                                  double *out_ci);

enum PsStatus ps_icc(const double *acquired, const double *synth, size_t n, double *out_icc);

enum PsStatus ps_t_interval(const double *values,
                            size_t n,
                            double level,
                            double *out_low,
                            double *out_high);

enum PsStatus ps_evaluate_subject(const struct PsVolume *synth,
                                  const struct PsVolume *acquired,
                                  const struct PsLabelMap *labels,
                                  struct PsSubjectMetrics *out_metrics);

enum PsStatus ps_model_read(const char *path, struct PsModel **out_model);

void ps_model_free(struct PsModel *model);

enum PsStatus ps_model_cond_channels(const struct PsModel *model, size_t *out_channels);

// Synthesizes a unit-range PET volume on the grid of `t1w`. `t2f` and
// `low_dose` may be null when `inputs` does not use them. `n_steps` sets the
// sampler length (0 keeps the default for the model's scheme).
enum PsStatus ps_sample_volume(const struct PsModel *model,
                               const struct PsVolume *t1w,
                               const struct PsVolume *t2f,
                               const struct PsVolume *low_dose,
                               enum PsInputCombo inputs,
                               size_t n_steps,
                               uint64_t seed,
                               struct PsVolume **out_volume);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PET_SGM_H */
