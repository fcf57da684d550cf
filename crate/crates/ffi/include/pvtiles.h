#ifndef PVTILES_H
#define PVTILES_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  PVT_STATUS_OK = 0,
  PVT_STATUS_NULL_POINTER = 1,
  PVT_STATUS_INVALID_UTF8 = 2,
  PVT_STATUS_IO = 3,
  PVT_STATUS_PARSE = 4,
  PVT_STATUS_INVALID_ARGUMENT = 5,
  PVT_STATUS_OUT_OF_RANGE = 6,
  PVT_STATUS_UNDEFINED = 7,
  PVT_STATUS_PANIC = 99,
} PvtStatus;

typedef enum {
  PVT_LABEL_NEGATIVE = 0,
  PVT_LABEL_POSITIVE = 1,
  PVT_LABEL_UNKNOWN = 2,
  PVT_LABEL_UNLABELED = 3,
} PvtLabel;

typedef enum {
  PVT_ROW_NEGATIVE = 0,
  PVT_ROW_POSITIVE = 1,
  PVT_ROW_MACRO_AVG = 2,
  PVT_ROW_WEIGHTED_AVG = 3,
} PvtRow;

typedef struct PvtManifest PvtManifest;

typedef struct PvtModel PvtModel;

typedef struct PvtReconciliation PvtReconciliation;

typedef struct PvtReport PvtReport;

/**
 * One row of a classification report.
 */
typedef struct {
  double precision;
  double recall;
  double f1;
  uint64_t support;
  /**
   * Non-zero when the precision denominator was zero.
   */
  uint8_t precision_undefined;
  uint8_t recall_undefined;
} PvtClassRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call into this library from the same thread.
 */
const char *pvt_last_error_message(void);

void pvt_clear_error(void);

/**
 * Library version as a static string.
 */
const char *pvt_version(void);

/**
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void pvt_string_free(char *s);

/**
 * Inclusive threshold: `score >= threshold` is positive.
 *
 * # Safety
 * `label` must be writable.
 */
PvtStatus pvt_threshold_label(double score, double threshold, PvtLabel *label);

/**
 * # Safety
 * `path` is a NUL-terminated string; `manifest` must be writable.
 */
PvtStatus pvt_manifest_read(const char *path, PvtManifest **manifest);

/**
 * # Safety
 * `manifest` is a live handle; `path` is a NUL-terminated string.
 */
PvtStatus pvt_manifest_write(const PvtManifest *manifest, const char *path);

/**
 * # Safety
 * `manifest` is a live handle; `len` must be writable.
 */
PvtStatus pvt_manifest_len(const PvtManifest *manifest, size_t *len);

/**
 * Number of records carrying `label`.
 *
 * # Safety
 * `manifest` is a live handle; `count` must be writable.
 */
PvtStatus pvt_manifest_count_label(const PvtManifest *manifest, PvtLabel label, size_t *count);

/**
 * Number of records assigned to the training split.
 *
 * # Safety
 * `manifest` is a live handle; `count` must be writable.
 */
PvtStatus pvt_manifest_train_count(const PvtManifest *manifest, size_t *count);

/**
 * Stratified split into a new handle; the input is left untouched.
 *
 * # Safety
 * `manifest` is a live handle; `result` must be writable.
 */
PvtStatus pvt_manifest_split(const PvtManifest *manifest,
                             double train_fraction,
                             uint64_t seed,
                             PvtManifest **result);

/**
 * # Safety
 * `manifest` is null or a handle not yet freed.
 */
void pvt_manifest_free(PvtManifest *manifest);

/**
 * # Safety
 * `result` must be writable.
 */
PvtStatus pvt_report_from_counts(uint64_t tp,
                                 uint64_t fp,
                                 uint64_t tn,
                                 uint64_t fn_,
                                 PvtReport **result);

/**
 * # Safety
 * `report` is a live handle; `accuracy` must be writable.
 */
PvtStatus pvt_report_accuracy(const PvtReport *report, double *accuracy);

/**
 * # Safety
 * `report` is a live handle; `row_out` must be writable.
 */
PvtStatus pvt_report_row(const PvtReport *report, PvtRow row, PvtClassRow *row_out);

/**
 * Report text followed by the confusion shares table. Free with
 * [`pvt_string_free`].
 *
 * # Safety
 * `report` is a live handle; `text` must be writable.
 */
PvtStatus pvt_report_render(const PvtReport *report, char **text);

/**
 * # Safety
 * `report` is null or a handle not yet freed.
 */
void pvt_report_free(PvtReport *report);

/**
 * # Safety
 * `path` is a NUL-terminated string; `model` must be writable.
 */
PvtStatus pvt_model_read(const char *path, PvtModel **model);

/**
 * # Safety
 * `model` is a live handle; `dim` must be writable.
 */
PvtStatus pvt_model_dim(const PvtModel *model, size_t *dim);

/**
 * Score in [0, 1] for one feature vector of `len` values.
 *
 * # Safety
 * `model` is a live handle; `features` points to `len` doubles; `score`
 * must be writable.
 */
PvtStatus pvt_model_score(const PvtModel *model, const double *features, size_t len, double *score);

/**
 * # Safety
 * `model` is null or a handle not yet freed.
 */
void pvt_model_free(PvtModel *model);

/**
 * # Safety
 * `result` must be writable.
 */
PvtStatus pvt_reconciliation_from_counts(uint64_t tp_in_register,
                                         uint64_t tp_new,
                                         uint64_t fp,
                                         uint64_t fn_,
                                         uint64_t tn,
                                         PvtReconciliation **result);

/**
 * Share of true positives not in the register. `PVT_STATUS_UNDEFINED`
 * when there are no true positives.
 *
 * # Safety
 * `rec` is a live handle; `fraction` must be writable.
 */
PvtStatus pvt_reconciliation_new_fraction(const PvtReconciliation *rec, double *fraction);

/**
 * # Safety
 * `rec` is a live handle; `text` must be writable.
 */
PvtStatus pvt_reconciliation_render(const PvtReconciliation *rec, char **text);

/**
 * # Safety
 * `rec` is null or a handle not yet freed.
 */
void pvt_reconciliation_free(PvtReconciliation *rec);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PVTILES_H */
