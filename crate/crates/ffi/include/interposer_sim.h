#ifndef INTERPOSER_SIM_H
#define INTERPOSER_SIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Numeric columns of a report row.
 */
typedef enum IsimMetric {
  ISIM_METRIC_LASER_MW = 0,
  ISIM_METRIC_TRIMMING_MW = 1,
  ISIM_METRIC_MZI_STATIC_MW = 2,
  ISIM_METRIC_GATEWAY_MW = 3,
  ISIM_METRIC_MAC_MW = 4,
  ISIM_METRIC_ELECTRICAL_MW = 5,
  ISIM_METRIC_TOTAL_MW = 6,
  ISIM_METRIC_MAKESPAN_S = 7,
  ISIM_METRIC_ENERGY_J = 8,
  ISIM_METRIC_BITS = 9,
  ISIM_METRIC_EPB_PJ_PER_BIT = 10,
  ISIM_METRIC_TOTAL_MW_NORM = 11,
  ISIM_METRIC_MAKESPAN_NORM = 12,
  ISIM_METRIC_ENERGY_NORM = 13,
  ISIM_METRIC_EPB_NORM = 14,
} IsimMetric;

/**
 * Status codes returned by every fallible call.
 */
typedef enum IsimStatus {
  ISIM_STATUS_OK = 0,
  ISIM_STATUS_NULL_ARGUMENT = 1,
  ISIM_STATUS_INVALID_UTF8 = 2,
  ISIM_STATUS_CONFIG = 3,
  ISIM_STATUS_INVALID_PARAMETER = 4,
  ISIM_STATUS_UNKNOWN_NAME = 5,
  ISIM_STATUS_SIMULATION = 6,
  ISIM_STATUS_IO = 7,
  ISIM_STATUS_OUT_OF_RANGE = 8,
  ISIM_STATUS_UNDEFINED = 9,
  ISIM_STATUS_PANIC = 10,
} IsimStatus;

/**
 * Parsed run configuration.
 */
typedef struct IsimConfig IsimConfig;

/**
 * Results of a run or sweep, plus C copies of the row labels.
 */
typedef struct IsimReport IsimReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null.
 *
 * The pointer stays valid until the next `isim_*` call on the same thread.
 */
const char *isim_last_error(void);

/**
 * Default configuration: TRINE, lenet5, default platform and devices.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage.
 */
enum IsimStatus isim_config_default(struct IsimConfig **out);

/**
 * Parses INI text into a configuration.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` valid for writes.
 */
enum IsimStatus isim_config_parse(const char *text, struct IsimConfig **out);

/**
 * Reads and parses a configuration file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` valid for writes.
 */
enum IsimStatus isim_config_load(const char *path, struct IsimConfig **out);

/**
 * Releases a configuration. Null is ignored.
 *
 * # Safety
 * `cfg` must come from an `isim_config_*` constructor and not be freed twice.
 */
void isim_config_free(struct IsimConfig *cfg);

/**
 * Simulates the configured topology on the first configured model.
 *
 * # Safety
 * `cfg` must be a live handle and `out` valid for writes.
 */
enum IsimStatus isim_run(const struct IsimConfig *cfg, struct IsimReport **out);

/**
 * Sweeps comma-separated `topologies` against comma-separated builtin
 * `models`. A null or empty `models` falls back to the configured models.
 *
 * # Safety
 * `cfg` must be a live handle, string arguments NUL-terminated or null
 * where allowed, and `out` valid for writes.
 */
enum IsimStatus isim_sweep(const struct IsimConfig *cfg,
                           const char *topologies,
                           const char *models,
                           struct IsimReport **out);

/**
 * Number of rows in a report; 0 for null.
 *
 * # Safety
 * `report` must be null or a live handle.
 */
size_t isim_report_row_count(const struct IsimReport *report);

/**
 * Reads one numeric column. Ratios and energy-per-bit are `Undefined`
 * when no bits moved or the baseline is missing.
 *
 * # Safety
 * `report` must be a live handle and `out` valid for writes.
 */
enum IsimStatus isim_report_metric(const struct IsimReport *report,
                                   size_t row,
                                   enum IsimMetric metric,
                                   double *out);

/**
 * Topology name of a row, owned by the report; null when out of range.
 *
 * # Safety
 * `report` must be null or a live handle.
 */
const char *isim_report_row_topology(const struct IsimReport *report, size_t row);

/**
 * Model name of a row, owned by the report; null when out of range.
 *
 * # Safety
 * `report` must be null or a live handle.
 */
const char *isim_report_row_model(const struct IsimReport *report, size_t row);

/**
 * Writes the CSVs, summary and audit files into `dir`.
 *
 * # Safety
 * `report` must be a live handle and `dir` a NUL-terminated string.
 */
enum IsimStatus isim_report_write(const struct IsimReport *report, const char *dir);

/**
 * Releases a report. Null is ignored.
 *
 * # Safety
 * `report` must come from `isim_run` or `isim_sweep` and not be freed twice.
 */
void isim_report_free(struct IsimReport *report);

/**
 * Switch stages per subnetwork for `compute_gateways` split over `subnetworks`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum IsimStatus isim_stage_count(uint32_t compute_gateways, uint32_t subnetworks, uint32_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* INTERPOSER_SIM_H */
