#ifndef SOCIALINEQ_H
#define SOCIALINEQ_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SiStatus {
  SI_STATUS_OK = 0,
  SI_STATUS_NULL_POINTER = 1,
  SI_STATUS_INVALID_UTF8 = 2,
  /**
   * Values rejected by a metric (empty, negative, non-finite, all zero).
   */
  SI_STATUS_INVALID_INPUT = 3,
  /**
   * Unreadable or invalid tract GeoJSON.
   */
  SI_STATUS_INVALID_GEOMETRY = 4,
  /**
   * The point lies outside every tract.
   */
  SI_STATUS_NOT_FOUND = 5,
  /**
   * Buffer too small; the required length was written.
   */
  SI_STATUS_BUFFER_TOO_SMALL = 6,
  /**
   * Pipeline input error; see the message.
   */
  SI_STATUS_INPUT_ERROR = 7,
  SI_STATUS_INVARIANT_VIOLATION = 8,
  SI_STATUS_PANIC = 9,
} SiStatus;

/**
 * A validated vector of non-negative per-unit values.
 */
typedef struct SiDistribution SiDistribution;

/**
 * Tract lookup structure built from a GeoJSON FeatureCollection.
 */
typedef struct SiSpatialIndex SiSpatialIndex;

/**
 * Headline indexes. Undefined entries (for example a ratio whose low
 * percentile is zero) are NaN.
 */
typedef struct SiIndexSuite {
  double gini;
  double ratio_80_20;
  double ratio_90_10;
  double hoover;
  double theil;
} SiIndexSuite;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until
 * the next call into this library on the same thread.
 */
const char *si_last_error_message(void);

/**
 * Static, NUL-terminated library version.
 */
const char *si_version(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library.
 */
void si_string_free(char *s);

/**
 * Builds an index from `len` bytes of GeoJSON.
 *
 * # Safety
 * `geojson` must point to `len` readable bytes; `out` must be writable.
 */
enum SiStatus si_spatial_index_from_geojson(const uint8_t *geojson,
                                            size_t len,
                                            struct SiSpatialIndex **out);

/**
 * # Safety
 * `index` must be null or a handle from [`si_spatial_index_from_geojson`].
 */
void si_spatial_index_free(struct SiSpatialIndex *index);

/**
 * Number of tracts, or 0 for a null handle.
 *
 * # Safety
 * `index` must be null or a live handle.
 */
size_t si_spatial_index_len(const struct SiSpatialIndex *index);

/**
 * Position (in tract-id order) of the tract containing the point.
 * Returns [`SiStatus::NotFound`] when no tract contains it.
 *
 * # Safety
 * `index` must be a live handle and `out_position` writable.
 */
enum SiStatus si_spatial_index_assign(const struct SiSpatialIndex *index,
                                      double lat,
                                      double lon,
                                      size_t *out_position);

/**
 * Tract id at `position`, owned by the index; null when out of range.
 *
 * # Safety
 * `index` must be null or a live handle.
 */
const char *si_spatial_index_tract_id(const struct SiSpatialIndex *index, size_t position);

/**
 * Copies `len` values into a new distribution.
 *
 * # Safety
 * `values` must point to `len` readable doubles; `out` must be writable.
 */
enum SiStatus si_distribution_new(const double *values, size_t len, struct SiDistribution **out);

/**
 * # Safety
 * `dist` must be null or a handle from [`si_distribution_new`].
 */
void si_distribution_free(struct SiDistribution *dist);

/**
 * # Safety
 * `dist` must be a live handle and `out` writable.
 */
enum SiStatus si_distribution_gini(const struct SiDistribution *dist, double *out);

/**
 * Fails with [`SiStatus::InvalidInput`] only when no index is defined.
 *
 * # Safety
 * `dist` must be a live handle and `out` writable.
 */
enum SiStatus si_distribution_index_suite(const struct SiDistribution *dist,
                                          struct SiIndexSuite *out);

/**
 * Writes the `n + 1` Lorenz points into `xs` and `ys`. `out_len` always
 * receives the point count; with a short buffer nothing else is written
 * and [`SiStatus::BufferTooSmall`] is returned.
 *
 * # Safety
 * `xs` and `ys` must hold `capacity` doubles; `out_len` must be writable.
 */
enum SiStatus si_distribution_lorenz(const struct SiDistribution *dist,
                                     double *xs,
                                     double *ys,
                                     size_t capacity,
                                     size_t *out_len);

/**
 * Shannon entropy of the counts over ln of the nonzero category count.
 *
 * # Safety
 * `counts` must point to `len` readable doubles; `out` must be writable.
 */
enum SiStatus si_relative_entropy(const double *counts, size_t len, double *out);

/**
 * Runs the full pipeline with default settings and returns `report.json`
 * contents in `out_json`. `census_path` and `out_dir` may be null; when
 * `out_dir` is set every report file is written there as well.
 *
 * # Safety
 * Paths must be null or NUL-terminated; `out_json` must be writable.
 */
enum SiStatus si_run_pipeline(const char *events_path,
                              const char *tracts_path,
                              const char *census_path,
                              const char *out_dir,
                              bool raw_counts,
                              size_t partitions,
                              char **out_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SOCIALINEQ_H */
