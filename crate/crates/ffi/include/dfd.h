/* Generated from src/lib.rs by cbindgen. Do not edit. */

#ifndef DFD_H
#define DFD_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DfdStatus {
  DFD_STATUS_OK = 0,
  // A required pointer argument was NULL.
  DFD_STATUS_NULL_ARGUMENT = 1,
  // An argument is outside the function's domain.
  DFD_STATUS_DOMAIN = 2,
  // Two inputs disagree in size, or a grid does not fit an image.
  DFD_STATUS_DIMENSION = 3,
  // A file could not be read or written.
  DFD_STATUS_IO = 4,
  // A file was read but its contents are malformed.
  DFD_STATUS_PARSE = 5,
  // A configuration or calibration is invalid.
  DFD_STATUS_CONFIG = 6,
  // Nothing to compute (for example an empty input).
  DFD_STATUS_EMPTY = 7,
  // An internal panic was caught.
  DFD_STATUS_PANIC = 8,
} DfdStatus;

typedef enum DfdMeasure {
  // Continuous ratio of gradients; uses `sigma1`.
  DFD_MEASURE_RG_CONTINUOUS = 0,
  // Exact discrete ratio of gradients; uses `sigma1`.
  DFD_MEASURE_RG_DISCRETE = 1,
  // Exact discrete single-image measure.
  DFD_MEASURE_MG_DISCRETE = 2,
} DfdMeasure;

// Opaque depth map, one positive value per superpixel.
typedef struct DfdDepthMap DfdDepthMap;

// Opaque grayscale image with intensities in `[0, 1]`.
typedef struct DfdImage DfdImage;

// Log-linear depth/blur calibration: `sigma = c + d * ln(depth)`.
typedef struct DfdCalibration {
  double c;
  double d;
  double sigma_min;
  double sigma_max;
  double d_min;
  double d_max;
} DfdCalibration;

// Rectangular superpixel grid; cells are indexed row-major.
typedef struct DfdGrid {
  size_t cell_width;
  size_t cell_height;
  size_t origin_x;
  size_t origin_y;
  size_t cols;
  size_t rows;
} DfdGrid;

// Summary of one depth estimation.
typedef struct DfdEstimateStats {
  size_t candidate_points;
  size_t valid_points;
  size_t covered_cells;
  size_t total_cells;
  size_t clamped_points;
  size_t negative_discriminant_points;
  double valid_pixel_fraction;
  double covered_cell_fraction;
} DfdEstimateStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Description of the last failure on this thread, or NULL after a success.
const char *dfd_last_error(void);

// Library version as a NUL-terminated string with static lifetime.
const char *dfd_version(void);

double dfd_erf(double x);

// # Safety
// `out_value` must point to a writable `double`.
enum DfdStatus dfd_measure_forward(enum DfdMeasure measure,
                                   double sigma,
                                   double sigma1,
                                   double *out_value);

// Recovers sigma in `[lo, hi]` from a measure value. Values outside the
// range of the measure on `[lo, hi]` give the nearer endpoint and set
// `*out_of_range` to 1.
//
// # Safety
// `out_sigma` must point to a writable `double`; `out_of_range` may be NULL.
enum DfdStatus dfd_measure_invert(enum DfdMeasure measure,
                                  double value,
                                  double sigma1,
                                  double lo,
                                  double hi,
                                  double tol,
                                  double *out_sigma,
                                  int32_t *out_of_range);

// Relative error of the continuous inverse applied to the discrete ratio
// measure. Writes `INFINITY` where the continuous inverse has no solution.
//
// # Safety
// `out_value` must point to a writable `double`.
enum DfdStatus dfd_erg(double sigma, double sigma1, double *out_value);

// Copies `width * height` row-major intensities in `[0, 1]`.
//
// # Safety
// `data` must point to `width * height` readable doubles and `out_image`
// to a writable handle slot.
enum DfdStatus dfd_image_new(size_t width,
                             size_t height,
                             const double *data,
                             struct DfdImage **out_image);

// Loads a PGM (P5) or PNG file, converting color to luminance.
//
// # Safety
// `path` must be a NUL-terminated string; `out_image` a writable handle slot.
enum DfdStatus dfd_image_load(const char *path, struct DfdImage **out_image);

// Writes PNG when the path ends in `.png`, binary PGM otherwise.
//
// # Safety
// `image_handle` must be a live handle and `path` a NUL-terminated string.
enum DfdStatus dfd_image_save(const struct DfdImage *image_handle, const char *path);

// # Safety
// `image_handle` must be NULL or a live handle.
size_t dfd_image_width(const struct DfdImage *image_handle);

// # Safety
// `image_handle` must be NULL or a live handle.
size_t dfd_image_height(const struct DfdImage *image_handle);

// Row-major pixels, valid while the handle lives.
//
// # Safety
// `image_handle` must be NULL or a live handle.
const double *dfd_image_data(const struct DfdImage *image_handle);

// # Safety
// `image_handle` must be NULL or a handle not yet freed.
void dfd_image_free(struct DfdImage *image_handle);

// Gaussian blur of standard deviation `sigma` with edge replication.
//
// # Safety
// `image_handle` must be a live handle; `out_image` a writable handle slot.
enum DfdStatus dfd_convolve_uniform(const struct DfdImage *image_handle,
                                    double sigma,
                                    struct DfdImage **out_image);

// # Safety
// `out_calibration` must point to a writable `DfdCalibration`.
enum DfdStatus dfd_calibration_fit(double d_min,
                                   double d_max,
                                   double sigma_min,
                                   double sigma_max,
                                   struct DfdCalibration *out_calibration);

// Blur for a depth, clamped to the calibrated range.
//
// # Safety
// `calibration` must be readable; `out_sigma` writable; `out_clamped` may be NULL.
enum DfdStatus dfd_depth_to_blur(const struct DfdCalibration *calibration,
                                 double depth_value,
                                 double *out_sigma,
                                 int32_t *out_clamped);

// Depth for a blur, clamped to the calibrated range.
//
// # Safety
// `calibration` must be readable; `out_depth` writable; `out_clamped` may be NULL.
enum DfdStatus dfd_blur_to_depth(const struct DfdCalibration *calibration,
                                 double sigma,
                                 double *out_depth,
                                 int32_t *out_clamped);

// The 2272 x 1704 benchmark geometry: 55 x 305 cells of 41 x 5 pixels.
struct DfdGrid dfd_grid_make3d(void);

// `cols x rows` cells of the given size centered in a `width x height` image.
//
// # Safety
// `out_grid` must point to a writable `DfdGrid`.
enum DfdStatus dfd_grid_centered(size_t width,
                                 size_t height,
                                 size_t cell_width,
                                 size_t cell_height,
                                 size_t cols,
                                 size_t rows,
                                 struct DfdGrid *out_grid);

// Copies `rows * cols` positive row-major depths.
//
// # Safety
// `values` must point to `rows * cols` readable doubles; `out_depth` to a
// writable handle slot.
enum DfdStatus dfd_depth_new(size_t rows,
                             size_t cols,
                             const double *values,
                             struct DfdDepthMap **out_depth);

// Reads the text depth format (`rows cols` header, then rows of values).
//
// # Safety
// `path` must be a NUL-terminated string; `out_depth` a writable handle slot.
enum DfdStatus dfd_depth_load(const char *path, struct DfdDepthMap **out_depth);

// # Safety
// `depth_handle` must be a live handle and `path` a NUL-terminated string.
enum DfdStatus dfd_depth_save(const struct DfdDepthMap *depth_handle, const char *path);

// # Safety
// `depth_handle` must be NULL or a live handle.
size_t dfd_depth_rows(const struct DfdDepthMap *depth_handle);

// # Safety
// `depth_handle` must be NULL or a live handle.
size_t dfd_depth_cols(const struct DfdDepthMap *depth_handle);

// Row-major values, valid while the handle lives.
//
// # Safety
// `depth_handle` must be NULL or a live handle.
const double *dfd_depth_data(const struct DfdDepthMap *depth_handle);

// # Safety
// `depth_handle` must be NULL or a handle not yet freed.
void dfd_depth_free(struct DfdDepthMap *depth_handle);

// Renders the defocused partner of `image` for the ground truth `gt`.
//
// # Safety
// Handles must be live, `grid` and `calibration` readable, `out_image` a
// writable handle slot.
enum DfdStatus dfd_simulate_defocus(const struct DfdImage *image_handle,
                                    const struct DfdDepthMap *gt,
                                    const struct DfdGrid *grid,
                                    const struct DfdCalibration *calibration,
                                    struct DfdImage **out_image);

// Estimates a depth map from a focused/defocused pair with default
// pipeline settings. Cells without a valid edge point get `d_max`.
//
// # Safety
// Handles must be live, `grid` and `calibration` readable, `out_depth` a
// writable handle slot; `out_stats` may be NULL.
enum DfdStatus dfd_estimate_depth_map(const struct DfdImage *original,
                                      const struct DfdImage *defocused,
                                      const struct DfdGrid *grid,
                                      const struct DfdCalibration *calibration,
                                      struct DfdDepthMap **out_depth,
                                      struct DfdEstimateStats *out_stats);

// Mean absolute relative error of `estimate` against `gt`.
//
// # Safety
// Handles must be live; `out_value` writable.
enum DfdStatus dfd_mare(const struct DfdDepthMap *estimate,
                        const struct DfdDepthMap *gt,
                        double *out_value);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DFD_H */
