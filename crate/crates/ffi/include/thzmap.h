#ifndef THZMAP_H
#define THZMAP_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ThzStatus {
  THZ_STATUS_OK = 0,
  THZ_STATUS_NULL_POINTER = 1,
  THZ_STATUS_INVALID_ARGUMENT = 2,
  THZ_STATUS_SHAPE_MISMATCH = 3,
  THZ_STATUS_OUT_OF_DOMAIN = 4,
  THZ_STATUS_INDEX_OUT_OF_RANGE = 5,
  THZ_STATUS_GENERATION_FAILED = 6,
  THZ_STATUS_BUFFER_TOO_SMALL = 7,
  THZ_STATUS_IO = 8,
  THZ_STATUS_INTERNAL = 9,
} ThzStatus;

/**
 * Grid geometry plus occupancy.
 */
typedef struct ThzScene ThzScene;

/**
 * Dense `rows x cols x dirs` tensor, direction axis fastest.
 */
typedef struct ThzTensor ThzTensor;

typedef struct ThzBeams {
  size_t n_beams;
  double angular_sep_deg;
  double beamwidth_deg;
} ThzBeams;

typedef struct ThzRadio {
  double tx_power_dbm;
  double noise_floor_dbm;
  double carrier_hz;
  double absorption_per_m;
  double reflection_loss_db;
  size_t rays_per_beam;
} ThzRadio;

typedef struct ThzScaling {
  double psi_min;
  double psi_max;
  double db_floor;
  double db_ceil;
} ThzScaling;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Static description of a status code.
 */
const char *thz_status_message(enum ThzStatus status);

/**
 * Message of the last failed call on this thread. Valid until the next
 * failing call on the same thread.
 */
const char *thz_last_error(void);

struct ThzBeams thz_beams_default(void);

struct ThzRadio thz_radio_default(void);

/**
 * Random layout of `n_obstacles` quadrilaterals rasterized onto an
 * `n_rows x n_cols` grid over a `length_m x width_m` area, BS at the center.
 *
 * # Safety
 * `out` must be valid for one pointer write.
 */
enum ThzStatus thz_scene_generate(double length_m,
                                  double width_m,
                                  size_t n_rows,
                                  size_t n_cols,
                                  size_t n_obstacles,
                                  double min_side_m,
                                  double max_side_m,
                                  uint64_t seed,
                                  struct ThzScene **out);

/**
 * Scene from a caller-supplied row-major 0/1 grid of `n_rows * n_cols` bytes.
 *
 * # Safety
 * `cells` must point to `n_rows * n_cols` readable bytes; `out` must be
 * valid for one pointer write.
 */
enum ThzStatus thz_scene_from_occupancy(double length_m,
                                        double width_m,
                                        size_t n_rows,
                                        size_t n_cols,
                                        const uint8_t *cells,
                                        struct ThzScene **out);

/**
 * Copies the occupancy grid (row-major bytes) into `out`.
 *
 * # Safety
 * `scene` must come from a `thz_scene_*` constructor; `out` must be
 * writable for `len` bytes.
 */
enum ThzStatus thz_scene_occupancy(const struct ThzScene *scene, uint8_t *out, size_t len);

/**
 * # Safety
 * `scene` must be null or come from a `thz_scene_*` constructor, and must
 * not be used afterwards.
 */
void thz_scene_free(struct ThzScene *scene);

/**
 * Received power in mW for every cell and beam.
 *
 * # Safety
 * `scene`, `beams` and `radio` must be valid; `out` must be valid for one
 * pointer write.
 */
enum ThzStatus thz_trace_all(const struct ThzScene *scene,
                             const struct ThzBeams *beams,
                             const struct ThzRadio *radio,
                             struct ThzTensor **out);

/**
 * Default scaling for a scene: noise floor to the strongest reachable power.
 *
 * # Safety
 * `scene` and `radio` must be valid; `out` must be writable.
 */
enum ThzStatus thz_scaling_for_scene(const struct ThzScene *scene,
                                     const struct ThzRadio *radio,
                                     struct ThzScaling *out);

/**
 * Scales a raw power tensor: occupied cells become 1, free cells map into
 * `[psi_min, psi_max]`.
 *
 * # Safety
 * All pointers must be valid; `out` must be valid for one pointer write.
 */
enum ThzStatus thz_scale(const struct ThzTensor *raw,
                         const struct ThzScene *scene,
                         const struct ThzScaling *scaling,
                         struct ThzTensor **out);

/**
 * Tensor from `rows * cols * dirs` values, direction axis fastest.
 *
 * # Safety
 * `data` must point to `rows * cols * dirs` readable doubles; `out` must be
 * valid for one pointer write.
 */
enum ThzStatus thz_tensor_new(size_t rows,
                              size_t cols,
                              size_t dirs,
                              const double *data,
                              struct ThzTensor **out);

/**
 * # Safety
 * `tensor` must be valid; each non-null output must be writable.
 */
enum ThzStatus thz_tensor_dims(const struct ThzTensor *tensor,
                               size_t *rows,
                               size_t *cols,
                               size_t *dirs);

/**
 * Copies all tensor values into `out`.
 *
 * # Safety
 * `tensor` must be valid; `out` must be writable for `len` doubles.
 */
enum ThzStatus thz_tensor_copy(const struct ThzTensor *tensor, double *out, size_t len);

/**
 * # Safety
 * `tensor` must be null or a live handle, not used afterwards.
 */
void thz_tensor_free(struct ThzTensor *tensor);

/**
 * Thresholds every direction of a scaled tensor at `psi_max` and keeps the
 * cells flagged in all of them. Writes `rows * cols` bytes.
 *
 * # Safety
 * `scaled` must be valid; `out` must be writable for `len` bytes.
 */
enum ThzStatus thz_sense_hard_vote(const struct ThzTensor *scaled,
                                   double psi_max,
                                   uint8_t *out,
                                   size_t len);

/**
 * `max(0, mean over directions - psi_max)` per cell. Writes `rows * cols`
 * doubles.
 *
 * # Safety
 * `scaled` must be valid; `out` must be writable for `len` doubles.
 */
enum ThzStatus thz_soft_vote(const struct ThzTensor *scaled,
                             double psi_max,
                             double *out,
                             size_t len);

/**
 * `exp(-2 n (1/2 - epsilon)^2)`.
 *
 * # Safety
 * `out` must be writable.
 */
enum ThzStatus thz_hoeffding_bound(size_t n_votes, double epsilon, double *out);

/**
 * Probability that a majority of `n_votes` (odd) independent votes, each
 * wrong with probability `epsilon`, is wrong.
 *
 * # Safety
 * `out` must be writable.
 */
enum ThzStatus thz_exact_majority_error(size_t n_votes, double epsilon, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* THZMAP_H */
