/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef RADBLOCK_H
#define RADBLOCK_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes of every fallible call.
typedef enum RbStatus {
  RB_STATUS_OK = 0,
  RB_STATUS_NULL_POINTER = 1,
  RB_STATUS_INVALID_ARGUMENT = 2,
  RB_STATUS_SHAPE_MISMATCH = 3,
  RB_STATUS_NUMERICAL = 4,
  RB_STATUS_IO = 5,
  RB_STATUS_PANIC = 6,
} RbStatus;

// Fitted k-NN classifier.
typedef struct RbKnn RbKnn;

// Detector plus tracker for one stream of frames.
typedef struct RbPipeline RbPipeline;

// One live track.
typedef struct RbTrack {
  uint64_t id;
  double x;
  double y;
  double vx;
  double vy;
  uint32_t misses;
  uint32_t age;
} RbTrack;

// Confusion counts and derived metrics. Undefined ratios are NaN with the
// matching `has_*` flag cleared.
typedef struct RbMetrics {
  uint64_t tp;
  uint64_t fp;
  uint64_t tn;
  uint64_t fn_;
  double accuracy;
  double precision;
  double recall;
  double f1;
  bool has_accuracy;
  bool has_precision;
  bool has_recall;
  bool has_f1;
} RbMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, empty after a success.
// The pointer stays valid until the next call on the same thread.
const char *rb_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *rb_version(void);

// Creates a pipeline. `config_toml` is an experiment config in TOML (only
// the radar and pipeline tables are used) or null for defaults.
//
// # Safety
// `config_toml` must be null or a NUL-terminated string; `out` must be
// writable.
enum RbStatus rb_pipeline_new(const char *config_toml, struct RbPipeline **out);

// Releases a pipeline; null is ignored.
//
// # Safety
// `p` must come from [`rb_pipeline_new`] and not be used afterwards.
void rb_pipeline_free(struct RbPipeline *p);

// Number of floats expected per frame.
//
// # Safety
// `p` must be a live pipeline handle.
enum RbStatus rb_pipeline_frame_len(const struct RbPipeline *p, size_t *out);

// Processes one frame and advances the tracker. `measurements` receives
// the number of objects detected in the frame (may be null).
//
// # Safety
// `p` must be a live handle and `iq` valid for `len` floats.
enum RbStatus rb_pipeline_process_frame(struct RbPipeline *p,
                                        const float *iq,
                                        size_t len,
                                        size_t *measurements);

// Copies up to `capacity` live tracks into `out`; `count` receives the
// total number of live tracks.
//
// # Safety
// `p` must be a live handle, `out` valid for `capacity` writes.
enum RbStatus rb_pipeline_tracks(const struct RbPipeline *p,
                                 struct RbTrack *out,
                                 size_t capacity,
                                 size_t *count);

// Writes the zero-padded stacked track features (`4 * k_max` values).
//
// # Safety
// `p` must be a live handle, `out` valid for `len` writes.
enum RbStatus rb_pipeline_features(const struct RbPipeline *p,
                                   size_t k_max,
                                   double *out,
                                   size_t len);

// Drops all tracks and restarts frame numbering.
//
// # Safety
// `p` must be a live handle.
enum RbStatus rb_pipeline_reset(struct RbPipeline *p);

// Fits a k-NN model on `n` row-major rows of `dim` features with 0/1
// labels.
//
// # Safety
// `features` valid for `n * dim` reads, `labels` for `n`, `out` writable.
enum RbStatus rb_knn_fit(const double *features,
                         const uint8_t *labels,
                         size_t n,
                         size_t dim,
                         size_t k,
                         bool standardize,
                         struct RbKnn **out);

// Predicts one query; `prob` receives the positive vote share and `label`
// the decision (either may be null).
//
// # Safety
// `m` must be a live handle and `query` valid for `dim` reads.
enum RbStatus rb_knn_predict(const struct RbKnn *m,
                             const double *query,
                             size_t dim,
                             double *prob,
                             uint8_t *label);

// Releases a model; null is ignored.
//
// # Safety
// `m` must come from [`rb_knn_fit`] and not be used afterwards.
void rb_knn_free(struct RbKnn *m);

// OR of `blocked[t+1..=t+t_p]`. `out` receives 1 or 0, or -1 when the
// window runs past the series.
//
// # Safety
// `blocked` valid for `len` reads, `out` writable.
enum RbStatus rb_future_label(const uint8_t *blocked,
                              size_t len,
                              size_t t,
                              size_t t_p,
                              int32_t *out);

// Radar measurement `(rho, v, theta)` of a state `[x, y, vx, vy]`.
//
// # Safety
// `state` valid for 4 reads, `out` for 3 writes.
enum RbStatus rb_measure(const double *state, double *out);

// Evaluates `n` 0/1 predictions against labels.
//
// # Safety
// `predictions` and `labels` valid for `n` reads, `out` writable.
enum RbStatus rb_evaluate(const uint8_t *predictions,
                          const uint8_t *labels,
                          size_t n,
                          struct RbMetrics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RADBLOCK_H */
