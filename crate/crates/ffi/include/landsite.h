#ifndef LANDSITE_H
#define LANDSITE_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum LsStatus {
  LS_STATUS_OK = 0,
  LS_STATUS_NULL_POINTER = 1,
  LS_STATUS_INVALID_INPUT = 2,
  LS_STATUS_IO = 3,
  LS_STATUS_FORMAT = 4,
  LS_STATUS_MODEL_MISMATCH = 5,
  LS_STATUS_INFEASIBLE_WIND = 6,
  LS_STATUS_DEGENERATE = 7,
  /**
   * No grass cell free of hazards to land on.
   */
  LS_STATUS_NO_CANDIDATE = 8,
  /**
   * Candidates exist but none passed every gate.
   */
  LS_STATUS_INFEASIBLE = 9,
  LS_STATUS_PANIC = 10,
} LsStatus;

/**
 * Trained grass classifier.
 */
typedef struct LsModel LsModel;

/**
 * Terrain layer stack of one region.
 */
typedef struct LsStack LsStack;

/**
 * Approach parameters; angles in radians, lengths in metres.
 */
typedef struct LsApproachParams {
  double v_land;
  double gamma_land;
  double delta_beta_w;
  double h_app;
  double phi_land;
  double delta_td;
  double g;
  double safety_margin;
  double flare_clearance_ratio;
  /**
   * Non-zero: cells without elevation block the approach.
   */
  uint8_t unknown_is_obstacle;
} LsApproachParams;

/**
 * Chosen touch-down and approach; world coordinates, metres.
 */
typedef struct LsPlan {
  size_t td_col;
  size_t td_row;
  double touch_down[3];
  double approach_point[3];
  /**
   * Unit vector from the touch-down towards the approach point.
   */
  double direction[2];
  double x_app;
  double r_loit;
  double loiter_center[3];
  /**
   * +1 loiter circle left of the approach direction, -1 right.
   */
  int8_t loiter_side;
  /**
   * Distance to the nearest hazard at the touch-down, metres.
   */
  double score;
  size_t unverified_cells;
  size_t candidates_evaluated;
} LsPlan;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *ls_version(void);

/**
 * Message of the last failed call on this thread; empty if none. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *ls_last_error_message(void);

/**
 * Fills `out` with the default approach parameters.
 *
 * # Safety
 * `out` must be null or point to writable memory for one `LsApproachParams`.
 */
enum LsStatus ls_approach_params_default(struct LsApproachParams *out);

/**
 * Final approach length and loiter radius for wind speed `wind` (m/s).
 *
 * # Safety
 * Pointers must be null or valid for reads (`params`) and writes (outputs).
 */
enum LsStatus ls_approach_geometry(const struct LsApproachParams *params,
                                   double wind,
                                   double *x_app,
                                   double *r_loit);

/**
 * Altitude-dependent edge and distance thresholds of the default segmenter.
 *
 * # Safety
 * Output pointers must be null or writable.
 */
enum LsStatus ls_thresholds_for_agl(double agl, double *canny, double *distance);

/**
 * Loads a classifier model from a JSON file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum LsStatus ls_model_load(const char *path, struct LsModel **out);

/**
 * Releases a model; null is ignored.
 *
 * # Safety
 * `model` must come from `ls_model_load` and not be used afterwards.
 */
void ls_model_free(struct LsModel *model);

/**
 * Number of region features a model expects.
 */
size_t ls_feature_count(void);

/**
 * Classifies one feature vector of `n` values; `label` is 1 for grass.
 *
 * # Safety
 * `features` must point to `n` readable doubles; outputs must be writable.
 */
enum LsStatus ls_model_predict(const struct LsModel *model,
                               const double *features,
                               size_t n,
                               uint8_t *label,
                               double *p_grass);

/**
 * Builds a layer stack from row-major rasters (row 0 is the southern edge).
 * `valid` may be null when every elevation is valid; `grass` is 1 for grass.
 * The hazard thresholds are a slope in radians and a roughness in metres.
 *
 * # Safety
 * `elevation` and `grass` (and `valid` if non-null) must point to
 * `cols * rows` readable elements; `out` must be writable.
 */
enum LsStatus ls_stack_new(size_t cols,
                           size_t rows,
                           double origin_x,
                           double origin_y,
                           double resolution,
                           const double *elevation,
                           const uint8_t *valid,
                           const uint8_t *grass,
                           double max_slope,
                           double max_roughness,
                           struct LsStack **out);

/**
 * Loads a stack from a directory of exported layers, recomputing derived
 * layers with the default thresholds.
 *
 * # Safety
 * `dir` must be a NUL-terminated string; `out` must be writable.
 */
enum LsStatus ls_stack_import(const char *dir, struct LsStack **out);

/**
 * Writes every layer as a 16-bit PGM with a JSON sidecar into `dir`.
 *
 * # Safety
 * `stack` must be a live handle; `dir` a NUL-terminated string.
 */
enum LsStatus ls_stack_export(const struct LsStack *stack, const char *dir);

/**
 * Releases a stack; null is ignored.
 *
 * # Safety
 * `stack` must come from this library and not be used afterwards.
 */
void ls_stack_free(struct LsStack *stack);

/**
 * Grid size of a stack.
 *
 * # Safety
 * `stack` must be a live handle; outputs must be writable.
 */
enum LsStatus ls_stack_size(const struct LsStack *stack, size_t *cols, size_t *rows);

/**
 * Copies the distance-to-hazard layer (metres, row-major, `INFINITY` when
 * there is no hazard) into `out`, which holds `len` doubles.
 *
 * # Safety
 * `stack` must be a live handle; `out` must hold `len` writable doubles.
 */
enum LsStatus ls_stack_hazard_distance(const struct LsStack *stack, double *out, size_t len);

/**
 * Plans a touch-down and approach on `stack` for the wind velocity
 * `(wind_x, wind_y)` (direction the air moves towards, m/s). Returns
 * `Ok`, `NoCandidate` or `Infeasible`; `out` is written only on `Ok`.
 *
 * # Safety
 * `stack` must be a live handle; `params` null (defaults) or readable;
 * `out` writable.
 */
enum LsStatus ls_plan(const struct LsStack *stack,
                      const struct LsApproachParams *params,
                      double wind_x,
                      double wind_y,
                      size_t max_candidates,
                      struct LsPlan *out);

/**
 * Runs the full pipeline from a TOML configuration file and writes its
 * outputs to the configured directory. `outcome` receives 0 (feasible
 * plan), 2 (no candidate) or 3 (infeasible plan).
 *
 * # Safety
 * `config` must be a NUL-terminated string; `outcome` writable.
 */
enum LsStatus ls_run_config(const char *config, int32_t *outcome);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LANDSITE_H */
