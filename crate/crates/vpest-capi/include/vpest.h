/* C API for the vpest Manhattan frame estimation library. */

#ifndef VPEST_H
#define VPEST_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Quality of the supplied gravity direction.
 */
typedef enum VpestGravityQuality {
  VPEST_GRAVITY_QUALITY_EXACT = 0,
  VPEST_GRAVITY_QUALITY_PRIOR = 1,
} VpestGravityQuality;

/**
 * Local optimization mode.
 */
typedef enum VpestLoMode {
  VPEST_LO_MODE_OURS = 0,
  VPEST_LO_MODE_ITER = 1,
  VPEST_LO_MODE_NONE = 2,
} VpestLoMode;

/**
 * Estimator selector.
 */
typedef enum VpestSolver {
  VPEST_SOLVER_HYBRID = 0,
  VPEST_SOLVER_S220 = 1,
  VPEST_SOLVER_S211 = 2,
  VPEST_SOLVER_S200G = 3,
  VPEST_SOLVER_S011G = 4,
  VPEST_SOLVER_S110G = 5,
} VpestSolver;

/**
 * Status code returned by every fallible call.
 */
typedef enum VpestStatus {
  VPEST_STATUS_OK = 0,
  VPEST_STATUS_NULL_POINTER = 1,
  VPEST_STATUS_INVALID_ARGUMENT = 2,
  VPEST_STATUS_INSUFFICIENT_LINES = 3,
  VPEST_STATUS_NO_MODEL_FOUND = 4,
  VPEST_STATUS_CONFIG_MISMATCH = 5,
} VpestStatus;

/**
 * An estimation result.
 */
typedef struct VpestEstimate VpestEstimate;

/**
 * A scene under construction: image size, segments, optional gravity.
 */
typedef struct VpestScene VpestScene;

/**
 * Estimator configuration. Initialize with [`vpest_config_default`] and
 * override individual fields as needed.
 */
typedef struct VpestConfig {
  uint64_t min_iterations;
  uint64_t max_iterations;
  double confidence;
  double inlier_threshold;
  uint64_t lo_iterations;
  double lo_subset_fraction;
  uint64_t lo_min_subset;
  enum VpestLoMode lo_mode;
  uint64_t refine_max_iters;
  /**
   * Prior probability per solver in the order 220, 211, 200g, 011g, 110g.
   */
  double solver_priors[5];
  uint64_t seed;
  double prior_gravity_jitter_deg;
  double focal_bracket_lo;
  double focal_bracket_hi;
} VpestConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates an empty scene for an image of the given size. Pass zero
 * dimensions when segment coordinates are already centered on the
 * principal point. Free with [`vpest_scene_free`].
 */
struct VpestScene *vpest_scene_new(double width, double height);

void vpest_scene_free(struct VpestScene *scene);

/**
 * Appends one segment in image coordinates (origin at the top-left).
 */
enum VpestStatus vpest_scene_add_segment(struct VpestScene *scene,
                                         double x1,
                                         double y1,
                                         double x2,
                                         double y2);

uint64_t vpest_scene_segment_count(const struct VpestScene *scene);

/**
 * Sets the gravity direction in camera coordinates (normalized internally).
 */
enum VpestStatus vpest_scene_set_gravity(struct VpestScene *scene,
                                         double x,
                                         double y,
                                         double z,
                                         enum VpestGravityQuality quality);

enum VpestStatus vpest_scene_clear_gravity(struct VpestScene *scene);

/**
 * Fills `config` with the library defaults.
 */
enum VpestStatus vpest_config_default(struct VpestConfig *config);

/**
 * Runs the selected estimator on the scene. On success `*out` owns the
 * result; free it with [`vpest_estimate_free`].
 */
enum VpestStatus vpest_estimate(const struct VpestScene *scene,
                                enum VpestSolver solver,
                                const struct VpestConfig *config,
                                struct VpestEstimate **out);

void vpest_estimate_free(struct VpestEstimate *estimate);

/**
 * Copies the row-major 3x3 rotation into `out` (9 doubles).
 */
enum VpestStatus vpest_estimate_rotation(const struct VpestEstimate *estimate, double *out);

/**
 * Estimated focal length in pixels, or a negative value on null input.
 */
double vpest_estimate_focal(const struct VpestEstimate *estimate);

uint64_t vpest_estimate_score(const struct VpestEstimate *estimate);

uint64_t vpest_estimate_iterations(const struct VpestEstimate *estimate);

/**
 * Copies the unit-norm homogeneous vanishing point `index` (0..3) into
 * `out` (3 doubles).
 */
enum VpestStatus vpest_estimate_vp(const struct VpestEstimate *estimate,
                                   uint32_t index,
                                   double *out);

/**
 * Number of inlier lines assigned to vanishing point `index`, or -1 on
 * invalid input.
 */
int64_t vpest_estimate_inlier_count(const struct VpestEstimate *estimate, uint32_t index);

/**
 * Copies up to `capacity` inlier line indices of vanishing point `index`
 * into `buffer`. Returns the number copied, or -1 on invalid input.
 */
int64_t vpest_estimate_inliers(const struct VpestEstimate *estimate,
                               uint32_t index,
                               uint64_t *buffer,
                               uint64_t capacity);

/**
 * Static description of a status code.
 */
const char *vpest_status_message(enum VpestStatus status);

/**
 * Library version as a static C string.
 */
const char *vpest_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VPEST_H */
