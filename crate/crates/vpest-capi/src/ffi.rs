//! The extern "C" surface: opaque handles, plain-old-data config, and
//! status codes.

#![allow(clippy::missing_safety_doc)]

use std::os::raw::c_char;

use nalgebra::{Vector2, Vector3};
use vpest::geometry::{Direction3, GravityQuality, LineSegment};
use vpest::robust::{hybrid_ransac, ransac, LoMode, RansacConfig, RobustError, RobustEstimate};
use vpest::scene::SceneInput;
use vpest::solvers::SolverId;

/// Status code returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VpestStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InsufficientLines = 3,
    NoModelFound = 4,
    ConfigMismatch = 5,
}

/// Estimator selector.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VpestSolver {
    Hybrid = 0,
    S220 = 1,
    S211 = 2,
    S200g = 3,
    S011g = 4,
    S110g = 5,
}

/// Quality of the supplied gravity direction.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VpestGravityQuality {
    Exact = 0,
    Prior = 1,
}

/// Local optimization mode.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VpestLoMode {
    Ours = 0,
    Iter = 1,
    None = 2,
}

/// Estimator configuration. Initialize with [`vpest_config_default`] and
/// override individual fields as needed.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct VpestConfig {
    pub min_iterations: u64,
    pub max_iterations: u64,
    pub confidence: f64,
    pub inlier_threshold: f64,
    pub lo_iterations: u64,
    pub lo_subset_fraction: f64,
    pub lo_min_subset: u64,
    pub lo_mode: VpestLoMode,
    pub refine_max_iters: u64,
    /// Prior probability per solver in the order 220, 211, 200g, 011g, 110g.
    pub solver_priors: [f64; 5],
    pub seed: u64,
    pub prior_gravity_jitter_deg: f64,
    pub focal_bracket_lo: f64,
    pub focal_bracket_hi: f64,
}

impl VpestConfig {
    fn to_ransac(self) -> RansacConfig {
        RansacConfig {
            min_iterations: self.min_iterations as usize,
            max_iterations: self.max_iterations as usize,
            confidence: self.confidence,
            inlier_threshold: self.inlier_threshold,
            lo_iterations: self.lo_iterations as usize,
            lo_subset_fraction: self.lo_subset_fraction,
            lo_min_subset: self.lo_min_subset as usize,
            lo_mode: match self.lo_mode {
                VpestLoMode::Ours => LoMode::Ours,
                VpestLoMode::Iter => LoMode::Iter,
                VpestLoMode::None => LoMode::None,
            },
            refine_max_iters: self.refine_max_iters as usize,
            solver_priors: self.solver_priors,
            seed: self.seed,
            prior_gravity_jitter_deg: self.prior_gravity_jitter_deg,
            focal_bracket: (self.focal_bracket_lo, self.focal_bracket_hi),
        }
    }
}

/// A scene under construction: image size, segments, optional gravity.
pub struct VpestScene {
    width: f64,
    height: f64,
    segments: Vec<LineSegment>,
    gravity: Option<(Direction3, GravityQuality)>,
}

/// An estimation result.
pub struct VpestEstimate {
    inner: RobustEstimate,
}

/// Creates an empty scene for an image of the given size. Pass zero
/// dimensions when segment coordinates are already centered on the
/// principal point. Free with [`vpest_scene_free`].
#[no_mangle]
pub extern "C" fn vpest_scene_new(width: f64, height: f64) -> *mut VpestScene {
    Box::into_raw(Box::new(VpestScene {
        width,
        height,
        segments: Vec::new(),
        gravity: None,
    }))
}

#[no_mangle]
pub unsafe extern "C" fn vpest_scene_free(scene: *mut VpestScene) {
    if !scene.is_null() {
        drop(Box::from_raw(scene));
    }
}

/// Appends one segment in image coordinates (origin at the top-left).
#[no_mangle]
pub unsafe extern "C" fn vpest_scene_add_segment(
    scene: *mut VpestScene,
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
) -> VpestStatus {
    let Some(scene) = scene.as_mut() else {
        return VpestStatus::NullPointer;
    };
    if ![x1, y1, x2, y2].iter().all(|v| v.is_finite()) {
        return VpestStatus::InvalidArgument;
    }
    let p = Vector2::new(x1, y1);
    let q = Vector2::new(x2, y2);
    if (p - q).norm() <= 1e-9 {
        return VpestStatus::InvalidArgument;
    }
    scene.segments.push(LineSegment::new(p, q));
    VpestStatus::Ok
}

#[no_mangle]
pub unsafe extern "C" fn vpest_scene_segment_count(scene: *const VpestScene) -> u64 {
    scene.as_ref().map_or(0, |s| s.segments.len() as u64)
}

/// Sets the gravity direction in camera coordinates (normalized internally).
#[no_mangle]
pub unsafe extern "C" fn vpest_scene_set_gravity(
    scene: *mut VpestScene,
    x: f64,
    y: f64,
    z: f64,
    quality: VpestGravityQuality,
) -> VpestStatus {
    let Some(scene) = scene.as_mut() else {
        return VpestStatus::NullPointer;
    };
    let Ok(dir) = Direction3::new(Vector3::new(x, y, z)) else {
        return VpestStatus::InvalidArgument;
    };
    let quality = match quality {
        VpestGravityQuality::Exact => GravityQuality::Exact,
        VpestGravityQuality::Prior => GravityQuality::Prior,
    };
    scene.gravity = Some((dir, quality));
    VpestStatus::Ok
}

#[no_mangle]
pub unsafe extern "C" fn vpest_scene_clear_gravity(scene: *mut VpestScene) -> VpestStatus {
    let Some(scene) = scene.as_mut() else {
        return VpestStatus::NullPointer;
    };
    scene.gravity = None;
    VpestStatus::Ok
}

/// Fills `config` with the library defaults.
#[no_mangle]
pub unsafe extern "C" fn vpest_config_default(config: *mut VpestConfig) -> VpestStatus {
    let Some(config) = config.as_mut() else {
        return VpestStatus::NullPointer;
    };
    let d = RansacConfig::default();
    *config = VpestConfig {
        min_iterations: d.min_iterations as u64,
        max_iterations: d.max_iterations as u64,
        confidence: d.confidence,
        inlier_threshold: d.inlier_threshold,
        lo_iterations: d.lo_iterations as u64,
        lo_subset_fraction: d.lo_subset_fraction,
        lo_min_subset: d.lo_min_subset as u64,
        lo_mode: VpestLoMode::Ours,
        refine_max_iters: d.refine_max_iters as u64,
        solver_priors: d.solver_priors,
        seed: d.seed,
        prior_gravity_jitter_deg: d.prior_gravity_jitter_deg,
        focal_bracket_lo: d.focal_bracket.0,
        focal_bracket_hi: d.focal_bracket.1,
    };
    VpestStatus::Ok
}

/// Runs the selected estimator on the scene. On success `*out` owns the
/// result; free it with [`vpest_estimate_free`].
#[no_mangle]
pub unsafe extern "C" fn vpest_estimate(
    scene: *const VpestScene,
    solver: VpestSolver,
    config: *const VpestConfig,
    out: *mut *mut VpestEstimate,
) -> VpestStatus {
    let Some(out) = out.as_mut() else {
        return VpestStatus::NullPointer;
    };
    *out = std::ptr::null_mut();
    let Some(scene) = scene.as_ref() else {
        return VpestStatus::NullPointer;
    };
    let Some(config) = config.as_ref() else {
        return VpestStatus::NullPointer;
    };

    let input = SceneInput {
        width: scene.width,
        height: scene.height,
        segments: scene.segments.clone(),
        gravity: scene.gravity,
        gt: None,
    };
    let Ok(lines) = input.lines() else {
        return VpestStatus::InvalidArgument;
    };
    let gravity = input.gravity_observation();
    let ransac_config = config.to_ransac();

    let result = match solver {
        VpestSolver::Hybrid => hybrid_ransac(&lines, &gravity, &ransac_config),
        VpestSolver::S220 => ransac(&lines, SolverId::S220, &gravity, &ransac_config),
        VpestSolver::S211 => ransac(&lines, SolverId::S211, &gravity, &ransac_config),
        VpestSolver::S200g => ransac(&lines, SolverId::S200g, &gravity, &ransac_config),
        VpestSolver::S011g => ransac(&lines, SolverId::S011g, &gravity, &ransac_config),
        VpestSolver::S110g => ransac(&lines, SolverId::S110g, &gravity, &ransac_config),
    };
    match result {
        Ok(estimate) => {
            *out = Box::into_raw(Box::new(VpestEstimate { inner: estimate }));
            VpestStatus::Ok
        }
        Err(RobustError::InsufficientLines { .. }) => VpestStatus::InsufficientLines,
        Err(RobustError::NoModelFound) => VpestStatus::NoModelFound,
        Err(RobustError::AllZeroWeights) => VpestStatus::InvalidArgument,
        Err(RobustError::ConfigMismatch) => VpestStatus::ConfigMismatch,
    }
}

#[no_mangle]
pub unsafe extern "C" fn vpest_estimate_free(estimate: *mut VpestEstimate) {
    if !estimate.is_null() {
        drop(Box::from_raw(estimate));
    }
}

/// Copies the row-major 3x3 rotation into `out` (9 doubles).
#[no_mangle]
pub unsafe extern "C" fn vpest_estimate_rotation(
    estimate: *const VpestEstimate,
    out: *mut f64,
) -> VpestStatus {
    let Some(estimate) = estimate.as_ref() else {
        return VpestStatus::NullPointer;
    };
    if out.is_null() {
        return VpestStatus::NullPointer;
    }
    let r = estimate.inner.frame.rotation();
    for row in 0..3 {
        for col in 0..3 {
            *out.add(row * 3 + col) = r[(row, col)];
        }
    }
    VpestStatus::Ok
}

/// Estimated focal length in pixels, or a negative value on null input.
#[no_mangle]
pub unsafe extern "C" fn vpest_estimate_focal(estimate: *const VpestEstimate) -> f64 {
    estimate.as_ref().map_or(-1.0, |e| e.inner.frame.focal())
}

#[no_mangle]
pub unsafe extern "C" fn vpest_estimate_score(estimate: *const VpestEstimate) -> u64 {
    estimate.as_ref().map_or(0, |e| e.inner.score as u64)
}

#[no_mangle]
pub unsafe extern "C" fn vpest_estimate_iterations(estimate: *const VpestEstimate) -> u64 {
    estimate.as_ref().map_or(0, |e| e.inner.iterations_run as u64)
}

/// Copies the unit-norm homogeneous vanishing point `index` (0..3) into
/// `out` (3 doubles).
#[no_mangle]
pub unsafe extern "C" fn vpest_estimate_vp(
    estimate: *const VpestEstimate,
    index: u32,
    out: *mut f64,
) -> VpestStatus {
    let Some(estimate) = estimate.as_ref() else {
        return VpestStatus::NullPointer;
    };
    if out.is_null() {
        return VpestStatus::NullPointer;
    }
    if index >= 3 {
        return VpestStatus::InvalidArgument;
    }
    let vp = estimate.inner.frame.vp(index as usize);
    *out = vp.x;
    *out.add(1) = vp.y;
    *out.add(2) = vp.z;
    VpestStatus::Ok
}

/// Number of inlier lines assigned to vanishing point `index`, or -1 on
/// invalid input.
#[no_mangle]
pub unsafe extern "C" fn vpest_estimate_inlier_count(
    estimate: *const VpestEstimate,
    index: u32,
) -> i64 {
    let Some(estimate) = estimate.as_ref() else {
        return -1;
    };
    if index >= 3 {
        return -1;
    }
    estimate.inner.inlier_indices[index as usize].len() as i64
}

/// Copies up to `capacity` inlier line indices of vanishing point `index`
/// into `buffer`. Returns the number copied, or -1 on invalid input.
#[no_mangle]
pub unsafe extern "C" fn vpest_estimate_inliers(
    estimate: *const VpestEstimate,
    index: u32,
    buffer: *mut u64,
    capacity: u64,
) -> i64 {
    let Some(estimate) = estimate.as_ref() else {
        return -1;
    };
    if buffer.is_null() || index >= 3 {
        return -1;
    }
    let indices = &estimate.inner.inlier_indices[index as usize];
    let n = indices.len().min(capacity as usize);
    for (k, &i) in indices.iter().take(n).enumerate() {
        *buffer.add(k) = i as u64;
    }
    n as i64
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn vpest_status_message(status: VpestStatus) -> *const c_char {
    let bytes: &'static [u8] = match status {
        VpestStatus::Ok => b"ok\0",
        VpestStatus::NullPointer => b"null pointer argument\0",
        VpestStatus::InvalidArgument => b"invalid argument\0",
        VpestStatus::InsufficientLines => b"not enough usable lines\0",
        VpestStatus::NoModelFound => b"no solver call produced a valid frame\0",
        VpestStatus::ConfigMismatch => b"solver requires a gravity observation\0",
    };
    bytes.as_ptr() as *const c_char
}

/// Library version as a static C string.
#[no_mangle]
pub extern "C" fn vpest_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}
