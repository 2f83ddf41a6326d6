//! Evaluation metrics: rotation error, vanishing-point error, and the
//! recall area-under-curve used by the benchmark studies.

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};

use super::{GeometryError, ManhattanFrame};

/// Rotation, vanishing-point, and focal errors of an estimate against a
/// ground-truth frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalMetrics {
    pub rotation_error_deg: f64,
    pub vp_error_deg: f64,
    pub focal_abs_error: f64,
    pub focal_rel_error: f64,
}

impl EvalMetrics {
    /// Compares two frames. The rotation error is taken modulo the symmetry
    /// of the direction axes (see [`aligned_rotation_error_deg`]) since the
    /// ordering and signs of the estimated directions are arbitrary.
    pub fn compare(est: &ManhattanFrame, gt: &ManhattanFrame) -> Self {
        let focal_abs = (est.focal() - gt.focal()).abs();
        Self {
            rotation_error_deg: aligned_rotation_error_deg(est, gt),
            vp_error_deg: vp_error_deg(est, gt),
            focal_abs_error: focal_abs,
            focal_rel_error: focal_abs / gt.focal(),
        }
    }
}

/// Angular distance in degrees between two rotations, computed from the
/// quaternion dot product. Symmetric, in `[0, 180]`, and equal to the
/// rotation angle of `R_est^T R_gt`.
pub fn rotation_error_deg(r_est: &Matrix3<f64>, r_gt: &Matrix3<f64>) -> f64 {
    let q_est = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*r_est));
    let q_gt = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*r_gt));
    let a = q_est.coords;
    let b = if a.dot(&q_gt.coords) >= 0.0 {
        q_gt.coords
    } else {
        -q_gt.coords
    };
    // 4 atan2(|q1 - q2|, |q1 + q2|) equals arccos(2 (q1 . q2)^2 - 1) but
    // stays accurate near 0 and 180 degrees where arccos loses precision.
    let angle = 4.0 * ((a - b).norm()).atan2((a + b).norm());
    angle.to_degrees().clamp(0.0, 180.0)
}

const PERMUTATIONS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

/// Mean angular error in degrees between matched calibrated directions,
/// matching under the best of the 6 permutations and treating directions as
/// sign-less axes. The result lies in `[0, 90]`.
pub fn vp_error_deg(est: &ManhattanFrame, gt: &ManhattanFrame) -> f64 {
    let r_est = est.rotation();
    let r_gt = gt.rotation();
    let mut best = f64::INFINITY;
    for perm in PERMUTATIONS {
        let mut sum = 0.0;
        for (i, &j) in perm.iter().enumerate() {
            let u = r_est.column(j).into_owned();
            let w = r_gt.column(i).into_owned();
            let dot = u.dot(&w).abs();
            let cross = u.cross(&w).norm();
            sum += cross.atan2(dot).to_degrees();
        }
        best = best.min(sum / 3.0);
    }
    best
}

/// Proper symmetries of a tri-axial frame: the 24 signed permutation
/// matrices with determinant +1.
fn frame_symmetries() -> Vec<Matrix3<f64>> {
    let mut out = Vec::with_capacity(24);
    for perm in PERMUTATIONS {
        let mut p = Matrix3::zeros();
        for (i, &j) in perm.iter().enumerate() {
            p[(j, i)] = 1.0;
        }
        for signs in 0..8u8 {
            let s = Vector3::new(
                if signs & 1 == 0 { 1.0 } else { -1.0 },
                if signs & 2 == 0 { 1.0 } else { -1.0 },
                if signs & 4 == 0 { 1.0 } else { -1.0 },
            );
            let m = p * Matrix3::from_diagonal(&s);
            if m.determinant() > 0.0 {
                out.push(m);
            }
        }
    }
    out
}

/// Rotation error in degrees taken modulo the 24 proper symmetries of the
/// direction axes.
///
/// Line observations determine each direction only up to sign and do not fix
/// which direction comes first, so estimated frames are compared against the
/// whole symmetry class of the ground truth.
pub fn aligned_rotation_error_deg(est: &ManhattanFrame, gt: &ManhattanFrame) -> f64 {
    let r_est = est.rotation();
    let r_gt = gt.rotation();
    frame_symmetries()
        .iter()
        .map(|s| rotation_error_deg(&(r_est * s), &r_gt))
        .fold(f64::INFINITY, f64::min)
}

/// Mean recall over `n_thresholds` regularly spaced thresholds
/// `t_k = k * max / n`, scaled by `max_threshold`, so a perfect estimator on
/// `max = 10` scores 10.
pub fn auc(errors: &[f64], max_threshold: f64, n_thresholds: usize) -> Result<f64, GeometryError> {
    if errors.is_empty() {
        return Err(GeometryError::EmptyInput);
    }
    assert!(n_thresholds >= 1 && max_threshold > 0.0);
    let n = errors.len() as f64;
    let mut acc = 0.0;
    for k in 1..=n_thresholds {
        let t = k as f64 * max_threshold / n_thresholds as f64;
        let recall = errors.iter().filter(|&&e| e <= t).count() as f64 / n;
        acc += recall;
    }
    Ok(acc / n_thresholds as f64 * max_threshold)
}
