//! Larger-than-minimal estimation used by local optimization: per-VP least
//! squares refits, focal recovery from three vanishing points, SVD
//! orthogonalization, the assembled non-minimal solver, its linearized
//! variant, and damped nonlinear refinement.

use std::num::NonZeroUsize;

use nalgebra::{DMatrix, DVector, Matrix3, Rotation3, Vector3};
use thiserror::Error;

use crate::geometry::{nearest_rotation, vp_line_distance, HomogeneousLine2, ManhattanFrame};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NonMinimalError {
    #[error("at least two lines are required per vanishing point")]
    InsufficientLines,
    #[error("all lines in the bundle are identical up to scale")]
    DegenerateBundle,
    #[error("focal constraints are rank deficient")]
    RankDeficient,
    #[error("least-squares focal length squared is not positive")]
    NonPositiveFocalSquared,
    #[error("direction matrix is singular")]
    SingularInput,
}

/// Lines assigned to the three vanishing points.
#[derive(Debug, Clone, Default)]
pub struct InlierPartition {
    pub sets: [Vec<HomogeneousLine2>; 3],
}

impl InlierPartition {
    pub fn new(sets: [Vec<HomogeneousLine2>; 3]) -> Self {
        Self { sets }
    }

    pub fn counts(&self) -> [usize; 3] {
        [self.sets[0].len(), self.sets[1].len(), self.sets[2].len()]
    }

    pub fn total(&self) -> usize {
        self.counts().iter().sum()
    }

    /// Sum of squared line/VP residuals of a frame over the partition.
    pub fn cost(&self, frame: &ManhattanFrame) -> f64 {
        let vps = frame.vps();
        let mut acc = 0.0;
        for (i, set) in self.sets.iter().enumerate() {
            for line in set {
                let d = vp_line_distance(line, &vps[i]);
                acc += d * d;
            }
        }
        acc
    }
}

/// Least-squares vanishing point of a line bundle: the unit vector
/// minimizing the sum of squared line/VP residuals, obtained from the right
/// null space of the stacked line matrix.
pub fn refit_vp_lsq(lines: &[HomogeneousLine2]) -> Result<Vector3<f64>, NonMinimalError> {
    if lines.len() < 2 {
        return Err(NonMinimalError::InsufficientLines);
    }
    let rows = lines.len().max(3);
    let mut m = DMatrix::<f64>::zeros(rows, 3);
    for (j, line) in lines.iter().enumerate() {
        let l = line.coeffs();
        m[(j, 0)] = l.x;
        m[(j, 1)] = l.y;
        m[(j, 2)] = l.z;
    }
    let svd = m.svd(false, true);
    let v_t = svd.v_t.as_ref().ok_or(NonMinimalError::SingularInput)?;
    // Singular values are sorted in decreasing order; a vanishing second one
    // means every line is the same up to scale.
    if svd.singular_values[1] <= 1e-12 * svd.singular_values[0] {
        return Err(NonMinimalError::DegenerateBundle);
    }
    let v = v_t.row(2).transpose();
    Ok(Vector3::new(v[0], v[1], v[2]).normalize())
}

/// Least-squares focal length from the three pairwise orthogonality
/// constraints between calibrated vanishing points, each linear in the
/// squared focal length. The points are normalized to unit norm first so the
/// result does not depend on their homogeneous scales.
pub fn focal_from_vps(
    v1: &Vector3<f64>,
    v2: &Vector3<f64>,
    v3: &Vector3<f64>,
) -> Result<f64, NonMinimalError> {
    let vs = [v1.normalize(), v2.normalize(), v3.normalize()];
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let a = -vs[i].z * vs[j].z;
        let b = vs[i].x * vs[j].x + vs[i].y * vs[j].y;
        num += a * b;
        den += a * a;
    }
    if den < 1e-24 {
        return Err(NonMinimalError::RankDeficient);
    }
    let f_sq = num / den;
    if f_sq <= 0.0 {
        return Err(NonMinimalError::NonPositiveFocalSquared);
    }
    Ok(f_sq.sqrt())
}

/// Calibrates the vanishing points and orthogonalizes the direction matrix.
///
/// The signs of the directions must form a right-handed triple before the
/// nearest-rotation projection: orthogonalizing a reflection is
/// ill-conditioned and lands far from every member of the frame's symmetry
/// class. When the determinant is negative the direction listed in
/// `flip_order` first is negated.
fn assemble_frame(
    vps: [Vector3<f64>; 3],
    focal: f64,
    flip_order: [usize; 3],
) -> Result<ManhattanFrame, NonMinimalError> {
    let mut d = Matrix3::zeros();
    for (i, v) in vps.iter().enumerate() {
        let dir = Vector3::new(v.x / focal, v.y / focal, v.z).normalize();
        d.set_column(i, &dir);
    }
    if d.determinant() < 0.0 {
        let k = flip_order[0];
        let flipped = -d.column(k);
        d.set_column(k, &flipped);
    }
    let r = nearest_rotation(&d).map_err(|_| NonMinimalError::SingularInput)?;
    ManhattanFrame::new(r, focal).map_err(|_| NonMinimalError::SingularInput)
}

/// Refits each vanishing point from its inliers, recovers the focal length,
/// and orthogonalizes the calibrated directions.
///
/// Returns `fallback` unchanged whenever any step degenerates, so callers in
/// the robust loop never lose their current model. The refit vanishing
/// points keep the sign of the fallback's, which ties the output to the same
/// member of the axis-symmetry class as the model being refined.
pub fn nonminimal_solve(part: &InlierPartition, fallback: &ManhattanFrame) -> ManhattanFrame {
    if part.counts().iter().any(|&n| n < 2) {
        return *fallback;
    }
    let mut vps = [Vector3::zeros(); 3];
    let mut confidence = [0.0f64; 3];
    for i in 0..3 {
        match refit_vp_lsq(&part.sets[i]) {
            Ok(v) => {
                let dot = v.dot(&fallback.vp(i));
                vps[i] = if dot < 0.0 { -v } else { v };
                confidence[i] = dot.abs();
            }
            Err(_) => return *fallback,
        }
    }
    let focal = match focal_from_vps(&vps[0], &vps[1], &vps[2]) {
        Ok(f) => f,
        Err(_) => return *fallback,
    };
    // A handedness mismatch means the least fallback-aligned sign was wrong.
    let mut flip_order = [0usize, 1, 2];
    flip_order.sort_by(|&a, &b| confidence[a].partial_cmp(&confidence[b]).unwrap());
    match assemble_frame(vps, focal, flip_order) {
        Ok(frame) => frame,
        Err(_) => *fallback,
    }
}

/// First-order update matrices of the vanishing points with respect to the
/// rotation tangent and the focal increment, around `(f0, R0)`.
fn linearized_vp_model(f0: f64, r0: &Matrix3<f64>, i: usize) -> (nalgebra::Matrix3x4<f64>, Vector3<f64>) {
    let r1 = r0[(0, i)];
    let r2 = r0[(1, i)];
    let r3 = r0[(2, i)];
    let b = nalgebra::Matrix3x4::new(
        0.0, -f0 * r3, f0 * r2, r1, //
        f0 * r3, 0.0, -f0 * r1, r2, //
        -r2, r1, 0.0, 0.0,
    );
    let c = Vector3::new(f0 * r1, f0 * r2, r3);
    (b, c)
}

/// Iterative non-minimal refinement that linearizes `K R` around the current
/// estimate, solves for the joint vanishing-point/focal update by least
/// squares, and re-orthogonalizes through the focal recovery and nearest
/// rotation steps. Returns the best iterate by residual cost.
pub fn nonminimal_linearized(
    part: &InlierPartition,
    init: &ManhattanFrame,
    iters: NonZeroUsize,
) -> ManhattanFrame {
    let total = part.total();
    if total == 0 {
        return *init;
    }
    // Stacked block-diagonal line matrix; rows select the VP of their block.
    let mut a = DMatrix::<f64>::zeros(total, 9);
    let mut row = 0;
    for (i, set) in part.sets.iter().enumerate() {
        for line in set {
            let l = line.coeffs();
            a[(row, 3 * i)] = l.x;
            a[(row, 3 * i + 1)] = l.y;
            a[(row, 3 * i + 2)] = l.z;
            row += 1;
        }
    }

    let mut best = *init;
    let mut best_cost = part.cost(init);
    let mut current = *init;
    for _ in 0..iters.get() {
        let f0 = current.focal();
        let r0 = current.rotation();
        let mut b = DMatrix::<f64>::zeros(9, 4);
        let mut c = DVector::<f64>::zeros(9);
        for i in 0..3 {
            let (bi, ci) = linearized_vp_model(f0, &r0, i);
            for r in 0..3 {
                for col in 0..4 {
                    b[(3 * i + r, col)] = bi[(r, col)];
                }
                c[3 * i + r] = ci[r];
            }
        }
        let ab = &a * &b;
        let ac = &a * &c;
        let svd = ab.svd(true, true);
        let delta = match svd.solve(&(-&ac), 1e-12) {
            Ok(d) => d,
            Err(_) => break,
        };
        let mut vps = [Vector3::zeros(); 3];
        for i in 0..3 {
            let (bi, ci) = linearized_vp_model(f0, &r0, i);
            let dv = bi * nalgebra::Vector4::new(delta[0], delta[1], delta[2], delta[3]);
            vps[i] = ci + dv;
        }
        let focal = match focal_from_vps(&vps[0], &vps[1], &vps[2]) {
            Ok(f) => f,
            Err(_) => break,
        };
        // The update stays near the current estimate, so handedness flips
        // should not trigger; the order is a tie-breaking default.
        let frame = match assemble_frame(vps, focal, [2, 1, 0]) {
            Ok(fr) => fr,
            Err(_) => break,
        };
        let cost = part.cost(&frame);
        if cost < best_cost {
            best_cost = cost;
            best = frame;
        }
        current = frame;
    }
    best
}

/// Signed residuals of a frame over a partition, in partition order. The
/// squared norm of this vector is the refinement cost.
pub fn refine_residuals(frame: &ManhattanFrame, part: &InlierPartition) -> DVector<f64> {
    let vps = frame.vps();
    let mut r = DVector::zeros(part.total());
    let mut row = 0;
    for (i, set) in part.sets.iter().enumerate() {
        for line in set {
            r[row] = line.coeffs().dot(&vps[i]);
            row += 1;
        }
    }
    r
}

/// Residuals after moving `frame` along the local chart: three rotation
/// tangent coordinates (right-multiplied axis-angle) and one log-focal
/// increment. Used by the finite-difference checks of the Jacobian.
pub fn refine_residuals_at(
    frame: &ManhattanFrame,
    part: &InlierPartition,
    delta: &[f64; 4],
) -> DVector<f64> {
    let moved = apply_step(frame, delta).expect("finite chart step");
    refine_residuals(&moved, part)
}

fn apply_step(frame: &ManhattanFrame, delta: &[f64; 4]) -> Option<ManhattanFrame> {
    if delta.iter().any(|d| !d.is_finite()) {
        return None;
    }
    let w = Vector3::new(delta[0], delta[1], delta[2]);
    let r = frame.rotation() * Rotation3::new(w).into_inner();
    let f = frame.focal() * delta[3].exp();
    if !(f.is_finite() && f > 0.0) {
        return None;
    }
    Some(ManhattanFrame::from_parts_unchecked(r, f))
}

/// Residuals and their analytic Jacobian with respect to the local chart of
/// [`refine_residuals_at`], evaluated at the chart origin.
pub fn refine_jacobian(
    frame: &ManhattanFrame,
    part: &InlierPartition,
) -> (DVector<f64>, DMatrix<f64>) {
    let r0 = frame.rotation();
    let f = frame.focal();
    let total = part.total();
    let mut res = DVector::zeros(total);
    let mut jac = DMatrix::zeros(total, 4);

    let basis = [Vector3::x(), Vector3::y(), Vector3::z()];
    let mut row = 0;
    for (i, set) in part.sets.iter().enumerate() {
        let e_i = basis[i];
        let d_i = r0.column(i).into_owned();
        let v = Vector3::new(f * d_i.x, f * d_i.y, d_i.z);
        let norm = v.norm();
        let v_hat = v / norm;
        // d v_hat / d v = (I - v_hat v_hat^T) / |v|
        let proj = (Matrix3::identity() - v_hat * v_hat.transpose()) / norm;
        // Columns of dv/d(chart): rotation tangent then log-focal.
        let mut dv = nalgebra::Matrix3x4::<f64>::zeros();
        for k in 0..3 {
            let dr = r0 * basis[k].cross(&e_i);
            let col = Vector3::new(f * dr.x, f * dr.y, dr.z);
            dv.set_column(k, &col);
        }
        dv.set_column(3, &Vector3::new(f * d_i.x, f * d_i.y, 0.0));
        let sens = proj * dv;
        for line in set {
            let l = line.coeffs();
            res[row] = l.dot(&v_hat);
            for col in 0..4 {
                jac[(row, col)] = l.dot(&sens.column(col).into_owned());
            }
            row += 1;
        }
    }
    (res, jac)
}

/// Levenberg-Marquardt schedule constants.
const LM_INITIAL_DAMPING: f64 = 1e-3;
const LM_DAMPING_UP: f64 = 10.0;
const LM_DAMPING_DOWN: f64 = 0.1;
const LM_MAX_DAMPING: f64 = 1e12;
const LM_REL_DECREASE: f64 = 1e-10;

/// Default iteration budget of [`refine_ls`].
pub const REFINE_DEFAULT_MAX_ITERS: usize = 50;

/// Damped nonlinear least squares over rotation and log-focal length,
/// minimizing the sum of squared line/VP residuals of the partition.
///
/// The cost never increases across accepted steps; the best iterate is
/// returned if the schedule stalls.
pub fn refine_ls(
    frame: &ManhattanFrame,
    part: &InlierPartition,
    max_iters: usize,
) -> ManhattanFrame {
    if part.total() == 0 {
        return *frame;
    }
    let mut current = *frame;
    let mut cost = refine_residuals(&current, part).norm_squared();
    let mut damping = LM_INITIAL_DAMPING;
    for _ in 0..max_iters {
        let (res, jac) = refine_jacobian(&current, part);
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * &res;
        let mut accepted = false;
        while damping <= LM_MAX_DAMPING {
            let mut lhs = jtj.clone();
            for k in 0..4 {
                lhs[(k, k)] += damping * jtj[(k, k)].max(1e-12);
            }
            let Some(chol) = nalgebra::Cholesky::new(lhs) else {
                damping *= LM_DAMPING_UP;
                continue;
            };
            let step = chol.solve(&(-&grad));
            let delta = [step[0], step[1], step[2], step[3]];
            let Some(candidate) = apply_step(&current, &delta) else {
                damping *= LM_DAMPING_UP;
                continue;
            };
            let new_cost = refine_residuals(&candidate, part).norm_squared();
            if new_cost < cost {
                let rel = (cost - new_cost) / cost.max(1e-300);
                current = candidate;
                cost = new_cost;
                let was_confident = damping <= LM_INITIAL_DAMPING;
                damping = (damping * LM_DAMPING_DOWN).max(1e-12);
                accepted = true;
                // A vanishing relative decrease only signals convergence
                // when the step was an (almost) undamped Gauss-Newton one;
                // heavily damped steps are small regardless of optimality.
                if rel < LM_REL_DECREASE && was_confident {
                    return current;
                }
                break;
            }
            damping *= LM_DAMPING_UP;
        }
        if !accepted {
            break;
        }
    }
    current
}
