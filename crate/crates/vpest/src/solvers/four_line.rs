//! The two 4-line minimal solvers that need no vertical prior.

use nalgebra::Vector3;

use super::gravity::{build_ortho_basis, frame_from_plane_rotation, recover_plane_rotation, IncidenceCoeffs};
use super::poly::quadratic_roots;
use super::{SolverError, SINGULARITY_TOL};
use crate::geometry::{Direction3, HomogeneousLine2, ManhattanFrame};

/// Default focal acceptance interval in pixels for [`solve_211`], wide
/// enough for typical cameras; callers with a known image size should prefer
/// 0.1 to 10 times the image diagonal.
pub const DEFAULT_FOCAL_BRACKET: (f64, f64) = (50.0, 20_000.0);

fn intersection(
    l1: &HomogeneousLine2,
    l2: &HomogeneousLine2,
) -> Result<Vector3<f64>, SolverError> {
    let cross = l1.coeffs().cross(&l2.coeffs());
    let norm = cross.norm();
    if norm < SINGULARITY_TOL * l1.coeffs().norm() * l2.coeffs().norm() {
        return Err(SolverError::ParallelLines);
    }
    Ok(cross / norm)
}

/// Two lines on each of two vanishing points.
///
/// Both vanishing points follow from cross products; the orthogonality of
/// the two calibrated directions is a single linear constraint on the
/// squared focal length.
pub fn solve_220(
    l1: &HomogeneousLine2,
    l2: &HomogeneousLine2,
    l3: &HomogeneousLine2,
    l4: &HomogeneousLine2,
) -> Result<Vec<ManhattanFrame>, SolverError> {
    let v1 = intersection(l1, l2)?;
    let v2 = intersection(l3, l4)?;
    let den = v1.z * v2.z;
    if den.abs() < SINGULARITY_TOL {
        return Err(SolverError::VpsAtInfinity);
    }
    let f_sq = -(v1.x * v2.x + v1.y * v2.y) / den;
    if !(f_sq.is_finite() && f_sq > 0.0) {
        return Err(SolverError::NegativeFocalSquared);
    }
    let focal = f_sq.sqrt();
    let d1 = Vector3::new(v1.x / focal, v1.y / focal, v1.z).normalize();
    let d2 = Vector3::new(v2.x / focal, v2.y / focal, v2.z).normalize();
    let d3 = d1.cross(&d2).normalize();
    let frame = ManhattanFrame::from_directions(
        Direction3::from_unit_unchecked(d1),
        Direction3::from_unit_unchecked(d2),
        Direction3::from_unit_unchecked(d3),
        focal,
    )
    .map_err(|_| SolverError::NegativeFocalSquared)?;
    Ok(vec![frame])
}

/// Two lines on the first vanishing point and one line on each of the other
/// two.
///
/// For a fixed focal length the first direction is the calibrated
/// intersection of the first line pair, `d1(f) ~ (v1_x, v1_y, f v1_z)`, and
/// the remaining directions span its orthogonal plane. Eliminating the
/// in-plane angle from the two incidence constraints leaves the
/// basis-independent scalar `(K l3)^T (I - d1 d1^T) (K l4)`; multiplying it
/// by `|d1|^2` makes it a quadratic polynomial in the squared focal length,
/// solved in closed form. Positive roots inside `bracket` are completed to
/// frames exactly as in the 1-1-0 configuration, with the first direction
/// playing the role of the vertical.
pub fn solve_211_with_bracket(
    l1: &HomogeneousLine2,
    l2: &HomogeneousLine2,
    l3: &HomogeneousLine2,
    l4: &HomogeneousLine2,
    bracket: (f64, f64),
) -> Result<Vec<ManhattanFrame>, SolverError> {
    assert!(bracket.0 > 0.0 && bracket.1 > bracket.0);
    let v1 = intersection(l1, l2)?;
    // (f^2 s + c3 c4)(p + f^2 q) - f^2 (l3.v1)(l4.v1) with s, p, q below.
    let s = l3.a() * l4.a() + l3.b() * l4.b();
    let p = v1.x * v1.x + v1.y * v1.y;
    let q = v1.z * v1.z;
    let cc = l3.c() * l4.c();
    let t3 = l3.coeffs().dot(&v1);
    let t4 = l4.coeffs().dot(&v1);
    let alpha = s * q;
    let beta = s * p + cc * q - t3 * t4;
    let gamma = cc * p;
    let roots_sq = quadratic_roots(alpha, beta, gamma);
    if roots_sq.is_empty() {
        return Err(SolverError::NoRealRoot);
    }
    let mut candidates: Vec<f64> = roots_sq
        .into_iter()
        .filter(|u| *u > 0.0)
        .map(f64::sqrt)
        .collect();
    if candidates.is_empty() {
        return Err(SolverError::NoPositiveFocal);
    }
    candidates.retain(|f| (bracket.0..=bracket.1).contains(f));
    if candidates.is_empty() {
        return Err(SolverError::NoRootInBracket);
    }

    let mut frames = Vec::new();
    for focal in candidates {
        let d1 = Direction3::from_unit_unchecked(
            Vector3::new(v1.x, v1.y, focal * v1.z).normalize(),
        );
        let basis = build_ortho_basis(&d1);
        let coeffs = IncidenceCoeffs::new(l3, l4, &basis);
        if let Some((cos_phi, sin_phi)) = recover_plane_rotation(focal, &coeffs) {
            if let Ok(frame) = frame_from_plane_rotation(&d1, &basis, cos_phi, sin_phi, focal) {
                frames.push(frame);
            }
        }
    }
    if frames.is_empty() {
        return Err(SolverError::NoRootInBracket);
    }
    Ok(frames)
}

/// [`solve_211_with_bracket`] over [`DEFAULT_FOCAL_BRACKET`].
pub fn solve_211(
    l1: &HomogeneousLine2,
    l2: &HomogeneousLine2,
    l3: &HomogeneousLine2,
    l4: &HomogeneousLine2,
) -> Result<Vec<ManhattanFrame>, SolverError> {
    solve_211_with_bracket(l1, l2, l3, l4, DEFAULT_FOCAL_BRACKET)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_220_rejects_identical_lines() {
        let l = HomogeneousLine2::from_coeffs(1.0, 2.0, 3.0).unwrap();
        let l3 = HomogeneousLine2::from_coeffs(0.5, -1.0, 10.0).unwrap();
        let l4 = HomogeneousLine2::from_coeffs(-1.0, 0.5, 8.0).unwrap();
        assert_eq!(solve_220(&l, &l, &l3, &l4), Err(SolverError::ParallelLines));
        assert_eq!(solve_211(&l, &l, &l3, &l4), Err(SolverError::ParallelLines));
    }

    #[test]
    fn solve_220_same_direction_pairs_fail() {
        // Four lines through a single vanishing point: both intersections
        // coincide, so the focal constraint has no positive solution.
        let vp = nalgebra::Vector3::new(120.0, -40.0, 1.0);
        let mk = |a: f64, b: f64| {
            HomogeneousLine2::from_coeffs(a, b, -(a * vp.x + b * vp.y)).unwrap()
        };
        let result = solve_220(&mk(1.0, 0.3), &mk(0.2, 1.0), &mk(1.0, -0.7), &mk(0.4, -1.0));
        assert!(matches!(
            result,
            Err(SolverError::NegativeFocalSquared) | Err(SolverError::VpsAtInfinity)
        ));
    }
}
