//! The three 2-line minimal solvers that exploit a known vertical direction.
//!
//! With the vertical fixed, two lines suffice to recover the remaining
//! rotation and the focal length. The three line configurations are: both
//! lines on one horizontal vanishing point, one vertical line plus one
//! horizontal line, and one line on each horizontal vanishing point.

use nalgebra::Vector3;

use super::poly::quadratic_roots;
use super::{SolverError, SINGULARITY_TOL};
use crate::geometry::{Direction3, HomogeneousLine2, ManhattanFrame};

/// Orthonormal basis of the plane orthogonal to the vertical direction.
#[derive(Debug, Clone, Copy)]
pub struct OrthoBasis {
    pub b1: Direction3,
    pub b2: Direction3,
}

/// Builds an orthonormal basis of the plane orthogonal to `g` from the
/// cross products `b1 = g x u`, `b2 = g x b1`, where `u` is the canonical
/// axis least aligned with `g`.
pub fn build_ortho_basis(g: &Direction3) -> OrthoBasis {
    let gv = g.vector();
    let axes = [Vector3::x(), Vector3::y(), Vector3::z()];
    let u = axes
        .iter()
        .min_by(|a, b| {
            let da = gv.dot(a).abs();
            let db = gv.dot(b).abs();
            da.partial_cmp(&db).unwrap()
        })
        .copied()
        .unwrap();
    let b1 = gv.cross(&u).normalize();
    let b2 = gv.cross(&b1).normalize();
    OrthoBasis {
        b1: Direction3::from_unit_unchecked(b1),
        b2: Direction3::from_unit_unchecked(b2),
    }
}

/// Two lines on the same horizontal vanishing point plus the vertical
/// direction.
///
/// The vanishing point is the cross product of the two lines; the focal
/// length follows from the orthogonality of the vertical and the calibrated
/// vanishing point. Fails when the lines are parallel or when the vertical
/// has no z component.
pub fn solve_200g(
    l1: &HomogeneousLine2,
    l2: &HomogeneousLine2,
    g: &Direction3,
) -> Result<Vec<ManhattanFrame>, SolverError> {
    let cross = l1.coeffs().cross(&l2.coeffs());
    let norm = cross.norm();
    if norm < SINGULARITY_TOL * l1.coeffs().norm() * l2.coeffs().norm() {
        return Err(SolverError::ParallelLines);
    }
    let v2 = cross / norm;
    if v2.z.abs() < SINGULARITY_TOL {
        return Err(SolverError::ParallelLines);
    }
    if g.z().abs() < SINGULARITY_TOL {
        return Err(SolverError::GravitySingularity);
    }
    let focal = -(g.x() * v2.x + g.y() * v2.y) / (g.z() * v2.z);
    if !(focal.is_finite() && focal > 0.0) {
        return Err(SolverError::NoPositiveFocal);
    }
    let d2 = Vector3::new(v2.x / focal, v2.y / focal, v2.z).normalize();
    let d3 = g.vector().cross(&d2).normalize();
    let frame = ManhattanFrame::from_directions(
        *g,
        Direction3::from_unit_unchecked(d2),
        Direction3::from_unit_unchecked(d3),
        focal,
    )
    .map_err(|_| SolverError::NoPositiveFocal)?;
    Ok(vec![frame])
}

/// One line on the vertical vanishing point and one on a horizontal one.
///
/// The vertical line pins the focal length directly; the horizontal
/// direction is then the cross product of the vertical with the calibrated
/// line normal.
pub fn solve_011g(
    l_vertical: &HomogeneousLine2,
    l_horizontal: &HomogeneousLine2,
    g: &Direction3,
) -> Result<Vec<ManhattanFrame>, SolverError> {
    let den = l_vertical.a() * g.x() + l_vertical.b() * g.y();
    if den.abs() < SINGULARITY_TOL {
        return Err(SolverError::DenominatorSingularity);
    }
    let focal = -(l_vertical.c() * g.z()) / den;
    if !(focal.is_finite() && focal > 0.0) {
        return Err(SolverError::NoPositiveFocal);
    }
    let kl = Vector3::new(
        focal * l_horizontal.a(),
        focal * l_horizontal.b(),
        l_horizontal.c(),
    );
    let d2_raw = g.vector().cross(&kl);
    let d2_norm = d2_raw.norm();
    if d2_norm < SINGULARITY_TOL * kl.norm() {
        return Err(SolverError::DenominatorSingularity);
    }
    let d2 = d2_raw / d2_norm;
    let d3 = g.vector().cross(&d2).normalize();
    let frame = ManhattanFrame::from_directions(
        *g,
        Direction3::from_unit_unchecked(d2),
        Direction3::from_unit_unchecked(d3),
        focal,
    )
    .map_err(|_| SolverError::NoPositiveFocal)?;
    Ok(vec![frame])
}

/// The bilinear coefficients of the two incidence constraints, obtained by
/// splitting each `l^T K b` product into its focal-dependent and constant
/// parts.
#[derive(Debug, Clone, Copy)]
pub(crate) struct IncidenceCoeffs {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub d4: f64,
    pub d5: f64,
    pub d6: f64,
    pub d7: f64,
    pub d8: f64,
}

impl IncidenceCoeffs {
    pub fn new(l1: &HomogeneousLine2, l2: &HomogeneousLine2, basis: &OrthoBasis) -> Self {
        let b1 = basis.b1.vector();
        let b2 = basis.b2.vector();
        Self {
            d1: l1.a() * b1.x + l1.b() * b1.y,
            d2: l1.c() * b1.z,
            d3: l1.a() * b2.x + l1.b() * b2.y,
            d4: l1.c() * b2.z,
            d5: l2.a() * b2.x + l2.b() * b2.y,
            d6: l2.c() * b2.z,
            d7: l2.a() * b1.x + l2.b() * b1.y,
            d8: l2.c() * b1.z,
        }
    }
}

/// Maximum normalized residual accepted when matching the common root of the
/// two half-angle quadratics.
const COMMON_ROOT_TOL: f64 = 1e-6;

/// Recovers the in-plane rotation half-angle parameter `t` for a fixed focal
/// length: the common root of the two quadratic incidence constraints.
/// Returns `(cos, sin)` of the rotation angle.
pub(crate) fn recover_plane_rotation(focal: f64, c: &IncidenceCoeffs) -> Option<(f64, f64)> {
    // (1 - t^2)(f d1 + d2) - 2t(f d3 + d4) = 0
    // (1 - t^2)(f d5 + d6) + 2t(f d7 + d8) = 0
    let p = [
        -(focal * c.d1 + c.d2),
        -2.0 * (focal * c.d3 + c.d4),
        focal * c.d1 + c.d2,
    ];
    let q = [
        -(focal * c.d5 + c.d6),
        2.0 * (focal * c.d7 + c.d8),
        focal * c.d5 + c.d6,
    ];
    let p_scale = p.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let q_scale = q.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if p_scale == 0.0 || q_scale == 0.0 {
        return None;
    }
    let pn: Vec<f64> = p.iter().map(|v| v / p_scale).collect();
    let qn: Vec<f64> = q.iter().map(|v| v / q_scale).collect();
    let mut candidates = quadratic_roots(p[0], p[1], p[2]);
    candidates.extend(quadratic_roots(q[0], q[1], q[2]));
    let mut best: Option<(f64, f64)> = None;
    for t in candidates {
        let r = super::poly::eval_poly(&pn, t)
            .abs()
            .max(super::poly::eval_poly(&qn, t).abs());
        if best.map_or(true, |(_, rb)| r < rb) {
            best = Some((t, r));
        }
    }
    let (t, residual) = best?;
    if residual > COMMON_ROOT_TOL {
        return None;
    }
    let denom = 1.0 + t * t;
    Some(((1.0 - t * t) / denom, 2.0 * t / denom))
}

/// Assembles the frame from the vertical, the in-plane basis, and the
/// recovered rotation angle.
pub(crate) fn frame_from_plane_rotation(
    vertical: &Direction3,
    basis: &OrthoBasis,
    cos_phi: f64,
    sin_phi: f64,
    focal: f64,
) -> Result<ManhattanFrame, SolverError> {
    let b1 = basis.b1.vector();
    let b2 = basis.b2.vector();
    let d2 = (cos_phi * b1 - sin_phi * b2).normalize();
    let d3 = (sin_phi * b1 + cos_phi * b2).normalize();
    ManhattanFrame::from_directions(
        *vertical,
        Direction3::from_unit_unchecked(d2),
        Direction3::from_unit_unchecked(d3),
        focal,
    )
    .map_err(|_| SolverError::NoPositiveFocal)
}

/// One line on each horizontal vanishing point plus the vertical direction.
///
/// The two horizontal directions are a rotation of an orthonormal basis of
/// the horizontal plane by an unknown angle. Replacing the trigonometric
/// functions with the half-angle parameter `t` turns the two incidence
/// constraints into polynomials; eliminating `t` leaves a quadratic in the
/// focal length. Up to two frames are returned. This is the only
/// gravity-based configuration with no singularity for verticals without a
/// z component.
pub fn solve_110g(
    l1: &HomogeneousLine2,
    l2: &HomogeneousLine2,
    g: &Direction3,
) -> Result<Vec<ManhattanFrame>, SolverError> {
    let basis = build_ortho_basis(g);
    let c = IncidenceCoeffs::new(l1, l2, &basis);
    // (f d1 + d2)(f d7 + d8) + (f d3 + d4)(f d5 + d6) = 0
    let a2 = c.d1 * c.d7 + c.d3 * c.d5;
    let a1 = c.d1 * c.d8 + c.d2 * c.d7 + c.d3 * c.d6 + c.d4 * c.d5;
    let a0 = c.d2 * c.d8 + c.d4 * c.d6;
    let roots = quadratic_roots(a2, a1, a0);
    if roots.is_empty() {
        return Err(SolverError::NoRealRoot);
    }
    let positive: Vec<f64> = roots.into_iter().filter(|f| *f > 0.0).collect();
    if positive.is_empty() {
        return Err(SolverError::NoPositiveFocal);
    }
    let mut frames = Vec::with_capacity(2);
    for focal in positive {
        if let Some((cos_phi, sin_phi)) = recover_plane_rotation(focal, &c) {
            frames.push(frame_from_plane_rotation(g, &basis, cos_phi, sin_phi, focal)?);
        }
    }
    if frames.is_empty() {
        return Err(SolverError::NoCommonRoot);
    }
    Ok(frames)
}

/// Same configuration as [`solve_110g`] with the elimination order reversed:
/// the focal length is expressed from the first constraint and substituted
/// into the second, leaving a univariate quartic in the half-angle parameter.
/// Kept as a cross-check of the quadratic route.
pub fn solve_110g_quartic(
    l1: &HomogeneousLine2,
    l2: &HomogeneousLine2,
    g: &Direction3,
) -> Result<Vec<ManhattanFrame>, SolverError> {
    let basis = build_ortho_basis(g);
    let c = IncidenceCoeffs::new(l1, l2, &basis);
    let ka = c.d4 * c.d7 - c.d3 * c.d8;
    let kb = c.d4 * c.d5 + c.d1 * c.d8 - c.d3 * c.d6 - c.d2 * c.d7;
    let kc = c.d1 * c.d6 - c.d2 * c.d5;
    // 4 ka t^2 + 2 kb t (1 - t^2) + kc (1 - t^2)^2 = 0, expanded in t.
    let coeffs = [kc, -2.0 * kb, 4.0 * ka - 2.0 * kc, 2.0 * kb, kc];
    let scale = coeffs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale < 1e-300 {
        return Err(SolverError::NoRealRoot);
    }
    let roots = super::poly::real_roots(&coeffs);
    if roots.is_empty() {
        return Err(SolverError::NoRealRoot);
    }
    let mut frames = Vec::new();
    let mut saw_positive = false;
    for t in roots {
        let omt = 1.0 - t * t;
        let den1 = omt * c.d1 - 2.0 * t * c.d3;
        let den2 = omt * c.d5 + 2.0 * t * c.d7;
        let focal = if den1.abs() >= den2.abs() {
            (2.0 * t * c.d4 - omt * c.d2) / den1
        } else {
            -(omt * c.d6 + 2.0 * t * c.d8) / den2
        };
        if !(focal.is_finite() && focal > 0.0) {
            continue;
        }
        saw_positive = true;
        // Guard against extraneous roots of the eliminant.
        if let Some((cos_phi, sin_phi)) = recover_plane_rotation(focal, &c) {
            frames.push(frame_from_plane_rotation(g, &basis, cos_phi, sin_phi, focal)?);
        }
    }
    if frames.is_empty() {
        return Err(if saw_positive {
            SolverError::NoCommonRoot
        } else {
            SolverError::NoPositiveFocal
        });
    }
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Vector3;

    #[test]
    fn ortho_basis_invariants_hold() {
        let g = Direction3::new(Vector3::new(0.0, 0.0, 1.0)).unwrap();
        let b = build_ortho_basis(&g);
        assert!(b.b1.z().abs() < 1e-12 && b.b2.z().abs() < 1e-12);

        for v in [
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.999, 0.03, 0.01),
            Vector3::new(-0.4, 0.7, 0.2),
        ] {
            let g = Direction3::new(v).unwrap();
            let b = build_ortho_basis(&g);
            assert!(b.b1.vector().dot(&g.vector()).abs() < 1e-10);
            assert!(b.b2.vector().dot(&g.vector()).abs() < 1e-10);
            assert!(b.b1.vector().dot(&b.b2.vector()).abs() < 1e-10);
            assert_relative_eq!(b.b1.vector().norm(), 1.0, epsilon = 1e-12);
            assert_relative_eq!(b.b2.vector().norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn ortho_basis_axis_choice_avoids_degeneracy() {
        use rand::Rng;
        use rand::SeedableRng;
        // The least-aligned canonical axis keeps |g x u| = sin(angle) well
        // away from zero: the worst case is sqrt(1 - 1/3) ~ 0.816.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let v = Vector3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            if v.norm() < 1e-3 {
                continue;
            }
            let g = Direction3::new(v).unwrap();
            let gv = g.vector();
            let axes = [Vector3::x(), Vector3::y(), Vector3::z()];
            let u = axes
                .iter()
                .min_by(|a, b| {
                    gv.dot(a).abs().partial_cmp(&gv.dot(b).abs()).unwrap()
                })
                .unwrap();
            assert!(gv.cross(u).norm() > 0.5);
        }
        // Near-axis verticals in particular stay non-degenerate.
        let g = Direction3::new(Vector3::new(0.9999, 0.01, 0.005)).unwrap();
        let b = build_ortho_basis(&g);
        assert!(b.b1.vector().norm() > 0.5);
    }

    #[test]
    fn solve_200g_rejects_identical_lines() {
        let l = HomogeneousLine2::from_coeffs(1.0, 2.0, 3.0).unwrap();
        let g = Direction3::new(Vector3::new(0.1, -0.9, 0.4)).unwrap();
        assert_eq!(solve_200g(&l, &l, &g), Err(SolverError::ParallelLines));
    }

    #[test]
    fn solve_200g_gravity_singularity() {
        // A vertical with no z component makes the focal denominator vanish.
        let l1 = HomogeneousLine2::from_coeffs(1.0, 0.2, 30.0).unwrap();
        let l2 = HomogeneousLine2::from_coeffs(0.3, 1.0, -40.0).unwrap();
        let g = Direction3::new(Vector3::new(0.0, -1.0, 0.0)).unwrap();
        assert_eq!(solve_200g(&l1, &l2, &g), Err(SolverError::GravitySingularity));
    }

    #[test]
    fn solve_011g_recovers_constructed_focal() {
        // l_vertical passes through v1 = K g with f = 2:
        // v1 = (0, 2/sqrt(2), 1/sqrt(2)) and (2, 1, -2) . v1 = 0.
        let s = 1.0 / 2.0f64.sqrt();
        let g = Direction3::new(Vector3::new(0.0, s, s)).unwrap();
        let l_vertical = HomogeneousLine2::from_coeffs(2.0, 1.0, -2.0).unwrap();
        let l_horizontal = HomogeneousLine2::from_coeffs(0.3, -0.8, 5.0).unwrap();
        let frames = solve_011g(&l_vertical, &l_horizontal, &g).unwrap();
        assert_eq!(frames.len(), 1);
        assert_relative_eq!(frames[0].focal(), 2.0, epsilon = 1e-12);
        // First column is the supplied vertical.
        assert_relative_eq!(
            frames[0].rotation().column(0).into_owned(),
            g.vector(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn solve_011g_denominator_singularity() {
        // Line direction orthogonal to the vertical's xy part.
        let g = Direction3::new(Vector3::new(1.0, 0.0, 0.0)).unwrap();
        let l_vertical = HomogeneousLine2::from_coeffs(0.0, 1.0, 3.0).unwrap();
        let l_horizontal = HomogeneousLine2::from_coeffs(1.0, 1.0, 1.0).unwrap();
        assert_eq!(
            solve_011g(&l_vertical, &l_horizontal, &g),
            Err(SolverError::DenominatorSingularity)
        );
    }
}
