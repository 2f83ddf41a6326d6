//! Core projective-geometry types and operations shared by every module:
//! homogeneous lines, unit directions, Manhattan frames, the line/VP
//! consistency residual, and rotation utilities.

use nalgebra::{Matrix3, Vector2, Vector3};
use thiserror::Error;

mod metrics;
pub use metrics::{
    aligned_rotation_error_deg, auc, rotation_error_deg, vp_error_deg, EvalMetrics,
};

/// Errors raised by geometric constructors and operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("segment endpoints coincide")]
    DegenerateSegment,
    #[error("line coefficients have no direction component (a = b = 0)")]
    InvalidLine,
    #[error("vector has near-zero norm")]
    ZeroVector,
    #[error("matrix is not a rotation: {0}")]
    InvalidRotation(String),
    #[error("focal length must be positive, got {0}")]
    NonPositiveFocal(f64),
    #[error("input matrix is singular")]
    SingularInput,
    #[error("empty input")]
    EmptyInput,
}

/// A 2D line `ax + by + c = 0` in principal-point-centered pixel
/// coordinates, normalized so that `sqrt(a^2 + b^2) = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomogeneousLine2 {
    coeffs: Vector3<f64>,
}

impl HomogeneousLine2 {
    /// Builds a line from raw coefficients, normalizing the direction part
    /// to unit norm. The sign of the coefficients is preserved.
    pub fn from_coeffs(a: f64, b: f64, c: f64) -> Result<Self, GeometryError> {
        let dir_norm = a.hypot(b);
        if !dir_norm.is_finite() || dir_norm < 1e-15 {
            return Err(GeometryError::InvalidLine);
        }
        Ok(Self {
            coeffs: Vector3::new(a / dir_norm, b / dir_norm, c / dir_norm),
        })
    }

    /// The normalized coefficient vector `(a, b, c)`.
    pub fn coeffs(&self) -> Vector3<f64> {
        self.coeffs
    }

    pub fn a(&self) -> f64 {
        self.coeffs.x
    }

    pub fn b(&self) -> f64 {
        self.coeffs.y
    }

    pub fn c(&self) -> f64 {
        self.coeffs.z
    }
}

/// A line segment given by two endpoints in image coordinates (origin at the
/// top-left corner), with an optional positive weight such as its length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSegment {
    pub p: Vector2<f64>,
    pub q: Vector2<f64>,
    pub weight: Option<f64>,
}

impl LineSegment {
    pub fn new(p: Vector2<f64>, q: Vector2<f64>) -> Self {
        Self { p, q, weight: None }
    }

    /// Euclidean length of the segment in pixels.
    pub fn length(&self) -> f64 {
        (self.p - self.q).norm()
    }
}

/// A unit 3-vector. The norm is enforced at construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction3 {
    v: Vector3<f64>,
}

impl Direction3 {
    /// Normalizes `v` to unit norm. Fails on near-zero input.
    pub fn new(v: Vector3<f64>) -> Result<Self, GeometryError> {
        let n = v.norm();
        if !n.is_finite() || n < 1e-15 {
            return Err(GeometryError::ZeroVector);
        }
        Ok(Self { v: v / n })
    }

    /// Wraps a vector that is already unit norm (debug-checked).
    pub(crate) fn from_unit_unchecked(v: Vector3<f64>) -> Self {
        debug_assert!((v.norm() - 1.0).abs() < 1e-9);
        Self { v }
    }

    pub fn vector(&self) -> Vector3<f64> {
        self.v
    }

    pub fn x(&self) -> f64 {
        self.v.x
    }

    pub fn y(&self) -> f64 {
        self.v.y
    }

    pub fn z(&self) -> f64 {
        self.v.z
    }
}

/// Camera rotation plus focal length. The rotation columns are the three
/// orthogonal scene directions expressed in camera coordinates; the
/// vanishing points are `K * column_i` with `K = diag(f, f, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManhattanFrame {
    rotation: Matrix3<f64>,
    focal: f64,
}

/// Elementwise tolerance for the orthonormality and determinant checks.
pub const ROTATION_TOL: f64 = 1e-9;

impl ManhattanFrame {
    /// Validates the rotation (orthonormal within 1e-9, det +1) and the
    /// focal length (positive) before wrapping them.
    pub fn new(rotation: Matrix3<f64>, focal: f64) -> Result<Self, GeometryError> {
        if !(focal.is_finite() && focal > 0.0) {
            return Err(GeometryError::NonPositiveFocal(focal));
        }
        let gram = rotation.transpose() * rotation;
        let ortho_err = (gram - Matrix3::identity()).abs().max();
        if ortho_err > ROTATION_TOL {
            return Err(GeometryError::InvalidRotation(format!(
                "orthonormality residual {ortho_err:.3e}"
            )));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > ROTATION_TOL {
            return Err(GeometryError::InvalidRotation(format!("determinant {det}")));
        }
        Ok(Self { rotation, focal })
    }

    /// Wraps parts the caller guarantees to be valid (solver hot paths).
    pub(crate) fn from_parts_unchecked(rotation: Matrix3<f64>, focal: f64) -> Self {
        debug_assert!(
            Self::new(rotation, focal).is_ok(),
            "invalid frame: f={focal}, R={rotation}"
        );
        Self { rotation, focal }
    }

    /// Assembles a frame from three direction columns, flipping the third
    /// one if the assembled matrix has determinant -1.
    pub fn from_directions(
        d1: Direction3,
        d2: Direction3,
        d3: Direction3,
        focal: f64,
    ) -> Result<Self, GeometryError> {
        let mut r = Matrix3::from_columns(&[d1.vector(), d2.vector(), d3.vector()]);
        if r.determinant() < 0.0 {
            r.set_column(2, &(-d3.vector()));
        }
        Self::new(r, focal)
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        self.rotation
    }

    pub fn focal(&self) -> f64 {
        self.focal
    }

    /// The i-th scene direction in camera coordinates (column of R).
    pub fn direction(&self, i: usize) -> Direction3 {
        Direction3::from_unit_unchecked(self.rotation.column(i).into_owned())
    }

    /// The i-th vanishing point `K * column_i`, normalized to unit norm.
    pub fn vp(&self, i: usize) -> Vector3<f64> {
        let d = self.rotation.column(i);
        let v = Vector3::new(self.focal * d.x, self.focal * d.y, d.z);
        v / v.norm()
    }

    /// All three unit-norm vanishing points.
    pub fn vps(&self) -> [Vector3<f64>; 3] {
        [self.vp(0), self.vp(1), self.vp(2)]
    }
}

/// Vertical-direction observation in camera coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GravityObservation {
    pub direction: Option<Direction3>,
    pub quality: GravityQuality,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GravityQuality {
    /// Near-exact measurement, e.g. from an IMU.
    Exact,
    /// Rough prior, e.g. the upright-image assumption.
    Prior,
    /// No vertical information available.
    Absent,
}

impl GravityObservation {
    pub fn exact(direction: Direction3) -> Self {
        Self {
            direction: Some(direction),
            quality: GravityQuality::Exact,
        }
    }

    pub fn prior(direction: Direction3) -> Self {
        Self {
            direction: Some(direction),
            quality: GravityQuality::Prior,
        }
    }

    pub fn absent() -> Self {
        Self {
            direction: None,
            quality: GravityQuality::Absent,
        }
    }

    pub fn is_present(&self) -> bool {
        self.quality != GravityQuality::Absent && self.direction.is_some()
    }
}

/// Builds the homogeneous line through a segment's endpoints.
///
/// Endpoints are shifted so the image center becomes the origin, lifted to
/// homogeneous points with `w = 1`, and crossed; the result is normalized to
/// `sqrt(a^2 + b^2) = 1`.
pub fn line_from_segment(
    seg: &LineSegment,
    image_size: Vector2<f64>,
) -> Result<HomogeneousLine2, GeometryError> {
    if (seg.p - seg.q).norm() <= 1e-9 {
        return Err(GeometryError::DegenerateSegment);
    }
    let center = image_size / 2.0;
    let pa = seg.p - center;
    let pb = seg.q - center;
    let l = Vector3::new(pa.x, pa.y, 1.0).cross(&Vector3::new(pb.x, pb.y, 1.0));
    HomogeneousLine2::from_coeffs(l.x, l.y, l.z)
}

/// Algebraic consistency residual between a line and a vanishing point:
/// `|l^T v| / sqrt(a^2 + b^2)` with `v` normalized to unit Euclidean norm.
///
/// Zero iff the vanishing point lies on the line.
pub fn vp_line_distance(line: &HomogeneousLine2, vp: &Vector3<f64>) -> f64 {
    let l = line.coeffs();
    let dir_norm = l.x.hypot(l.y);
    (l.dot(vp) / vp.norm() / dir_norm).abs()
}

/// Nearest rotation matrix to `d` in the Frobenius norm (det +1).
///
/// Computed from the SVD `D = U S V^T` as `R = U V^T`, flipping the sign of
/// the last singular vector when that product is a reflection.
pub fn nearest_rotation(d: &Matrix3<f64>) -> Result<Matrix3<f64>, GeometryError> {
    if d.determinant().abs() <= 1e-12 {
        return Err(GeometryError::SingularInput);
    }
    let svd = d.svd(true, true);
    let mut u = svd.u.ok_or(GeometryError::SingularInput)?;
    let v_t = svd.v_t.ok_or(GeometryError::SingularInput)?;
    if (u * v_t).determinant() < 0.0 {
        // Singular values are sorted in decreasing order; flip the column
        // associated with the smallest one.
        let flipped = -u.column(2);
        u.set_column(2, &flipped);
    }
    Ok(u * v_t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Vector2;
    use proptest::prelude::*;

    fn rot_z(deg: f64) -> Matrix3<f64> {
        let r = deg.to_radians();
        Matrix3::new(r.cos(), -r.sin(), 0.0, r.sin(), r.cos(), 0.0, 0.0, 0.0, 1.0)
    }

    #[test]
    fn line_from_axis_aligned_segments() {
        let seg = LineSegment::new(Vector2::new(0.0, 0.0), Vector2::new(1.0, 0.0));
        let l = line_from_segment(&seg, Vector2::zeros()).unwrap();
        // cross([0,0,1],[1,0,1]) = (0,1,0): the line y = 0, up to sign.
        assert_relative_eq!(l.a().abs(), 0.0, epsilon = 1e-12);
        assert_relative_eq!(l.b().abs(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(l.c().abs(), 0.0, epsilon = 1e-12);

        let seg = LineSegment::new(Vector2::new(0.0, 0.0), Vector2::new(0.0, 1.0));
        let l = line_from_segment(&seg, Vector2::zeros()).unwrap();
        // The line x = 0, up to sign.
        assert_relative_eq!(l.a().abs(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(l.b().abs(), 0.0, epsilon = 1e-12);
        assert_relative_eq!(l.c().abs(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn coincident_endpoints_are_degenerate() {
        let seg = LineSegment::new(Vector2::new(5.0, 5.0), Vector2::new(5.0, 5.0));
        assert_eq!(
            line_from_segment(&seg, Vector2::zeros()),
            Err(GeometryError::DegenerateSegment)
        );
    }

    #[test]
    fn segment_centering_moves_origin_to_image_center() {
        // In a 100x80 image the segment through the center along x maps to y = 0.
        let seg = LineSegment::new(Vector2::new(0.0, 40.0), Vector2::new(100.0, 40.0));
        let l = line_from_segment(&seg, Vector2::new(100.0, 80.0)).unwrap();
        assert_relative_eq!(l.c().abs(), 0.0, epsilon = 1e-12);
        assert_relative_eq!(l.b().abs(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn vp_line_distance_examples() {
        let l = HomogeneousLine2::from_coeffs(0.0, 1.0, 0.0).unwrap();
        assert_relative_eq!(
            vp_line_distance(&l, &Vector3::new(1.0, 0.0, 0.0)),
            0.0,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            vp_line_distance(&l, &Vector3::new(0.0, 1.0, 0.0)),
            1.0,
            epsilon = 1e-15
        );
        // Line constructed through the VP by cross product.
        let v = Vector3::new(0.0, 2.0, 1.0) / 5.0f64.sqrt();
        let l = HomogeneousLine2::from_coeffs(2.0, 1.0, -2.0).unwrap();
        assert!(vp_line_distance(&l, &v) < 1e-12);
    }

    #[test]
    fn nearest_rotation_examples() {
        let r = nearest_rotation(&Matrix3::identity()).unwrap();
        assert_relative_eq!(r, Matrix3::identity(), epsilon = 1e-12);

        let rot = rot_z(33.0);
        let r = nearest_rotation(&(3.0 * rot)).unwrap();
        assert_relative_eq!(r, rot, epsilon = 1e-10);

        assert_eq!(
            nearest_rotation(&Matrix3::zeros()),
            Err(GeometryError::SingularInput)
        );
    }

    #[test]
    fn nearest_rotation_of_perturbed_rotation_is_orthonormal_and_close() {
        let rot = rot_z(21.0);
        let noise = Matrix3::new(0.3, -0.8, 0.1, 0.5, 0.2, -0.4, 0.9, 0.0, 0.6);
        let r = nearest_rotation(&(rot + 0.01 * noise)).unwrap();
        assert!((r.transpose() * r - Matrix3::identity()).abs().max() < 1e-12);
        assert_relative_eq!(r.determinant(), 1.0, epsilon = 1e-12);
        assert!((r - rot).norm() < 0.05);
    }

    #[test]
    fn frame_validation_rejects_bad_inputs() {
        assert!(ManhattanFrame::new(Matrix3::identity(), 0.0).is_err());
        assert!(ManhattanFrame::new(Matrix3::identity(), -3.0).is_err());
        assert!(ManhattanFrame::new(2.0 * Matrix3::identity(), 1.0).is_err());
        // Reflection: orthonormal but det -1.
        let refl = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(ManhattanFrame::new(refl, 1.0).is_err());
        assert!(ManhattanFrame::new(Matrix3::identity(), 500.0).is_ok());
    }

    #[test]
    fn from_directions_fixes_handedness() {
        let d1 = Direction3::new(Vector3::x()).unwrap();
        let d2 = Direction3::new(Vector3::y()).unwrap();
        let d3 = Direction3::new(-Vector3::z()).unwrap();
        let f = ManhattanFrame::from_directions(d1, d2, d3, 100.0).unwrap();
        assert_relative_eq!(f.rotation().determinant(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn frame_vps_are_unit_and_match_directions() {
        let f = ManhattanFrame::new(rot_z(17.0), 320.0).unwrap();
        for i in 0..3 {
            let v = f.vp(i);
            assert_relative_eq!(v.norm(), 1.0, epsilon = 1e-12);
            let d = f.direction(i).vector();
            let expect = Vector3::new(320.0 * d.x, 320.0 * d.y, d.z).normalize();
            assert_relative_eq!(v, expect, epsilon = 1e-12);
        }
    }

    proptest! {
        #[test]
        fn line_is_invariant_to_endpoint_order(
            px in -500.0..500.0f64, py in -500.0..500.0f64,
            qx in -500.0..500.0f64, qy in -500.0..500.0f64,
        ) {
            let p = Vector2::new(px, py);
            let q = Vector2::new(qx, qy);
            prop_assume!((p - q).norm() > 1e-6);
            let l1 = line_from_segment(&LineSegment::new(p, q), Vector2::zeros()).unwrap();
            let l2 = line_from_segment(&LineSegment::new(q, p), Vector2::zeros()).unwrap();
            let same = (l1.coeffs() - l2.coeffs()).norm() < 1e-9
                || (l1.coeffs() + l2.coeffs()).norm() < 1e-9;
            prop_assert!(same);
        }

        #[test]
        fn vp_line_distance_scale_and_sign_invariance(
            a in -10.0..10.0f64, b in -10.0..10.0f64, c in -100.0..100.0f64,
            s in 0.01..100.0f64,
            vx in -10.0..10.0f64, vy in -10.0..10.0f64, vz in -10.0..10.0f64,
        ) {
            prop_assume!(a.hypot(b) > 1e-6);
            let v = Vector3::new(vx, vy, vz);
            prop_assume!(v.norm() > 1e-6);
            let l1 = HomogeneousLine2::from_coeffs(a, b, c).unwrap();
            let l2 = HomogeneousLine2::from_coeffs(s * a, s * b, s * c).unwrap();
            let d1 = vp_line_distance(&l1, &v);
            prop_assert!((d1 - vp_line_distance(&l2, &v)).abs() < 1e-9 * (1.0 + d1));
            prop_assert!((d1 - vp_line_distance(&l1, &(-v))).abs() < 1e-12 * (1.0 + d1));
        }

        #[test]
        fn nearest_rotation_is_idempotent_on_rotations(angle in 0.0..360.0f64) {
            let rot = rot_z(angle);
            let r = nearest_rotation(&rot).unwrap();
            prop_assert!((r - rot).abs().max() < 1e-12);
        }
    }
}
