//! Manhattan frame estimation from 2D line segments.
//!
//! This crate estimates three orthogonal vanishing points, the camera
//! rotation, and an unknown focal length from line segments in a single
//! uncalibrated image, optionally exploiting a known or approximate gravity
//! direction. It provides:
//!
//! * five minimal solvers (two 4-line solvers without prior, three 2-line
//!   solvers using the vertical direction),
//! * a non-minimal solver and nonlinear refinement used for local
//!   optimization,
//! * a hybrid locally-optimized RANSAC combining all solvers,
//! * a synthetic benchmark harness (stability, noise, and runtime studies).
//!
//! All geometry is expressed in principal-point-centered pixel coordinates
//! with the intrinsic matrix `K = diag(f, f, 1)`; the scene loaders convert
//! from image coordinates on ingest.

pub mod geometry;
pub mod nonminimal;
pub mod robust;
pub mod scene;
pub mod solvers;
pub mod synthetic;

pub use geometry::{
    auc, line_from_segment, nearest_rotation, rotation_error_deg, vp_error_deg, vp_line_distance,
    Direction3, EvalMetrics, GravityObservation, GravityQuality, HomogeneousLine2, LineSegment,
    ManhattanFrame,
};
pub use robust::{hybrid_ransac, ransac, LoMode, RansacConfig, RobustEstimate};
pub use solvers::SolverId;
