//! Synthetic ground-truth instance generation and noise models.
//!
//! Instances are built by drawing a random rotation and focal length,
//! sampling 3D segments along the scene directions, projecting their
//! endpoints, and optionally perturbing endpoints, gravity, and the assumed
//! principal point. These instances are the oracle for the solver and
//! estimator tests and for the benchmark studies.

use nalgebra::{Matrix3, Rotation3, Unit, UnitQuaternion, Vector2, Vector3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::geometry::{
    line_from_segment, Direction3, HomogeneousLine2, LineSegment, ManhattanFrame,
};
use crate::solvers::{MinimalSample, SolverId};

mod studies;
pub use studies::{
    default_noise_grid, principal_point_grid, run_noise_study, run_runtime_study,
    run_stability_study, NoiseCell, NoiseRow, RuntimeRow, StabilitySample, StabilityStudy,
    StabilitySummary,
};

/// Bounded retries for rejected degenerate draws.
const MAX_DRAW_RETRIES: usize = 100;

/// Minimum forward depth accepted for segment endpoints.
const MIN_DEPTH: f64 = 0.5;

/// Minimum projected segment length in pixels.
const MIN_SEGMENT_PX: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SyntheticError {
    #[error("could not draw a non-degenerate instance within {MAX_DRAW_RETRIES} retries")]
    DegenerateDraw,
}

/// Parameters of the synthetic generator.
#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    /// Uniform range of the ground-truth focal length in pixels.
    pub focal_range: (f64, f64),
    /// Mean of the Gaussian from which 3D segment anchors are drawn.
    pub line_anchor_mean: Vector3<f64>,
    pub anchor_std: f64,
    /// Standard deviation of the signed segment extent along its direction.
    pub lambda_std: f64,
    pub lines_per_direction: usize,
    /// Endpoint noise per pixel coordinate.
    pub sigma_image_px: f64,
    /// Angular gravity noise in degrees.
    pub sigma_gravity_deg: f64,
    /// Principal-point offset noise in pixels (one offset per instance).
    pub sigma_pp_px: f64,
    /// Fraction of the total line count made of random outlier segments.
    pub outlier_fraction: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            focal_range: (100.0, 2000.0),
            line_anchor_mean: Vector3::new(0.0, 0.0, 5.0),
            anchor_std: 1.0,
            lambda_std: 1.0,
            lines_per_direction: 20,
            sigma_image_px: 0.0,
            sigma_gravity_deg: 0.0,
            sigma_pp_px: 0.0,
            outlier_fraction: 0.0,
            seed: 0,
        }
    }
}

/// A segment labeled with its generating direction, or `None` for outliers.
#[derive(Debug, Clone, Copy)]
pub struct LabeledSegment {
    pub segment: LineSegment,
    pub label: Option<usize>,
}

/// A generated scene with its ground truth.
///
/// Segments are expressed directly in principal-point-centered coordinates
/// (equivalently: image coordinates of a zero-sized image).
#[derive(Debug, Clone)]
pub struct SyntheticInstance {
    pub gt_frame: ManhattanFrame,
    pub gravity_gt: Direction3,
    pub gravity_noisy: Direction3,
    pub segments: Vec<LabeledSegment>,
}

impl SyntheticInstance {
    /// Homogeneous lines of all segments, in segment order.
    pub fn lines(&self) -> Vec<HomogeneousLine2> {
        self.segments
            .iter()
            .map(|s| line_from_segment(&s.segment, Vector2::zeros()).expect("generated segment"))
            .collect()
    }

    /// Lines paired with their direction labels.
    pub fn labeled_lines(&self) -> Vec<(HomogeneousLine2, Option<usize>)> {
        self.segments
            .iter()
            .map(|s| {
                (
                    line_from_segment(&s.segment, Vector2::zeros()).expect("generated segment"),
                    s.label,
                )
            })
            .collect()
    }
}

/// A minimal problem for one solver: lines in the solver's slot order plus
/// the (possibly perturbed) vertical and the ground truth.
#[derive(Debug, Clone)]
pub struct MinimalInstance {
    pub gt_frame: ManhattanFrame,
    pub gravity_noisy: Direction3,
    pub sample: MinimalSample,
}

/// Independent generator stream derived from a base seed and a stream index,
/// so that studies can shard work without changing results.
pub fn derive_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(mix(seed) ^ mix(stream.wrapping_add(0x51ED2701))))
}

fn mix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn standard_normal(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Uniformly distributed rotation matrix, obtained by normalizing a 4D
/// Gaussian sample into a unit quaternion.
pub fn random_rotation(rng: &mut impl Rng) -> Matrix3<f64> {
    loop {
        let q = nalgebra::Vector4::new(
            standard_normal(rng),
            standard_normal(rng),
            standard_normal(rng),
            standard_normal(rng),
        );
        if q.norm() < 1e-6 {
            continue;
        }
        let q = UnitQuaternion::from_quaternion(nalgebra::Quaternion::from_vector(q));
        return q.to_rotation_matrix().into_inner();
    }
}

/// Rotates `g` by an angle drawn from `N(0, sigma_deg)` about a random axis
/// in the plane orthogonal to `g`, so the angular deviation of the output
/// follows the folded normal `|N(0, sigma_deg)|` exactly.
pub fn perturb_gravity(g: &Direction3, sigma_deg: f64, rng: &mut impl Rng) -> Direction3 {
    if sigma_deg <= 0.0 {
        return *g;
    }
    let axis = loop {
        let raw = Vector3::new(
            standard_normal(rng),
            standard_normal(rng),
            standard_normal(rng),
        );
        if raw.norm() < 1e-9 {
            continue;
        }
        let in_plane = raw - g.vector() * raw.dot(&g.vector());
        if in_plane.norm() > 1e-9 {
            break Unit::new_normalize(in_plane);
        }
    };
    let angle = sigma_deg.to_radians() * standard_normal(rng);
    let rotated = Rotation3::from_axis_angle(&axis, angle) * g.vector();
    Direction3::new(rotated).expect("rotation preserves norm")
}

fn project(point: &Vector3<f64>, focal: f64) -> Vector2<f64> {
    Vector2::new(focal * point.x / point.z, focal * point.y / point.z)
}

/// Draws one noiseless segment along scene direction `dir` and returns its
/// projected, unperturbed endpoints.
fn draw_segment(
    frame: &ManhattanFrame,
    dir: usize,
    cfg: &SyntheticConfig,
    rng: &mut impl Rng,
) -> Result<(Vector2<f64>, Vector2<f64>), SyntheticError> {
    let d = frame.direction(dir).vector();
    for _ in 0..MAX_DRAW_RETRIES {
        let anchor = cfg.line_anchor_mean
            + cfg.anchor_std
                * Vector3::new(
                    standard_normal(rng),
                    standard_normal(rng),
                    standard_normal(rng),
                );
        let lambda: f64 = cfg.lambda_std * standard_normal(rng);
        let end = anchor + lambda * d;
        if anchor.z < MIN_DEPTH || end.z < MIN_DEPTH {
            continue;
        }
        let pa = project(&anchor, frame.focal());
        let pb = project(&end, frame.focal());
        if (pa - pb).norm() < MIN_SEGMENT_PX {
            continue;
        }
        return Ok((pa, pb));
    }
    Err(SyntheticError::DegenerateDraw)
}

fn apply_noise(
    p: Vector2<f64>,
    sigma: f64,
    pp_offset: Vector2<f64>,
    rng: &mut impl Rng,
) -> Vector2<f64> {
    let noise = if sigma > 0.0 {
        Vector2::new(sigma * standard_normal(rng), sigma * standard_normal(rng))
    } else {
        Vector2::zeros()
    };
    p + noise + pp_offset
}

fn draw_pp_offset(cfg: &SyntheticConfig, rng: &mut impl Rng) -> Vector2<f64> {
    if cfg.sigma_pp_px > 0.0 {
        Vector2::new(
            cfg.sigma_pp_px * standard_normal(rng),
            cfg.sigma_pp_px * standard_normal(rng),
        )
    } else {
        Vector2::zeros()
    }
}

/// Generates a full labeled scene: `lines_per_direction` segments per
/// direction plus outliers, with the configured noise applied.
pub fn generate_instance(
    cfg: &SyntheticConfig,
    rng: &mut impl Rng,
) -> Result<SyntheticInstance, SyntheticError> {
    let focal = rng.gen_range(cfg.focal_range.0..cfg.focal_range.1);
    let rotation = random_rotation(rng);
    let gt_frame = ManhattanFrame::from_parts_unchecked(rotation, focal);
    let gravity_gt = gt_frame.direction(0);
    let gravity_noisy = perturb_gravity(&gravity_gt, cfg.sigma_gravity_deg, rng);
    let pp_offset = draw_pp_offset(cfg, rng);

    let mut segments = Vec::new();
    for dir in 0..3 {
        for _ in 0..cfg.lines_per_direction {
            let (pa, pb) = draw_segment(&gt_frame, dir, cfg, rng)?;
            let pa = apply_noise(pa, cfg.sigma_image_px, pp_offset, rng);
            let pb = apply_noise(pb, cfg.sigma_image_px, pp_offset, rng);
            segments.push(LabeledSegment {
                segment: LineSegment::new(pa, pb),
                label: Some(dir),
            });
        }
    }

    let labeled = segments.len() as f64;
    let n_outliers = if cfg.outlier_fraction > 0.0 {
        (cfg.outlier_fraction / (1.0 - cfg.outlier_fraction) * labeled).round() as usize
    } else {
        0
    };
    for _ in 0..n_outliers {
        let seg = loop {
            let p = Vector2::new(rng.gen_range(-1000.0..1000.0), rng.gen_range(-1000.0..1000.0));
            let q = Vector2::new(rng.gen_range(-1000.0..1000.0), rng.gen_range(-1000.0..1000.0));
            if (p - q).norm() >= MIN_SEGMENT_PX {
                break LineSegment::new(p, q);
            }
        };
        segments.push(LabeledSegment {
            segment: seg,
            label: None,
        });
    }

    Ok(SyntheticInstance {
        gt_frame,
        gravity_gt,
        gravity_noisy,
        segments,
    })
}

/// Generates exactly the minimal line configuration of one solver.
///
/// Draws whose vertical has a near-zero z component are rejected for the
/// solvers with that singularity, mirroring how degenerate samples are
/// skipped in robust estimation.
pub fn generate_minimal_sample(
    id: SolverId,
    cfg: &SyntheticConfig,
    rng: &mut impl Rng,
) -> Result<MinimalInstance, SyntheticError> {
    for _ in 0..MAX_DRAW_RETRIES {
        let focal = rng.gen_range(cfg.focal_range.0..cfg.focal_range.1);
        let rotation = random_rotation(rng);
        let gt_frame = ManhattanFrame::from_parts_unchecked(rotation, focal);
        let gravity_gt = gt_frame.direction(0);
        let gravity_noisy = perturb_gravity(&gravity_gt, cfg.sigma_gravity_deg, rng);
        if matches!(id, SolverId::S200g | SolverId::S011g) && gravity_noisy.z().abs() < 1e-6 {
            continue;
        }
        let pp_offset = draw_pp_offset(cfg, rng);

        let mut lines = Vec::with_capacity(id.sample_size());
        let mut ok = true;
        for &dir in id.assignment() {
            let (pa, pb) = match draw_segment(&gt_frame, dir, cfg, rng) {
                Ok(pair) => pair,
                Err(_) => {
                    ok = false;
                    break;
                }
            };
            let pa = apply_noise(pa, cfg.sigma_image_px, pp_offset, rng);
            let pb = apply_noise(pb, cfg.sigma_image_px, pp_offset, rng);
            match line_from_segment(&LineSegment::new(pa, pb), Vector2::zeros()) {
                Ok(line) => lines.push(line),
                Err(_) => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            continue;
        }
        let sample = MinimalSample::for_solver(id, lines).expect("slot count matches");
        return Ok(MinimalInstance {
            gt_frame,
            gravity_noisy,
            sample,
        });
    }
    Err(SyntheticError::DegenerateDraw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::vp_line_distance;
    use approx::assert_relative_eq;

    #[test]
    fn random_rotation_satisfies_invariants_and_is_reproducible() {
        let mut rng = derive_rng(3, 0);
        for _ in 0..200 {
            let r = random_rotation(&mut rng);
            assert!((r.transpose() * r - Matrix3::identity()).abs().max() < 1e-12);
            assert_relative_eq!(r.determinant(), 1.0, epsilon = 1e-12);
        }
        let a = random_rotation(&mut derive_rng(9, 4));
        let b = random_rotation(&mut derive_rng(9, 4));
        assert_eq!(a, b);
    }

    #[test]
    fn random_rotation_trace_statistic_matches_haar_measure() {
        // Under the uniform measure the rotation angle has density
        // (1 - cos t) / pi on [0, pi], so E[|trace - 3| / 4]
        // = E[(1 - cos t) / 2] = (1 - E[cos t]) / 2 = (1 + 1/2) / 2 = 3/4.
        let mut rng = derive_rng(11, 0);
        let n = 100_000;
        let mean = (0..n)
            .map(|_| {
                let r = random_rotation(&mut rng);
                (r.trace() - 3.0).abs() / 4.0
            })
            .sum::<f64>()
            / n as f64;
        assert!((0.70..=0.80).contains(&mean), "mean {mean}");
    }

    #[test]
    fn perturb_gravity_zero_sigma_is_identity() {
        let mut rng = derive_rng(5, 1);
        let g = Direction3::new(Vector3::new(0.2, -0.9, 0.3)).unwrap();
        assert_eq!(perturb_gravity(&g, 0.0, &mut rng), g);
    }

    #[test]
    fn perturb_gravity_deviation_follows_folded_normal() {
        // E|N(0, 5 deg)| = 5 * sqrt(2/pi) ~ 3.99 degrees.
        let mut rng = derive_rng(5, 2);
        let g = Direction3::new(Vector3::new(0.1, -0.8, 0.5)).unwrap();
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let p = perturb_gravity(&g, 5.0, &mut rng);
            assert_relative_eq!(p.vector().norm(), 1.0, epsilon = 1e-12);
            sum += p.vector().dot(&g.vector()).clamp(-1.0, 1.0).acos().to_degrees();
        }
        let mean = sum / n as f64;
        assert!((3.5..=4.5).contains(&mean), "mean deviation {mean}");
    }

    #[test]
    fn noiseless_lines_pass_through_their_vps() {
        let cfg = SyntheticConfig {
            lines_per_direction: 5,
            ..Default::default()
        };
        let mut rng = derive_rng(17, 0);
        for _ in 0..50 {
            let inst = generate_instance(&cfg, &mut rng).unwrap();
            assert_relative_eq!(
                inst.gravity_gt.vector(),
                inst.gt_frame.rotation().column(0).into_owned(),
                epsilon = 1e-15
            );
            assert_eq!(inst.gravity_noisy, inst.gravity_gt);
            for (line, label) in inst.labeled_lines() {
                let dir = label.expect("no outliers configured");
                let residual = vp_line_distance(&line, &inst.gt_frame.vp(dir));
                assert!(residual < 1e-10, "residual {residual}");
            }
        }
    }

    #[test]
    fn noisy_lines_have_small_but_nonzero_residuals() {
        let cfg = SyntheticConfig {
            lines_per_direction: 20,
            sigma_image_px: 1.0,
            ..Default::default()
        };
        let mut rng = derive_rng(23, 0);
        let mut total = 0.0;
        let mut count = 0usize;
        for _ in 0..50 {
            let inst = generate_instance(&cfg, &mut rng).unwrap();
            for (line, label) in inst.labeled_lines() {
                let dir = label.unwrap();
                total += vp_line_distance(&line, &inst.gt_frame.vp(dir));
                count += 1;
            }
        }
        let mean = total / count as f64;
        assert!(mean > 0.0);
        // A 1 px endpoint perturbation moves the unit-norm residual by far
        // less than ten of its pixel-scale equivalents at these focals.
        assert!(mean < 0.1, "mean residual {mean}");
    }

    #[test]
    fn outlier_count_matches_requested_fraction() {
        let cfg = SyntheticConfig {
            lines_per_direction: 20,
            outlier_fraction: 0.3,
            ..Default::default()
        };
        let inst = generate_instance(&cfg, &mut derive_rng(29, 0)).unwrap();
        let outliers = inst.segments.iter().filter(|s| s.label.is_none()).count();
        let total = inst.segments.len();
        assert_eq!(outliers, 26); // 0.3 / 0.7 * 60 rounded
        assert!((outliers as f64 / total as f64 - 0.3).abs() < 0.01);
    }

    #[test]
    fn minimal_sample_shapes_match_configurations() {
        let cfg = SyntheticConfig::default();
        let mut rng = derive_rng(31, 0);
        for id in SolverId::ALL {
            let inst = generate_minimal_sample(id, &cfg, &mut rng).unwrap();
            assert_eq!(inst.sample.lines.len(), id.sample_size());
            assert_eq!(inst.sample.assignment, id.assignment().to_vec());
            // Every sampled line passes through the vanishing point of its slot.
            for (line, &dir) in inst.sample.lines.iter().zip(id.assignment()) {
                assert!(vp_line_distance(line, &inst.gt_frame.vp(dir)) < 1e-10);
            }
        }
    }

    #[test]
    fn generation_is_deterministic_for_a_seed() {
        let cfg = SyntheticConfig {
            lines_per_direction: 3,
            sigma_image_px: 0.7,
            sigma_gravity_deg: 2.0,
            outlier_fraction: 0.2,
            ..Default::default()
        };
        let a = generate_instance(&cfg, &mut derive_rng(41, 7)).unwrap();
        let b = generate_instance(&cfg, &mut derive_rng(41, 7)).unwrap();
        assert_eq!(a.gt_frame, b.gt_frame);
        assert_eq!(a.segments.len(), b.segments.len());
        for (x, y) in a.segments.iter().zip(&b.segments) {
            assert_eq!(x.segment, y.segment);
            assert_eq!(x.label, y.label);
        }
    }
}
