//! Scene file formats: the JSON scene schema, the plain CSV segment list,
//! and the machine-readable estimate output.

use std::collections::BTreeMap;

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    line_from_segment, Direction3, EvalMetrics, GravityObservation, GravityQuality,
    HomogeneousLine2, LineSegment, ManhattanFrame,
};
use crate::robust::RobustEstimate;
use crate::synthetic::SyntheticInstance;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SceneError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid scene: {0}")]
    Invalid(String),
}

/// A parsed input scene: image dimensions, segments in image coordinates,
/// optional gravity, and optional embedded ground truth for evaluation.
#[derive(Debug, Clone)]
pub struct SceneInput {
    pub width: f64,
    pub height: f64,
    pub segments: Vec<LineSegment>,
    pub gravity: Option<(Direction3, GravityQuality)>,
    pub gt: Option<GroundTruth>,
}

#[derive(Debug, Clone, Copy)]
pub struct GroundTruth {
    pub rotation: Matrix3<f64>,
    pub focal: f64,
}

impl SceneInput {
    /// Converts all segments to principal-point-centered homogeneous lines,
    /// dropping the indices of degenerate segments is an error.
    pub fn lines(&self) -> Result<Vec<HomogeneousLine2>, SceneError> {
        let size = Vector2::new(self.width, self.height);
        self.segments
            .iter()
            .enumerate()
            .map(|(i, seg)| {
                line_from_segment(seg, size)
                    .map_err(|e| SceneError::Invalid(format!("segment {i}: {e}")))
            })
            .collect()
    }

    pub fn gravity_observation(&self) -> GravityObservation {
        match self.gravity {
            Some((d, GravityQuality::Exact)) => GravityObservation::exact(d),
            Some((d, GravityQuality::Prior)) => GravityObservation::prior(d),
            _ => GravityObservation::absent(),
        }
    }

    /// Exports a synthetic instance as a scene of the given size: generated
    /// segments live in principal-point-centered coordinates and are shifted
    /// to image coordinates here.
    pub fn from_synthetic(
        inst: &SyntheticInstance,
        width: f64,
        height: f64,
        gravity: Option<(Direction3, GravityQuality)>,
    ) -> Self {
        let offset = Vector2::new(width / 2.0, height / 2.0);
        let segments = inst
            .segments
            .iter()
            .map(|s| LineSegment::new(s.segment.p + offset, s.segment.q + offset))
            .collect();
        Self {
            width,
            height,
            segments,
            gravity,
            gt: Some(GroundTruth {
                rotation: inst.gt_frame.rotation(),
                focal: inst.gt_frame.focal(),
            }),
        }
    }

    pub fn to_json(&self) -> String {
        let raw = RawScene {
            width: self.width,
            height: self.height,
            segments: self
                .segments
                .iter()
                .map(|s| [s.p.x, s.p.y, s.q.x, s.q.y])
                .collect(),
            gravity: self.gravity.map(|(d, _)| [d.x(), d.y(), d.z()]),
            gt: self.gt.map(|gt| RawGroundTruth {
                rotation: [
                    gt.rotation[(0, 0)],
                    gt.rotation[(0, 1)],
                    gt.rotation[(0, 2)],
                    gt.rotation[(1, 0)],
                    gt.rotation[(1, 1)],
                    gt.rotation[(1, 2)],
                    gt.rotation[(2, 0)],
                    gt.rotation[(2, 1)],
                    gt.rotation[(2, 2)],
                ],
                focal: gt.focal,
            }),
        };
        serde_json::to_string_pretty(&raw).expect("scene serialization")
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct RawScene {
    width: f64,
    height: f64,
    segments: Vec<[f64; 4]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gravity: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gt: Option<RawGroundTruth>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawGroundTruth {
    rotation: [f64; 9],
    focal: f64,
}

/// Parses the JSON scene schema. The gravity quality defaults to `Exact`
/// when a gravity vector is present; the caller may override it.
pub fn parse_scene_json(text: &str) -> Result<SceneInput, SceneError> {
    let raw: RawScene = serde_json::from_str(text).map_err(|e| SceneError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if !(raw.width > 0.0 && raw.height > 0.0) {
        return Err(SceneError::Invalid(format!(
            "image dimensions must be positive, got {}x{}",
            raw.width, raw.height
        )));
    }
    if raw.segments.len() < 2 {
        return Err(SceneError::Invalid(format!(
            "at least 2 segments required, got {}",
            raw.segments.len()
        )));
    }
    let segments = raw
        .segments
        .iter()
        .map(|s| LineSegment::new(Vector2::new(s[0], s[1]), Vector2::new(s[2], s[3])))
        .collect();
    let gravity = match raw.gravity {
        Some(g) => {
            let d = Direction3::new(Vector3::new(g[0], g[1], g[2]))
                .map_err(|_| SceneError::Invalid("gravity vector has zero norm".into()))?;
            Some((d, GravityQuality::Exact))
        }
        None => None,
    };
    let gt = match raw.gt {
        Some(gt) => {
            let r = gt.rotation;
            let rotation = Matrix3::new(r[0], r[1], r[2], r[3], r[4], r[5], r[6], r[7], r[8]);
            ManhattanFrame::new(rotation, gt.focal)
                .map_err(|e| SceneError::Invalid(format!("embedded ground truth: {e}")))?;
            Some(GroundTruth {
                rotation,
                focal: gt.focal,
            })
        }
        None => None,
    };
    Ok(SceneInput {
        width: raw.width,
        height: raw.height,
        segments,
        gravity,
        gt,
    })
}

/// Parses a plain CSV of `x1,y1,x2,y2` rows. Blank lines and `#` comments
/// are skipped. The image size is supplied separately since the format
/// carries none.
pub fn parse_segments_csv(text: &str, width: f64, height: f64) -> Result<SceneInput, SceneError> {
    let mut segments = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(SceneError::Parse {
                line: idx + 1,
                column: 1,
                message: format!("expected 4 comma-separated values, got {}", fields.len()),
            });
        }
        let mut vals = [0.0; 4];
        for (k, field) in fields.iter().enumerate() {
            vals[k] = field.parse::<f64>().map_err(|e| SceneError::Parse {
                line: idx + 1,
                column: k + 1,
                message: format!("{e}: {field:?}"),
            })?;
        }
        segments.push(LineSegment::new(
            Vector2::new(vals[0], vals[1]),
            Vector2::new(vals[2], vals[3]),
        ));
    }
    if segments.len() < 2 {
        return Err(SceneError::Invalid(format!(
            "at least 2 segments required, got {}",
            segments.len()
        )));
    }
    Ok(SceneInput {
        width,
        height,
        segments,
        gravity: None,
        gt: None,
    })
}

/// Machine-readable estimation result. All numbers survive a JSON round
/// trip bit for bit.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EstimateOutput {
    /// Row-major rotation matrix.
    pub rotation: [f64; 9],
    pub focal_px: f64,
    /// Unit-norm homogeneous vanishing points, one per direction.
    pub vps: [[f64; 3]; 3],
    pub inlier_indices: [Vec<usize>; 3],
    pub score: usize,
    pub iterations: usize,
    pub solver_draws: BTreeMap<String, usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings_ms: Option<BTreeMap<String, f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eval: Option<EvalOutput>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct EvalOutput {
    pub rotation_error_deg: f64,
    pub vp_error_deg: f64,
    pub focal_abs_error: f64,
    pub focal_rel_error: f64,
}

impl From<EvalMetrics> for EvalOutput {
    fn from(m: EvalMetrics) -> Self {
        Self {
            rotation_error_deg: m.rotation_error_deg,
            vp_error_deg: m.vp_error_deg,
            focal_abs_error: m.focal_abs_error,
            focal_rel_error: m.focal_rel_error,
        }
    }
}

impl EstimateOutput {
    pub fn from_estimate(estimate: &RobustEstimate) -> Self {
        let r = estimate.frame.rotation();
        let vps = estimate.frame.vps();
        let mut draws = BTreeMap::new();
        for id in crate::solvers::SolverId::ALL {
            draws.insert(id.name().to_string(), estimate.draws(id));
        }
        Self {
            rotation: [
                r[(0, 0)],
                r[(0, 1)],
                r[(0, 2)],
                r[(1, 0)],
                r[(1, 1)],
                r[(1, 2)],
                r[(2, 0)],
                r[(2, 1)],
                r[(2, 2)],
            ],
            focal_px: estimate.frame.focal(),
            vps: [
                [vps[0].x, vps[0].y, vps[0].z],
                [vps[1].x, vps[1].y, vps[1].z],
                [vps[2].x, vps[2].y, vps[2].z],
            ],
            inlier_indices: estimate.inlier_indices.clone(),
            score: estimate.score,
            iterations: estimate.iterations_run,
            solver_draws: draws,
            timings_ms: None,
            eval: None,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("estimate serialization");
        s.push('\n');
        s
    }
}
