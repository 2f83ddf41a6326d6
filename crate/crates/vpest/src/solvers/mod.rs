//! The five minimal solvers mapping 2 or 4 lines (plus an optional vertical
//! direction) to candidate Manhattan frames, and the uniform dispatch used
//! by the robust estimators.

use thiserror::Error;

use crate::geometry::{GravityObservation, HomogeneousLine2, ManhattanFrame};

mod four_line;
mod gravity;
pub(crate) mod poly;

pub use four_line::{solve_211, solve_211_with_bracket, solve_220, DEFAULT_FOCAL_BRACKET};
pub use gravity::{build_ortho_basis, solve_011g, solve_110g, solve_110g_quartic, solve_200g, OrthoBasis};

/// Denominators are treated as zero below this threshold, after the inputs
/// involved have been normalized to unit norm.
pub const SINGULARITY_TOL: f64 = 1e-12;

/// Errors raised by the minimal solvers.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolverError {
    #[error("sampled lines are parallel")]
    ParallelLines,
    #[error("vertical direction has no z component")]
    GravitySingularity,
    #[error("constraint denominator vanishes")]
    DenominatorSingularity,
    #[error("no positive focal length solution")]
    NoPositiveFocal,
    #[error("focal length constraint has no real root")]
    NoRealRoot,
    #[error("no common root of the incidence constraints")]
    NoCommonRoot,
    #[error("squared focal length is not positive")]
    NegativeFocalSquared,
    #[error("both vanishing points are at infinity")]
    VpsAtInfinity,
    #[error("no eliminant root inside the focal bracket")]
    NoRootInBracket,
    #[error("sample or gravity does not match the solver configuration")]
    ConfigMismatch,
}

/// Identifier of a minimal solver, named after its line configuration:
/// `x1-x2-x3` means `x_i` sampled lines are associated with vanishing point
/// `i`, and the `g` suffix marks solvers that consume the vertical direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SolverId {
    S220,
    S211,
    S200g,
    S011g,
    S110g,
}

impl SolverId {
    /// All solvers in canonical order.
    pub const ALL: [SolverId; 5] = [
        SolverId::S220,
        SolverId::S211,
        SolverId::S200g,
        SolverId::S011g,
        SolverId::S110g,
    ];

    /// Number of lines in a minimal sample.
    pub fn sample_size(&self) -> usize {
        match self {
            SolverId::S220 | SolverId::S211 => 4,
            _ => 2,
        }
    }

    pub fn requires_gravity(&self) -> bool {
        matches!(self, SolverId::S200g | SolverId::S011g | SolverId::S110g)
    }

    /// Vanishing-point index each sample slot is associated with. Index 0 is
    /// the vertical direction for the gravity-based solvers.
    pub fn assignment(&self) -> &'static [usize] {
        match self {
            SolverId::S220 => &[0, 0, 1, 1],
            SolverId::S211 => &[0, 0, 1, 2],
            SolverId::S200g => &[1, 1],
            SolverId::S011g => &[0, 1],
            SolverId::S110g => &[1, 2],
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SolverId::S220 => "220",
            SolverId::S211 => "211",
            SolverId::S200g => "200g",
            SolverId::S011g => "011g",
            SolverId::S110g => "110g",
        }
    }

    pub fn from_name(name: &str) -> Option<SolverId> {
        SolverId::ALL.iter().copied().find(|s| s.name() == name)
    }

    /// Position in [`SolverId::ALL`].
    pub fn index(&self) -> usize {
        SolverId::ALL.iter().position(|s| s == self).unwrap()
    }
}

impl std::fmt::Display for SolverId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A minimal line sample together with its vanishing-point assignment.
#[derive(Debug, Clone)]
pub struct MinimalSample {
    pub lines: Vec<HomogeneousLine2>,
    pub assignment: Vec<usize>,
}

impl MinimalSample {
    /// Wraps lines in the canonical slot order of the given solver.
    pub fn for_solver(id: SolverId, lines: Vec<HomogeneousLine2>) -> Result<Self, SolverError> {
        if lines.len() != id.sample_size() {
            return Err(SolverError::ConfigMismatch);
        }
        Ok(Self {
            lines,
            assignment: id.assignment().to_vec(),
        })
    }

    pub fn matches(&self, id: SolverId) -> bool {
        self.lines.len() == id.sample_size() && self.assignment == id.assignment()
    }
}

/// Uniform dispatch over the five solvers. Every returned frame satisfies
/// the Manhattan frame invariants.
pub fn run_solver(
    id: SolverId,
    sample: &MinimalSample,
    gravity: &GravityObservation,
) -> Result<Vec<ManhattanFrame>, SolverError> {
    if !sample.matches(id) {
        return Err(SolverError::ConfigMismatch);
    }
    let l = &sample.lines;
    if id.requires_gravity() {
        if !gravity.is_present() {
            return Err(SolverError::ConfigMismatch);
        }
        let g = gravity.direction.unwrap();
        match id {
            SolverId::S200g => solve_200g(&l[0], &l[1], &g),
            SolverId::S011g => solve_011g(&l[0], &l[1], &g),
            SolverId::S110g => solve_110g(&l[0], &l[1], &g),
            _ => unreachable!(),
        }
    } else {
        match id {
            SolverId::S220 => solve_220(&l[0], &l[1], &l[2], &l[3]),
            SolverId::S211 => solve_211(&l[0], &l[1], &l[2], &l[3]),
            _ => unreachable!(),
        }
    }
}
