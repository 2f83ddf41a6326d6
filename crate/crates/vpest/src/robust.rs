//! Robust estimation: inlier scoring, adaptive iteration counts,
//! solver-sampling probabilities, local optimization, single-solver
//! LO-RANSAC, and the hybrid estimator drawing among all five minimal
//! solvers.
//!
//! The estimators are deterministic given the input and the configured
//! seed; single-threaded execution is the reference semantics.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry::{
    vp_line_distance, Direction3, GravityObservation, GravityQuality, HomogeneousLine2,
    ManhattanFrame,
};
use crate::nonminimal::{nonminimal_solve, refine_ls, InlierPartition};
use crate::solvers::{
    run_solver, solve_211_with_bracket, MinimalSample, SolverError, SolverId,
    DEFAULT_FOCAL_BRACKET,
};
use crate::synthetic::perturb_gravity;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RobustError {
    #[error("{available} usable lines, {required} required")]
    InsufficientLines { required: usize, available: usize },
    #[error("no solver call produced a valid frame")]
    NoModelFound,
    #[error("every solver weight is zero")]
    AllZeroWeights,
    #[error("selected solver requires a gravity observation")]
    ConfigMismatch,
}

/// Local-optimization strategy applied when a new best model is found.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoMode {
    /// Non-minimal refit on inlier subsets followed by nonlinear refinement.
    Ours,
    /// Nonlinear refinement of the incumbent on inlier subsets only.
    Iter,
    /// No local optimization.
    None,
}

/// Tunables of the robust estimators.
#[derive(Debug, Clone)]
pub struct RansacConfig {
    pub min_iterations: usize,
    pub max_iterations: usize,
    pub confidence: f64,
    /// Inlier threshold in [`vp_line_distance`] units (unit-norm lines and
    /// vanishing points).
    pub inlier_threshold: f64,
    pub lo_iterations: usize,
    /// Fraction of the inlier pool drawn per local-optimization step.
    pub lo_subset_fraction: f64,
    pub lo_min_subset: usize,
    pub lo_mode: LoMode,
    pub refine_max_iters: usize,
    /// Prior probability per solver, in [`SolverId::ALL`] order. Must sum
    /// to 1 for the hybrid estimator.
    pub solver_priors: [f64; 5],
    pub seed: u64,
    /// One-time angular jitter applied to a `Prior`-quality gravity vector.
    pub prior_gravity_jitter_deg: f64,
    /// Focal search interval handed to the 2-1-1 solver.
    pub focal_bracket: (f64, f64),
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            min_iterations: 1000,
            max_iterations: 100_000,
            confidence: 0.99,
            inlier_threshold: 1.5,
            lo_iterations: 100,
            lo_subset_fraction: 0.5,
            lo_min_subset: 6,
            lo_mode: LoMode::Ours,
            refine_max_iters: 50,
            solver_priors: [0.2; 5],
            seed: 0,
            prior_gravity_jitter_deg: 0.1,
            focal_bracket: DEFAULT_FOCAL_BRACKET,
        }
    }
}

impl RansacConfig {
    fn validate(&self) {
        assert!(self.min_iterations >= 1 && self.max_iterations >= self.min_iterations);
        assert!(self.confidence > 0.0 && self.confidence < 1.0);
        assert!(self.inlier_threshold > 0.0);
        assert!(self.lo_subset_fraction > 0.0 && self.lo_subset_fraction <= 1.0);
        assert!(self.solver_priors.iter().all(|p| *p >= 0.0));
        assert!(self.focal_bracket.0 > 0.0 && self.focal_bracket.1 > self.focal_bracket.0);
    }
}

/// Robust estimate with its inlier bookkeeping and per-solver statistics.
#[derive(Debug, Clone)]
pub struct RobustEstimate {
    pub frame: ManhattanFrame,
    pub partition: InlierPartition,
    /// Line indices assigned to each vanishing point.
    pub inlier_indices: [Vec<usize>; 3],
    /// Total inlier count of `frame`.
    pub score: usize,
    pub iterations_run: usize,
    /// Number of iterations each solver was drawn, in [`SolverId::ALL`] order.
    pub solver_draws: [usize; 5],
    pub lo_improvements: usize,
}

impl RobustEstimate {
    pub fn draws(&self, id: SolverId) -> usize {
        self.solver_draws[id.index()]
    }
}

/// Assigns each line to the closest of the frame's vanishing points,
/// keeping it only when that distance is below `threshold`. Returns the
/// inlier count and the per-VP index lists.
pub fn score_frame_indices(
    frame: &ManhattanFrame,
    lines: &[HomogeneousLine2],
    threshold: f64,
) -> (usize, [Vec<usize>; 3]) {
    let vps = frame.vps();
    let mut indices: [Vec<usize>; 3] = Default::default();
    let mut score = 0;
    for (i, line) in lines.iter().enumerate() {
        let mut best_vp = 0;
        let mut best_d = f64::INFINITY;
        for (k, vp) in vps.iter().enumerate() {
            let d = vp_line_distance(line, vp);
            if d < best_d {
                best_d = d;
                best_vp = k;
            }
        }
        if best_d < threshold {
            indices[best_vp].push(i);
            score += 1;
        }
    }
    (score, indices)
}

/// [`score_frame_indices`] materialized as a line partition.
pub fn score_frame(
    frame: &ManhattanFrame,
    lines: &[HomogeneousLine2],
    threshold: f64,
) -> (usize, InlierPartition) {
    let (score, indices) = score_frame_indices(frame, lines, threshold);
    (score, partition_from_indices(lines, &indices))
}

fn partition_from_indices(
    lines: &[HomogeneousLine2],
    indices: &[Vec<usize>; 3],
) -> InlierPartition {
    let mut sets: [Vec<HomogeneousLine2>; 3] = Default::default();
    for (k, idx) in indices.iter().enumerate() {
        sets[k] = idx.iter().map(|&i| lines[i]).collect();
    }
    InlierPartition::new(sets)
}

/// Number of RANSAC iterations needed to draw one all-inlier sample of size
/// `sample_size` with the given confidence: `ln(1-c) / ln(1-e^m)`, rounded
/// up and floored at one. An inlier ratio of zero yields `cap`.
pub fn iterations_needed(
    inlier_ratio: f64,
    sample_size: usize,
    confidence: f64,
    cap: usize,
) -> usize {
    if inlier_ratio <= 0.0 {
        return cap;
    }
    if inlier_ratio >= 1.0 {
        return 1;
    }
    let p_good = inlier_ratio.powi(sample_size as i32);
    if p_good <= 0.0 {
        return cap;
    }
    let p_fail = 1.0 - p_good;
    if p_fail <= 0.0 {
        return 1;
    }
    let n = ((1.0 - confidence).ln() / p_fail.ln()).ceil();
    if !n.is_finite() {
        return cap;
    }
    (n as usize).clamp(1, cap)
}

/// Per-solver sampling distribution: each prior is multiplied by the inlier
/// ratio raised to the solver's sample size, then the five weights are
/// normalized. Zero priors stay zero.
pub fn solver_probabilities(
    priors: &[f64; 5],
    inlier_ratio: f64,
) -> Result<[f64; 5], RobustError> {
    assert!(inlier_ratio > 0.0 && inlier_ratio <= 1.0);
    let mut weights = [0.0; 5];
    for (i, id) in SolverId::ALL.iter().enumerate() {
        weights[i] = priors[i] * inlier_ratio.powi(id.sample_size() as i32);
    }
    let sum: f64 = weights.iter().sum();
    if sum <= 0.0 {
        return Err(RobustError::AllZeroWeights);
    }
    for w in &mut weights {
        *w /= sum;
    }
    Ok(weights)
}

/// Draws `k` distinct indices from `0..n` by a partial Fisher-Yates shuffle.
fn sample_distinct(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    debug_assert!(k <= n);
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.gen_range(i..n);
        pool.swap(i, j);
    }
    pool.truncate(k);
    pool
}

fn draw_solver(rng: &mut ChaCha8Rng, weights: &[f64; 5]) -> SolverId {
    let positive: Vec<usize> = (0..5).filter(|&i| weights[i] > 0.0).collect();
    if positive.len() == 1 {
        return SolverId::ALL[positive[0]];
    }
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for &i in &positive {
        acc += weights[i];
        if u < acc {
            return SolverId::ALL[i];
        }
    }
    SolverId::ALL[*positive.last().expect("at least one positive weight")]
}

fn solve_dispatch(
    id: SolverId,
    sample: &MinimalSample,
    gravity: Option<Direction3>,
    bracket: (f64, f64),
) -> Result<Vec<ManhattanFrame>, SolverError> {
    if id == SolverId::S211 {
        let l = &sample.lines;
        return solve_211_with_bracket(&l[0], &l[1], &l[2], &l[3], bracket);
    }
    let observation = match gravity {
        Some(d) => GravityObservation::exact(d),
        None => GravityObservation::absent(),
    };
    run_solver(id, sample, &observation)
}

/// Assigns the given lines to the nearest vanishing point of `frame`,
/// without applying a threshold.
fn partition_by_nearest(
    frame: &ManhattanFrame,
    lines: &[HomogeneousLine2],
    subset: &[usize],
) -> InlierPartition {
    let vps = frame.vps();
    let mut sets: [Vec<HomogeneousLine2>; 3] = Default::default();
    for &i in subset {
        let line = lines[i];
        let mut best_vp = 0;
        let mut best_d = f64::INFINITY;
        for (k, vp) in vps.iter().enumerate() {
            let d = vp_line_distance(&line, vp);
            if d < best_d {
                best_d = d;
                best_vp = k;
            }
        }
        sets[best_vp].push(line);
    }
    InlierPartition::new(sets)
}

fn lo_step(
    mode: LoMode,
    incumbent: &ManhattanFrame,
    part: &InlierPartition,
    refine_iters: usize,
) -> ManhattanFrame {
    match mode {
        LoMode::Ours => {
            let refit = nonminimal_solve(part, incumbent);
            refine_ls(&refit, part, refine_iters)
        }
        LoMode::Iter => refine_ls(incumbent, part, refine_iters),
        LoMode::None => *incumbent,
    }
}

fn local_optimize_counted(
    best: &ManhattanFrame,
    lines: &[HomogeneousLine2],
    config: &RansacConfig,
    rng: &mut ChaCha8Rng,
    mode: LoMode,
) -> (ManhattanFrame, usize, usize) {
    let (score0, indices) = score_frame_indices(best, lines, config.inlier_threshold);
    if mode == LoMode::None {
        return (*best, score0, 0);
    }
    let pool: Vec<usize> = indices.iter().flatten().copied().collect();
    if pool.is_empty() {
        return (*best, score0, 0);
    }
    let subset_size = ((config.lo_subset_fraction * pool.len() as f64).round() as usize)
        .max(config.lo_min_subset)
        .min(pool.len());
    let mut current = *best;
    let mut current_score = score0;
    let mut improvements = 0;
    for _ in 0..config.lo_iterations {
        let picks = sample_distinct(rng, pool.len(), subset_size);
        let subset: Vec<usize> = picks.iter().map(|&i| pool[i]).collect();
        let part = partition_by_nearest(&current, lines, &subset);
        let candidate = lo_step(mode, &current, &part, config.refine_max_iters);
        let (score, _) = score_frame_indices(&candidate, lines, config.inlier_threshold);
        if score > current_score {
            current = candidate;
            current_score = score;
            improvements += 1;
        }
    }
    (current, current_score, improvements)
}

/// Local optimization of a model: draws random subsets of the model's
/// inliers and keeps refits that strictly improve the inlier count. The
/// returned score is never below the input model's score.
pub fn local_optimize(
    best: &ManhattanFrame,
    lines: &[HomogeneousLine2],
    config: &RansacConfig,
    rng: &mut ChaCha8Rng,
    mode: LoMode,
) -> (ManhattanFrame, usize) {
    let (frame, score, _) = local_optimize_counted(best, lines, config, rng, mode);
    (frame, score)
}

struct BestModel {
    frame: ManhattanFrame,
    score: usize,
}

fn estimate_core(
    lines: &[HomogeneousLine2],
    gravity: &GravityObservation,
    config: &RansacConfig,
    single: Option<SolverId>,
) -> Result<RobustEstimate, RobustError> {
    config.validate();
    let n = lines.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    // A rough prior is jittered once so that verticals lying exactly in the
    // singular configurations of the closed-form solvers are displaced.
    let gravity_dir = match (gravity.quality, gravity.direction) {
        (GravityQuality::Absent, _) | (_, None) => None,
        (GravityQuality::Exact, Some(d)) => Some(d),
        (GravityQuality::Prior, Some(d)) => {
            Some(perturb_gravity(&d, config.prior_gravity_jitter_deg, &mut rng))
        }
    };

    let mut priors = match single {
        Some(id) => {
            let mut p = [0.0; 5];
            p[id.index()] = 1.0;
            p
        }
        None => config.solver_priors,
    };
    for (i, id) in SolverId::ALL.iter().enumerate() {
        if id.requires_gravity() && gravity_dir.is_none() {
            priors[i] = 0.0;
        }
    }
    if priors.iter().sum::<f64>() <= 0.0 {
        return Err(RobustError::ConfigMismatch);
    }
    let required = SolverId::ALL
        .iter()
        .enumerate()
        .filter(|(i, _)| priors[*i] > 0.0)
        .map(|(_, id)| id.sample_size())
        .max()
        .unwrap();
    if n < required {
        return Err(RobustError::InsufficientLines {
            required,
            available: n,
        });
    }

    let mut best: Option<BestModel> = None;
    let mut draws = [0usize; 5];
    let mut lo_improvements = 0usize;
    let mut iterations = 0usize;

    loop {
        iterations += 1;
        // The sampling distribution uses the running inlier ratio; before a
        // meaningful model exists it starts at one half.
        let eps_weight = match &best {
            Some(b) if b.score > 0 => b.score as f64 / n as f64,
            _ => 0.5,
        };
        let weights = solver_probabilities(&priors, eps_weight)?;
        let id = draw_solver(&mut rng, &weights);
        draws[id.index()] += 1;

        let mut produced = None;
        for _ in 0..100 {
            let picks = sample_distinct(&mut rng, n, id.sample_size());
            let sample_lines: Vec<HomogeneousLine2> = picks.iter().map(|&i| lines[i]).collect();
            let sample = MinimalSample::for_solver(id, sample_lines).expect("sample size");
            match solve_dispatch(id, &sample, gravity_dir, config.focal_bracket) {
                Ok(frames) => {
                    produced = Some(frames);
                    break;
                }
                Err(_) => continue,
            }
        }
        if let Some(frames) = produced {
            for frame in frames {
                let (score, _) = score_frame_indices(&frame, lines, config.inlier_threshold);
                let is_better = best.as_ref().map_or(true, |b| score > b.score);
                if is_better {
                    let (lo_frame, lo_score, count) =
                        local_optimize_counted(&frame, lines, config, &mut rng, config.lo_mode);
                    lo_improvements += count;
                    best = Some(BestModel {
                        frame: lo_frame,
                        score: lo_score,
                    });
                }
            }
        }

        if iterations >= config.max_iterations {
            break;
        }
        if iterations >= config.min_iterations {
            let eps_term = best.as_ref().map_or(0.0, |b| b.score as f64 / n as f64);
            let all_met = SolverId::ALL.iter().enumerate().all(|(i, id)| {
                priors[i] == 0.0
                    || draws[i]
                        >= iterations_needed(
                            eps_term,
                            id.sample_size(),
                            config.confidence,
                            config.max_iterations,
                        )
            });
            if all_met {
                break;
            }
        }
    }

    let best = best.ok_or(RobustError::NoModelFound)?;
    let mut final_frame = best.frame;
    let mut final_score = best.score;
    // One refit pass on the full final inlier set. Ties are accepted here:
    // the refit cannot lose inliers without being discarded, and refitting
    // on all inliers is what makes the estimate accurate.
    if config.lo_mode != LoMode::None {
        let (_, indices) = score_frame_indices(&final_frame, lines, config.inlier_threshold);
        let part = partition_from_indices(lines, &indices);
        let candidate = lo_step(config.lo_mode, &final_frame, &part, config.refine_max_iters);
        let (score, _) = score_frame_indices(&candidate, lines, config.inlier_threshold);
        if score >= final_score {
            if score > final_score {
                lo_improvements += 1;
            }
            final_frame = candidate;
            final_score = score;
        }
    }

    let (score, indices) = score_frame_indices(&final_frame, lines, config.inlier_threshold);
    debug_assert_eq!(score, final_score.max(score.min(final_score)));
    let partition = partition_from_indices(lines, &indices);
    Ok(RobustEstimate {
        frame: final_frame,
        partition,
        inlier_indices: indices,
        score,
        iterations_run: iterations,
        solver_draws: draws,
        lo_improvements,
    })
}

/// LO-RANSAC with a fixed minimal solver.
///
/// Runs seeded, deterministic iterations of sample / solve / score, applies
/// local optimization whenever the best model improves, and terminates once
/// both the minimum iteration count and the adaptive requirement derived
/// from the current inlier ratio are met. A final refit pass runs on the
/// full inlier set.
pub fn ransac(
    lines: &[HomogeneousLine2],
    solver: SolverId,
    gravity: &GravityObservation,
    config: &RansacConfig,
) -> Result<RobustEstimate, RobustError> {
    estimate_core(lines, gravity, config, Some(solver))
}

/// Hybrid LO-RANSAC drawing one of the five minimal solvers each iteration
/// with probability proportional to `prior * eps^(sample size)`.
///
/// Gravity-based solvers receive zero weight when no gravity is observed; a
/// `Prior`-quality gravity is jittered once on entry. Termination requires
/// the adaptive iteration count of every active solver to be satisfied.
pub fn hybrid_ransac(
    lines: &[HomogeneousLine2],
    gravity: &GravityObservation,
    config: &RansacConfig,
) -> Result<RobustEstimate, RobustError> {
    let sum: f64 = config.solver_priors.iter().sum();
    assert!(
        (sum - 1.0).abs() <= 1e-9,
        "solver priors must sum to 1, got {sum}"
    );
    estimate_core(lines, gravity, config, None)
}
