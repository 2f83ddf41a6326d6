//! Command-line front end: single-scene estimation from line-segment files
//! and the three synthetic benchmark studies, with stable machine-readable
//! output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::Vector3;

use vpest::geometry::{Direction3, EvalMetrics, GravityQuality, ManhattanFrame};
use vpest::robust::{hybrid_ransac, ransac, LoMode, RansacConfig, RobustError};
use vpest::scene::{parse_scene_json, parse_segments_csv, EstimateOutput};
use vpest::solvers::SolverId;
use vpest::synthetic::{
    default_noise_grid, principal_point_grid, run_noise_study, run_runtime_study,
    run_stability_study,
};

const SCHEMA: &str = "vp-bench-v1";

#[derive(Parser)]
#[command(
    name = "vpest",
    about = "Manhattan frame, vanishing point, and focal length estimation from line segments",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate a Manhattan frame from a scene file (JSON scene schema or
    /// plain x1,y1,x2,y2 CSV).
    Estimate(EstimateArgs),
    /// Run a synthetic benchmark study and emit CSV.
    Bench(BenchArgs),
}

#[derive(Args)]
struct EstimateArgs {
    /// Input scene file.
    input: PathBuf,
    /// Write the JSON result here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Estimator to run.
    #[arg(long, value_enum, default_value_t = SolverChoice::Hybrid)]
    solver: SolverChoice,
    /// Gravity direction "x,y,z" in camera coordinates; overrides the scene
    /// file's gravity.
    #[arg(long)]
    gravity: Option<String>,
    /// Quality of the gravity observation.
    #[arg(long, value_enum, default_value_t = GravityQualityChoice::Exact)]
    gravity_quality: GravityQualityChoice,
    /// Inlier threshold in line/VP residual units.
    #[arg(long, default_value_t = 1.5)]
    threshold: f64,
    /// RANSAC seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Local optimization mode.
    #[arg(long, value_enum, default_value_t = LoChoice::Ours)]
    lo: LoChoice,
    /// Minimum RANSAC iterations.
    #[arg(long = "min-iters", default_value_t = 1000)]
    min_iters: usize,
    /// Focal search bracket "lo,hi" in pixels for the 2-1-1 solver;
    /// defaults to 0.1 to 10 times the image diagonal.
    #[arg(long = "focal-bracket")]
    focal_bracket: Option<String>,
    /// Image width in pixels, used when the input is a CSV segment list.
    #[arg(long, default_value_t = 0.0)]
    width: f64,
    /// Image height in pixels, used when the input is a CSV segment list.
    #[arg(long, default_value_t = 0.0)]
    height: f64,
    /// Compare against the ground truth embedded in the scene file.
    #[arg(long)]
    eval: bool,
    /// Include wall-clock timings in the output (breaks byte-for-byte
    /// reproducibility between runs).
    #[arg(long)]
    timings: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[command(subcommand)]
    study: StudyCommand,
}

#[derive(Subcommand)]
enum StudyCommand {
    /// Noiseless minimal problems: per-run log10 errors per solver.
    Stability {
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mean errors across an image/gravity (or principal-point) noise grid.
    Noise {
        #[arg(long, value_enum, default_value_t = GridChoice::Default)]
        grid: GridChoice,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-call solver times and theoretical RANSAC cost per outlier ratio.
    Runtime {
        /// Comma-separated outlier ratios in [0, 1).
        #[arg(long, default_value = "0.25,0.5,0.75")]
        outliers: String,
        /// Timed calls per solver; 0 skips timing and keeps the output
        /// byte-reproducible.
        #[arg(long, default_value_t = 100_000)]
        calls: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SolverChoice {
    Hybrid,
    #[value(name = "220")]
    S220,
    #[value(name = "211")]
    S211,
    #[value(name = "200g")]
    S200g,
    #[value(name = "011g")]
    S011g,
    #[value(name = "110g")]
    S110g,
}

impl SolverChoice {
    fn solver_id(self) -> Option<SolverId> {
        match self {
            SolverChoice::Hybrid => None,
            SolverChoice::S220 => Some(SolverId::S220),
            SolverChoice::S211 => Some(SolverId::S211),
            SolverChoice::S200g => Some(SolverId::S200g),
            SolverChoice::S011g => Some(SolverId::S011g),
            SolverChoice::S110g => Some(SolverId::S110g),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GravityQualityChoice {
    Exact,
    Prior,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LoChoice {
    Ours,
    Iter,
    None,
}

impl LoChoice {
    fn mode(self) -> LoMode {
        match self {
            LoChoice::Ours => LoMode::Ours,
            LoChoice::Iter => LoMode::Iter,
            LoChoice::None => LoMode::None,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GridChoice {
    /// Image noise crossed with gravity noise.
    Default,
    /// Principal-point offset sweep.
    Pp,
}

/// Failure with the exit code contract: 2 usage/parse, 3 estimation.
struct Failure {
    code: u8,
    message: String,
    machine_readable: bool,
}

impl Failure {
    fn parse(message: String) -> Self {
        Self {
            code: 2,
            message,
            machine_readable: false,
        }
    }

    fn estimation(error: &RobustError) -> Self {
        let name = match error {
            RobustError::InsufficientLines { .. } => "InsufficientLines",
            RobustError::NoModelFound => "NoModelFound",
            RobustError::AllZeroWeights => "AllZeroWeights",
            RobustError::ConfigMismatch => "ConfigMismatch",
        };
        let body = serde_json::json!({ "error": name, "message": error.to_string() });
        Self {
            code: 3,
            message: format!("{}\n", serde_json::to_string_pretty(&body).unwrap()),
            machine_readable: true,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            if failure.machine_readable {
                print!("{}", failure.message);
            } else {
                eprintln!("error: {}", failure.message);
            }
            ExitCode::from(failure.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Estimate(args) => run_estimate(args),
        Command::Bench(args) => run_bench(args),
    }
}

fn read_input(path: &PathBuf) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| Failure::parse(format!("cannot read {}: {e}", path.display())))
}

fn emit(out: Option<&PathBuf>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::parse(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn parse_pair(text: &str, what: &str) -> Result<(f64, f64), Failure> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(Failure::parse(format!("{what}: expected \"lo,hi\"")));
    }
    let lo = parts[0]
        .parse::<f64>()
        .map_err(|e| Failure::parse(format!("{what}: {e}")))?;
    let hi = parts[1]
        .parse::<f64>()
        .map_err(|e| Failure::parse(format!("{what}: {e}")))?;
    Ok((lo, hi))
}

fn run_estimate(args: EstimateArgs) -> Result<(), Failure> {
    let text = read_input(&args.input)?;
    let is_json = text.trim_start().starts_with('{');
    let mut scene = if is_json {
        parse_scene_json(&text).map_err(|e| Failure::parse(e.to_string()))?
    } else {
        parse_segments_csv(&text, args.width, args.height)
            .map_err(|e| Failure::parse(e.to_string()))?
    };

    if let Some(spec) = &args.gravity {
        let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(Failure::parse("--gravity: expected \"x,y,z\"".into()));
        }
        let mut v = [0.0; 3];
        for (i, p) in parts.iter().enumerate() {
            v[i] = p
                .parse::<f64>()
                .map_err(|e| Failure::parse(format!("--gravity: {e}")))?;
        }
        let dir = Direction3::new(Vector3::new(v[0], v[1], v[2]))
            .map_err(|_| Failure::parse("--gravity: zero norm".into()))?;
        scene.gravity = Some((dir, GravityQuality::Exact));
    }
    // The quality flag applies to whichever gravity vector is in effect.
    if let Some((d, _)) = scene.gravity {
        let quality = match args.gravity_quality {
            GravityQualityChoice::Exact => GravityQuality::Exact,
            GravityQualityChoice::Prior => GravityQuality::Prior,
        };
        scene.gravity = Some((d, quality));
    }

    let lines = scene.lines().map_err(|e| Failure::parse(e.to_string()))?;
    let gravity = scene.gravity_observation();

    let diagonal = scene.width.hypot(scene.height);
    let default_bracket = if diagonal > 0.0 {
        (0.1 * diagonal, 10.0 * diagonal)
    } else {
        vpest::solvers::DEFAULT_FOCAL_BRACKET
    };
    let focal_bracket = match &args.focal_bracket {
        Some(text) => parse_pair(text, "--focal-bracket")?,
        None => default_bracket,
    };

    let config = RansacConfig {
        min_iterations: args.min_iters,
        inlier_threshold: args.threshold,
        lo_mode: args.lo.mode(),
        seed: args.seed,
        focal_bracket,
        ..Default::default()
    };

    let start = Instant::now();
    let estimate = match args.solver.solver_id() {
        None => hybrid_ransac(&lines, &gravity, &config),
        Some(id) => ransac(&lines, id, &gravity, &config),
    }
    .map_err(|e| Failure::estimation(&e))?;
    let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;

    let mut output = EstimateOutput::from_estimate(&estimate);
    if args.timings {
        let mut timings = BTreeMap::new();
        timings.insert("total".to_string(), elapsed_ms);
        output.timings_ms = Some(timings);
    }
    if args.eval {
        let gt = scene.gt.ok_or_else(|| {
            Failure::parse("--eval requires a scene file with embedded ground truth".into())
        })?;
        let gt_frame = ManhattanFrame::new(gt.rotation, gt.focal)
            .map_err(|e| Failure::parse(format!("embedded ground truth: {e}")))?;
        output.eval = Some(EvalMetrics::compare(&estimate.frame, &gt_frame).into());
    }
    emit(args.out.as_ref(), &output.to_json())
}

fn run_bench(args: BenchArgs) -> Result<(), Failure> {
    match args.study {
        StudyCommand::Stability { n, seed, out } => {
            if n == 0 {
                return Err(Failure::parse("--n must be at least 1".into()));
            }
            let study = run_stability_study(n, seed);
            let mut csv = String::new();
            let _ = writeln!(csv, "#schema={SCHEMA} study=stability n={n} seed={seed}");
            let _ = writeln!(
                csv,
                "row,solver,run_index,log10_rotation_error_deg,log10_focal_abs_error,\
                 rotation_below_1e-6deg_fraction,focal_rel_below_1e-8_fraction"
            );
            for s in &study.samples {
                let _ = writeln!(
                    csv,
                    "sample,{},{},{},{},,",
                    s.solver,
                    s.run_index,
                    log10_clamped(s.rotation_error_deg),
                    log10_clamped(s.focal_abs_error)
                );
            }
            for s in &study.summaries {
                let _ = writeln!(
                    csv,
                    "summary,{},,,,{},{}",
                    s.solver, s.rotation_below_fraction, s.focal_rel_below_fraction
                );
            }
            emit(out.as_ref(), &csv)
        }
        StudyCommand::Noise { grid, n, seed, out } => {
            if n == 0 {
                return Err(Failure::parse("--n must be at least 1".into()));
            }
            let cells = match grid {
                GridChoice::Default => default_noise_grid(),
                GridChoice::Pp => principal_point_grid(),
            };
            let rows = run_noise_study(&cells, n, seed);
            let mut csv = String::new();
            let grid_name = match grid {
                GridChoice::Default => "default",
                GridChoice::Pp => "pp",
            };
            let _ = writeln!(
                csv,
                "#schema={SCHEMA} study=noise grid={grid_name} n={n} seed={seed}"
            );
            let _ = writeln!(
                csv,
                "solver,sigma_image_px,sigma_gravity_deg,sigma_pp_px,samples,failures,\
                 mean_rotation_error_deg,mean_focal_rel_error"
            );
            for r in &rows {
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{},{},{}",
                    r.solver,
                    r.cell.sigma_image_px,
                    r.cell.sigma_gravity_deg,
                    r.cell.sigma_pp_px,
                    r.samples,
                    r.failures,
                    r.mean_rotation_error_deg,
                    r.mean_focal_rel_error
                );
            }
            emit(out.as_ref(), &csv)
        }
        StudyCommand::Runtime {
            outliers,
            calls,
            seed,
            out,
        } => {
            let mut ratios = Vec::new();
            for part in outliers.split(',') {
                let r = part
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Failure::parse(format!("--outliers: {e}")))?;
                if !(0.0..1.0).contains(&r) {
                    return Err(Failure::parse(format!(
                        "--outliers: ratio {r} outside [0, 1)"
                    )));
                }
                ratios.push(r);
            }
            let rows = run_runtime_study(&ratios, calls, seed);
            let mut csv = String::new();
            let _ = writeln!(
                csv,
                "#schema={SCHEMA} study=runtime calls={calls} seed={seed}"
            );
            let _ = writeln!(
                csv,
                "solver,sample_size,outlier_ratio,mean_call_us,iterations_factor,theoretical_us"
            );
            for r in &rows {
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{}",
                    r.solver,
                    r.sample_size,
                    r.outlier_ratio,
                    r.mean_call_us,
                    r.iterations_factor,
                    r.theoretical_us
                );
            }
            emit(out.as_ref(), &csv)
        }
    }
}

fn log10_clamped(x: f64) -> f64 {
    x.max(1e-18).log10()
}
