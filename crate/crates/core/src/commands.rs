//! The work behind each CLI subcommand. Every command writes `report.json`
//! (deterministic) and `timing.json` (wall time) into its output directory.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lanes::{reference_hyper, LanesExperiment};
use crate::oracle::{grid_extrema, RewardGrid, DEFAULT_GRID_CAP};
use crate::report::{
    solve_summary, write_json, write_timing, write_traces, OracleSummary, ProblemSummary,
    SolveSummary,
};
use crate::solver::{rob_rel_traced, worst_case_loss};
use crate::specfile::{
    FeedbackSpec, HyperOverrides, HyperResolution, LoadedProblem, Mode, SpecFile,
};

pub const DEFAULT_GRID_RESOLUTION: f64 = 0.02;

#[derive(Clone, Debug, Default)]
pub struct CommonArgs {
    pub overrides: HyperOverrides,
    /// Replaces the estimation seed of the spec.
    pub seed: Option<u64>,
    pub out_dir: PathBuf,
    pub trace: bool,
}

/// Loads and builds a spec; dataset paths resolve against the spec's directory.
pub fn load(spec_path: &Path, args: &CommonArgs) -> Result<LoadedProblem> {
    let mut spec = SpecFile::load(spec_path)?;
    apply_seed(&mut spec, args.seed);
    let base = spec_path.parent().unwrap_or(Path::new("."));
    spec.build(base, &args.overrides)
}

fn apply_seed(spec: &mut SpecFile, seed: Option<u64>) {
    if let (Some(seed), Some(est)) = (seed, spec.estimation.as_mut()) {
        est.seed = seed;
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveOutput {
    pub command: &'static str,
    pub problem: ProblemSummary,
    pub hyper: HyperResolution,
    pub result: SolveSummary,
    /// Worst-case error of predicting with the upper extreme instead of the midpoint.
    pub worst_case_loss_at_max: f64,
}

pub fn run_solve(spec_path: &Path, args: &CommonArgs) -> Result<SolveOutput> {
    let start = Instant::now();
    let loaded = load(spec_path, args)?;
    let out = solve_loaded(&loaded, args)?;
    finish(args, &out, start)?;
    Ok(out)
}

fn solve_loaded(loaded: &LoadedProblem, args: &CommonArgs) -> Result<SolveOutput> {
    std::fs::create_dir_all(&args.out_dir)?;
    let report = rob_rel_traced(&loaded.problem, args.trace)?;
    if args.trace {
        write_traces(&args.out_dir, &report)?;
    }
    Ok(SolveOutput {
        command: "solve",
        problem: ProblemSummary::of(loaded),
        hyper: loaded.hyper,
        result: solve_summary(loaded, &report)?,
        worst_case_loss_at_max: worst_case_loss(
            report.max.value,
            report.min.value,
            report.max.value,
        )?,
    })
}

fn finish<T: Serialize>(args: &CommonArgs, out: &T, start: Instant) -> Result<()> {
    std::fs::create_dir_all(&args.out_dir)?;
    write_json(&args.out_dir.join("report.json"), out)?;
    write_timing(&args.out_dir, start.elapsed().as_secs_f64())
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleOutput {
    pub command: &'static str,
    pub problem: ProblemSummary,
    pub oracle: OracleSummary,
    pub solver: SolveSummary,
    pub hyper: HyperResolution,
    /// `|m̂ - m*|`
    pub min_error: f64,
    /// `|M̂ - M*|`
    pub max_error: f64,
}

/// Grid extrema of the exact problem next to the solver's estimates.
pub fn run_oracle(spec_path: &Path, resolution: f64, args: &CommonArgs) -> Result<OracleOutput> {
    let start = Instant::now();
    let loaded = load(spec_path, args)?;
    let out = oracle_loaded(&loaded, resolution, args)?;
    finish(args, &out, start)?;
    Ok(out)
}

fn oracle_loaded(
    loaded: &LoadedProblem,
    resolution: f64,
    args: &CommonArgs,
) -> Result<OracleOutput> {
    let space = loaded.problem.space();
    let grid = RewardGrid::for_space(space, resolution)?;
    let e = grid_extrema(
        &loaded.exact_constraints,
        &loaded.exact_objective,
        space,
        &grid,
        DEFAULT_GRID_CAP,
    )?;
    let solve = solve_loaded(loaded, args)?;
    Ok(OracleOutput {
        command: "oracle",
        problem: solve.problem,
        oracle: OracleSummary::of(&e, resolution),
        min_error: (solve.result.min.value - e.min).abs(),
        max_error: (solve.result.max.value - e.max).abs(),
        solver: solve.result,
        hyper: solve.hyper,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GainBackend {
    Solver,
    Oracle,
}

#[derive(Clone, Debug, Serialize)]
pub struct InfoGainOutput {
    pub command: &'static str,
    pub backend: GainBackend,
    pub extra: String,
    pub before: f64,
    pub after: f64,
    pub gain: f64,
}

/// Reduction in uninformativeness from appending the feedback in `extra_path`
/// (one feedback entry in spec syntax) to the spec's feedback.
pub fn run_infogain(
    spec_path: &Path,
    extra_path: &Path,
    backend: GainBackend,
    resolution: f64,
    args: &CommonArgs,
) -> Result<InfoGainOutput> {
    let start = Instant::now();
    let extra: FeedbackSpec =
        serde_json::from_str(&std::fs::read_to_string(extra_path)?).map_err(|e| Error::Spec {
            path: extra_path.display().to_string(),
            message: e.to_string(),
        })?;
    let mut spec = SpecFile::load(spec_path)?;
    apply_seed(&mut spec, args.seed);
    let base = spec_path.parent().unwrap_or(Path::new("."));
    let before = spec.build(base, &args.overrides)?;
    let mut extended = spec.clone();
    extended.feedback.push(extra.clone());
    let after = extended.build(base, &args.overrides)?;

    let spread = |loaded: &LoadedProblem| -> Result<f64> {
        match backend {
            GainBackend::Solver => Ok(rob_rel_traced(&loaded.problem, false)?.uninformativeness),
            GainBackend::Oracle => {
                let space = loaded.problem.space();
                let grid = RewardGrid::for_space(space, resolution)?;
                let e = grid_extrema(
                    &loaded.exact_constraints,
                    &loaded.exact_objective,
                    space,
                    &grid,
                    DEFAULT_GRID_CAP,
                )?;
                Ok(e.uninformativeness())
            }
        }
    };
    let (b, a) = (spread(&before)?, spread(&after)?);
    let out = InfoGainOutput {
        command: "infogain",
        backend,
        extra: extra.label().to_string(),
        before: b,
        after: a,
        gain: b - a,
    };
    finish(args, &out, start)?;
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct LanesOutput {
    pub command: &'static str,
    pub true_reward: [f64; 3],
    /// `ΔJ(r*)`
    pub true_gap: f64,
    /// `|x̂ - ΔJ(r*)|`, never above the uninformativeness when the true reward is feasible.
    pub prediction_error: f64,
    pub run: OracleOutput,
}

/// Writes the reference lanes spec to `lanes.json` in the output directory,
/// then solves it and checks it against the grid.
pub fn run_lanes(resolution: f64, args: &CommonArgs) -> Result<LanesOutput> {
    let start = Instant::now();
    let exp = LanesExperiment::reference();
    let spec = exp.spec_file(reference_hyper())?;
    std::fs::create_dir_all(&args.out_dir)?;
    let spec_path = args.out_dir.join("lanes.json");
    spec.save(&spec_path)?;
    debug_assert_eq!(spec.mode, Mode::Exact);
    let loaded = spec.build(&args.out_dir, &args.overrides)?;
    let run = oracle_loaded(&loaded, resolution, args)?;
    let true_gap = exp.true_gap()?;
    let out = LanesOutput {
        command: "experiment lanes",
        true_reward: exp.reward,
        true_gap,
        prediction_error: (run.solver.prediction - true_gap).abs(),
        run,
    };
    finish(args, &out, start)?;
    Ok(out)
}
