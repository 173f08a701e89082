//! Report files: a JSON summary per run, optional per-iteration CSV traces,
//! and the wall time kept apart in `timing.json` so that repeated runs produce
//! byte-identical reports.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;
use crate::oracle::GridExtrema;
use crate::reward::RewardPoint;
use crate::solver::{Extremum, SolveReport, TraceRow};
use crate::specfile::{LoadedProblem, Mode};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RewardSummary {
    /// Feature weights when a feature map is used.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    /// Full `[h][s][a]` reward, flattened, only in tabular mode.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

impl RewardSummary {
    pub fn of(r: &RewardPoint) -> Self {
        match r.theta() {
            Some(t) => RewardSummary {
                theta: Some(t.to_vec()),
                values: None,
            },
            None => RewardSummary {
                theta: None,
                values: Some(r.values().as_slice().to_vec()),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExtremumSummary {
    pub value: f64,
    pub reward: RewardSummary,
    /// Largest constraint value at the averaged reward (exact constraints).
    pub max_violation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveSummary {
    pub min: ExtremumSummary,
    pub max: ExtremumSummary,
    pub prediction: f64,
    pub uninformativeness: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProblemSummary {
    pub mode: Mode,
    pub states: usize,
    pub actions: usize,
    pub horizon: usize,
    pub parameters: usize,
    /// Constraint labels in dual-vector order.
    pub constraints: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slater_margin: Option<f64>,
    pub warnings: Vec<String>,
}

impl ProblemSummary {
    pub fn of(loaded: &LoadedProblem) -> Self {
        let shape = loaded.problem.space().shape();
        ProblemSummary {
            mode: loaded.spec.mode,
            states: shape.states,
            actions: shape.actions,
            horizon: shape.horizon,
            parameters: loaded.problem.space().dim(),
            constraints: loaded.problem.constraints().labels().to_vec(),
            slater_margin: loaded.slater_margin.filter(|m| m.is_finite()),
            warnings: loaded.warnings.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleSummary {
    pub resolution: f64,
    pub total_points: u64,
    pub feasible_points: u64,
    pub min: f64,
    pub max: f64,
    pub argmin: RewardSummary,
    pub argmax: RewardSummary,
    pub prediction: f64,
    pub uninformativeness: f64,
}

impl OracleSummary {
    pub fn of(e: &GridExtrema, resolution: f64) -> Self {
        let (prediction, uninformativeness) = crate::solver::combine(e.min, e.max);
        OracleSummary {
            resolution,
            total_points: e.total_points,
            feasible_points: e.feasible_points,
            min: e.min,
            max: e.max,
            argmin: RewardSummary::of(&e.argmin),
            argmax: RewardSummary::of(&e.argmax),
            prediction,
            uninformativeness,
        }
    }
}

pub fn solve_summary(loaded: &LoadedProblem, report: &SolveReport) -> Result<SolveSummary> {
    let ext = |e: &Extremum| -> Result<ExtremumSummary> {
        let values = loaded.exact_constraints.values(&e.reward)?;
        Ok(ExtremumSummary {
            value: e.value,
            reward: RewardSummary::of(&e.reward),
            max_violation: values.into_iter().fold(0.0, f64::max),
        })
    };
    Ok(SolveSummary {
        min: ext(&report.min)?,
        max: ext(&report.max)?,
        prediction: report.prediction,
        uninformativeness: report.uninformativeness,
    })
}

#[derive(Serialize)]
struct TraceCsvRow {
    iter: usize,
    objective: f64,
    max_violation: f64,
    dual_norm: f64,
}

/// `iter,objective,max_violation,dual_norm`, one row per iterate.
pub fn write_trace(path: &Path, rows: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(TraceCsvRow {
            iter: r.iter,
            objective: r.objective,
            max_violation: r.max_violation,
            dual_norm: r.dual_norm,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `trace_min.csv` and `trace_max.csv` when the report carries traces.
pub fn write_traces(dir: &Path, report: &SolveReport) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for e in [&report.min, &report.max] {
        if let Some(rows) = &e.trace {
            let path = dir.join(format!("trace_{}.csv", e.direction.name()));
            write_trace(&path, rows)?;
            out.push(path);
        }
    }
    Ok(out)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

#[derive(Serialize)]
struct Timing {
    wall_seconds: f64,
}

pub fn write_timing(dir: &Path, seconds: f64) -> Result<()> {
    write_json(
        &dir.join("timing.json"),
        &Timing {
            wall_seconds: seconds,
        },
    )
}
