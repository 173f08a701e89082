//! `robrel`: solve, validate and extend robust reward-learning problems.
//!
//! Exit codes: 0 on success, 1 for invalid or infeasible problems, 2 for I/O failures.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use robrel::commands::{self, CommonArgs, GainBackend, DEFAULT_GRID_RESOLUTION};
use robrel::specfile::HyperOverrides;
use robrel::Error;

#[derive(Parser)]
#[command(
    name = "robrel",
    version,
    about = "Robust prediction of policy-preference gaps from feedback"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the primal-dual solver on a problem spec.
    Solve {
        #[arg(long)]
        spec: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Compare the solver against brute-force grid extrema.
    Oracle {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = DEFAULT_GRID_RESOLUTION)]
        grid_res: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Built-in experiments.
    Experiment {
        #[command(subcommand)]
        which: Experiment,
    },
    /// Reduction in uninformativeness from one extra feedback.
    Infogain {
        #[arg(long)]
        spec: PathBuf,
        /// JSON file with one feedback entry in spec syntax.
        #[arg(long)]
        extra: PathBuf,
        #[arg(long, value_enum, default_value_t = Backend::Solver)]
        backend: Backend,
        #[arg(long, default_value_t = DEFAULT_GRID_RESOLUTION)]
        grid_res: f64,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Subcommand)]
enum Experiment {
    /// The three-lane road with its reference feedback.
    Lanes {
        #[arg(long, default_value_t = DEFAULT_GRID_RESOLUTION)]
        grid_res: f64,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    Solver,
    Oracle,
}

#[derive(Args)]
struct Common {
    /// Iteration count K.
    #[arg(long)]
    iters: Option<usize>,
    /// Step size.
    #[arg(long)]
    alpha: Option<f64>,
    /// Radius of the multiplier ball.
    #[arg(long)]
    dual_radius: Option<f64>,
    /// Target accuracy used to derive missing hyperparameters.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Slater margin used to derive missing hyperparameters.
    #[arg(long)]
    xi: Option<f64>,
    /// Seed for estimated-mode sampling.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, env = "ROBREL_OUT_DIR", default_value = "robrel-out")]
    out_dir: PathBuf,
    /// Also write per-iteration CSV traces.
    #[arg(long)]
    trace: bool,
}

impl From<Common> for CommonArgs {
    fn from(c: Common) -> Self {
        CommonArgs {
            overrides: HyperOverrides {
                iters: c.iters,
                alpha: c.alpha,
                dual_radius: c.dual_radius,
                epsilon: c.epsilon,
                xi: c.xi,
            },
            seed: c.seed,
            out_dir: c.out_dir,
            trace: c.trace,
        }
    }
}

fn run(cli: Cli) -> robrel::Result<String> {
    match cli.command {
        Command::Solve { spec, common } => {
            let out = commands::run_solve(&spec, &common.into())?;
            Ok(serde_json::to_string_pretty(&out)?)
        }
        Command::Oracle {
            spec,
            grid_res,
            common,
        } => {
            let out = commands::run_oracle(&spec, grid_res, &common.into())?;
            Ok(serde_json::to_string_pretty(&out)?)
        }
        Command::Experiment {
            which: Experiment::Lanes { grid_res, common },
        } => {
            let out = commands::run_lanes(grid_res, &common.into())?;
            Ok(serde_json::to_string_pretty(&out)?)
        }
        Command::Infogain {
            spec,
            extra,
            backend,
            grid_res,
            common,
        } => {
            let backend = match backend {
                Backend::Solver => GainBackend::Solver,
                Backend::Oracle => GainBackend::Oracle,
            };
            let out = commands::run_infogain(&spec, &extra, backend, grid_res, &common.into())?;
            Ok(serde_json::to_string_pretty(&out)?)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::Spec { .. } = e {
                eprintln!("hint: see docs/spec-format.md for the problem-spec schema");
            }
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}
