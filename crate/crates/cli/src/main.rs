//! Command-line front end: parameter files in, CSV and JSON out.
//!
//! Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 I/O error.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use fractal_spectra::{Interpolation, Side};

use crate::commands::{CountingArgs, EigenArgs};
use crate::error::{CliError, EXIT_VALIDATION};

const THREADS_VAR: &str = "FRACTAL_SPECTRA_THREADS";

#[derive(Parser)]
#[command(
    name = "fractal-spectra",
    version,
    about = "Spectra of Sturm-Liouville problems with self-similar weights"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fixed-point values, moments, spectral order and arithmetic type as JSON.
    Meta {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// First eigenvalues on both rays with ratios n / |λ_n|^{D/2}.
    Table1 {
        #[arg(long)]
        params: PathBuf,
        #[arg(long, default_value_t = 12)]
        count: usize,
        #[arg(long, default_value_t = 12)]
        depth_max: usize,
        #[arg(long, default_value_t = 0.005)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// First eigenvalues on one ray.
    Eigen {
        #[arg(long)]
        params: PathBuf,
        #[arg(long, default_value = "pos")]
        side: Side,
        #[arg(long, default_value_t = 12)]
        count: usize,
        /// Fixed depth; refine until converged when absent.
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long, default_value_t = 12)]
        depth_max: usize,
        #[arg(long, default_value_t = 0.005)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Counting function on a log-spaced grid.
    Counting {
        #[arg(long)]
        params: PathBuf,
        #[arg(long, default_value = "pos")]
        side: Side,
        #[arg(long, default_value_t = 1e2)]
        lmin: f64,
        #[arg(long, default_value_t = 1e7)]
        lmax: f64,
        #[arg(long, default_value_t = 400)]
        points: usize,
        /// Mesh depth; largest depth within ~5·10⁵ cells when absent.
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Amplitude estimates from counting CSV files.
    SEstimate {
        /// Counting CSV; repeat once per ray.
        #[arg(long, required = true)]
        series: Vec<PathBuf>,
        #[arg(long)]
        meta: PathBuf,
        #[arg(long, default_value = "0,1")]
        phases: String,
        #[arg(long)]
        phase_tol: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Discrete two-component recursion with integer lags.
    RenewalDiscrete {
        #[arg(long)]
        system: PathBuf,
        #[arg(long, default_value_t = 400)]
        n_max: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Lattice system solved on phase fibres.
    RenewalLattice {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        phases: Option<String>,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Real-delay system by time marching.
    RenewalNonarith {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        step: Option<f64>,
        /// Delay interpolation; `linear` keeps non-negative forcing non-negative.
        #[arg(long, value_enum)]
        interpolation: Option<Interp>,
        /// Write every `stride`-th grid point.
        #[arg(long, default_value_t = 1)]
        stride: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Interp {
    Cubic,
    Linear,
}

impl From<Interp> for Interpolation {
    fn from(i: Interp) -> Self {
        match i {
            Interp::Cubic => Interpolation::Cubic,
            Interp::Linear => Interpolation::Linear,
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::Validation(format!(
            "{THREADS_VAR} must be a positive integer, got {raw:?}"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Validation(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Meta { params, out } => commands::meta(&params, out.as_deref()),
        Command::Table1 {
            params,
            count,
            depth_max,
            tol,
            out,
        } => commands::table1(&params, count, depth_max, tol, out.as_deref()),
        Command::Eigen {
            params,
            side,
            count,
            depth,
            depth_max,
            tol,
            out,
        } => commands::eigen(
            &params,
            &EigenArgs {
                side,
                count,
                depth,
                depth_max,
                tol,
            },
            out.as_deref(),
        ),
        Command::Counting {
            params,
            side,
            lmin,
            lmax,
            points,
            depth,
            out,
        } => commands::counting(
            &params,
            &CountingArgs {
                side,
                lmin,
                lmax,
                points,
                depth,
            },
            out.as_deref(),
        ),
        Command::SEstimate {
            series,
            meta,
            phases,
            phase_tol,
            out,
        } => commands::s_estimate(&series, &meta, &phases, phase_tol, out.as_deref()),
        Command::RenewalDiscrete { system, n_max, out } => {
            commands::renewal_discrete(&system, n_max, out.as_deref())
        }
        Command::RenewalLattice {
            system,
            phases,
            horizon,
            out,
        } => commands::renewal_lattice(&system, phases.as_deref(), horizon, out.as_deref()),
        Command::RenewalNonarith {
            system,
            step,
            interpolation,
            stride,
            out,
        } => commands::renewal_nonarith(
            &system,
            step,
            interpolation.map(Interpolation::from),
            stride,
            out.as_deref(),
        ),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{report}");
            ExitCode::from(e.exit_code())
        }
    }
}
