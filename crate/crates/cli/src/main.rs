//! `docsolve` command-line front end.
//!
//! Exit codes: 0 success, 1 input error, 2 negative verdict
//! (non-convergence, residual above tolerance, certificate refused),
//! 3 internal failure.

mod commands;
mod csvio;
mod problem_file;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("input error: {0}")]
    Input(String),
    #[error("internal failure: {0}")]
    Internal(String),
}

#[derive(Parser)]
#[command(name = "docsolve", version, about = "Distributed-order fractional optimal control toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the forward-backward sweep on a problem file.
    Solve {
        problem: PathBuf,
        /// Output prefix for -trajectory.csv, -summary.json and -log.jsonl.
        #[arg(long, short)]
        out: PathBuf,
        /// Add the sufficiency certificate to the summary.
        #[arg(long)]
        sufficiency: bool,
    },
    /// Audit a trajectory against the necessary conditions.
    Residual {
        problem: PathBuf,
        trajectory: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        tol: f64,
    },
    /// Check the concavity and multiplier-sign hypotheses on a trajectory.
    Sufficiency {
        problem: PathBuf,
        trajectory: PathBuf,
        #[arg(long, default_value_t = docsolve::mangasarian::DEFAULT_TOL_PSD)]
        tol_psd: f64,
        #[arg(long, default_value_t = docsolve::mangasarian::DEFAULT_TOL_LAMBDA)]
        tol_lambda: f64,
        /// Samples per box axis.
        #[arg(long, default_value_t = docsolve::mangasarian::DEFAULT_SAMPLES)]
        samples: usize,
        /// Box widening relative to the observed ranges.
        #[arg(long, default_value_t = docsolve::mangasarian::DEFAULT_INFLATION)]
        inflation: f64,
    },
    /// Sample the problem's reference triple on its grid as a trajectory CSV.
    Reference {
        problem: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Apply a discrete fractional operator to a sampled function.
    Operator {
        /// e.g. caputo-left, rl-right, rl-int-left, dist-caputo-left
        #[arg(long)]
        kind: String,
        /// Order distribution, for dist-* kinds.
        #[arg(long)]
        psi: Option<String>,
        /// Order, for single-order kinds.
        #[arg(long)]
        alpha: Option<f64>,
        /// Quadrature nodes for psi.
        #[arg(long, default_value_t = docsolve::distkernel::DEFAULT_NODES)]
        nodes: usize,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Evaluate the fractional Gronwall envelope.
    Gronwall {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("DOCSOLVE_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Input(format!("DOCSOLVE_THREADS must be a positive integer, got '{value}'")))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Internal(e.to_string()))?;
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
    Ok(())
}

fn run(cli: Cli) -> Result<bool, CliError> {
    configure_threads()?;
    match cli.command {
        Command::Solve { problem, out, sufficiency } => commands::solve(&problem, &out, sufficiency),
        Command::Residual { problem, trajectory, tol } => commands::residual(&problem, &trajectory, tol),
        Command::Sufficiency {
            problem,
            trajectory,
            tol_psd,
            tol_lambda,
            samples,
            inflation,
        } => commands::sufficiency(
            &problem,
            &trajectory,
            &commands::SufficiencyOptions {
                tol_psd,
                tol_lambda,
                samples,
                inflation,
            },
        ),
        Command::Reference { problem, output } => commands::reference(&problem, &output).map(|()| true),
        Command::Operator {
            kind,
            psi,
            alpha,
            nodes,
            input,
            output,
        } => commands::operator(&commands::OperatorOptions {
            kind,
            psi,
            alpha,
            nodes,
            input,
            output,
        })
        .map(|()| true),
        Command::Gronwall { alpha, a, b, output } => commands::gronwall(alpha, &a, &b, &output).map(|()| true),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("docsolve: {e}");
            ExitCode::from(match e {
                CliError::Input(_) => 1,
                CliError::Internal(_) => 3,
            })
        }
    }
}
