use std::path::{Path, PathBuf};

use docsolve::fracops::{distributed_matrix, single_order_matrix};
use docsolve::mangasarian::{sufficiency_report, SampleBox, Tolerances, Verdict};
use docsolve::pmp::{fbsm_solve, pmp_residuals, PmpResidualReport};
use docsolve::specfun::gronwall_envelope;
use docsolve::{DistributionKernel, OperatorKind, SampledFn, TrajectoryBundle};
use serde::Serialize;

use crate::csvio::{read_function, read_trajectory, write_function, write_trajectory};
use crate::problem_file::{LoadedProblem, ProblemFile};
use crate::CliError;

fn load(path: &Path) -> Result<LoadedProblem, CliError> {
    ProblemFile::read(path)?.load()
}

fn internal(e: docsolve::Error) -> CliError {
    CliError::Internal(e.to_string())
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| CliError::Internal(e.to_string()))
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

#[derive(Serialize)]
struct SolveSummary {
    converged: bool,
    iterations: usize,
    objective: f64,
    residuals: PmpResidualReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    certificate: Option<docsolve::mangasarian::ConcavityCertificate>,
}

/// Runs the sweep and writes `<prefix>-trajectory.csv`,
/// `<prefix>-summary.json` and `<prefix>-log.jsonl`.
pub fn solve(problem: &Path, prefix: &Path, sufficiency: bool) -> Result<bool, CliError> {
    let p = load(problem)?;
    let out = fbsm_solve(&p.spec, &p.kernel, &p.grid, &p.sweep).map_err(internal)?;
    let residuals = pmp_residuals(&p.spec, &p.kernel, &p.grid, &out.bundle).map_err(internal)?;
    let certificate = if sufficiency {
        Some(sufficiency_report(&p.spec, &out.bundle, None, Tolerances::default()).map_err(internal)?)
    } else {
        None
    };
    let summary = SolveSummary {
        converged: out.converged,
        iterations: out.iterations(),
        objective: out.bundle.objective.unwrap_or(f64::NAN),
        residuals,
        certificate,
    };
    write_trajectory(&with_suffix(prefix, "-trajectory.csv"), &out.bundle)?;
    write_text(&with_suffix(prefix, "-summary.json"), &to_json(&summary)?)?;
    write_text(&with_suffix(prefix, "-log.jsonl"), &out.log.to_json_lines())?;
    Ok(out.converged)
}

fn load_with_trajectory(problem: &Path, trajectory: &Path) -> Result<(LoadedProblem, TrajectoryBundle), CliError> {
    let p = load(problem)?;
    let bundle = read_trajectory(trajectory, p.spec.state_dim(), p.spec.control_dim())?;
    if bundle.grid != p.grid {
        return Err(CliError::Input(format!(
            "trajectory grid [{}, {}] with N = {} does not match the problem grid [{}, {}] with N = {}",
            bundle.grid.a(),
            bundle.grid.b(),
            bundle.grid.intervals(),
            p.grid.a(),
            p.grid.b(),
            p.grid.intervals()
        )));
    }
    Ok((p, bundle))
}

/// Prints the residual report; true when every residual is at most `tol`.
pub fn residual(problem: &Path, trajectory: &Path, tol: f64) -> Result<bool, CliError> {
    let (p, bundle) = load_with_trajectory(problem, trajectory)?;
    let report = pmp_residuals(&p.spec, &p.kernel, &p.grid, &bundle).map_err(internal)?;
    print!("{}", to_json(&report)?);
    Ok(report.all_below(tol))
}

pub struct SufficiencyOptions {
    pub tol_psd: f64,
    pub tol_lambda: f64,
    pub samples: usize,
    pub inflation: f64,
}

/// Prints the certificate; true when certified.
pub fn sufficiency(problem: &Path, trajectory: &Path, opts: &SufficiencyOptions) -> Result<bool, CliError> {
    let (p, bundle) = load_with_trajectory(problem, trajectory)?;
    let sbox = SampleBox::around(&bundle, opts.inflation, opts.samples).map_err(|e| CliError::Input(e.to_string()))?;
    let tol = Tolerances {
        psd: opts.tol_psd,
        lambda: opts.tol_lambda,
    };
    let cert = sufficiency_report(&p.spec, &bundle, Some(sbox), tol).map_err(internal)?;
    print!("{}", to_json(&cert)?);
    Ok(cert.verdict == Verdict::Certified)
}

/// Writes `(x*, u*, λ*)` sampled on the problem grid.
pub fn reference(problem: &Path, output: &Path) -> Result<(), CliError> {
    let p = load(problem)?;
    let (n, m) = (p.spec.state_dim(), p.spec.control_dim());
    let mut comps = vec![Vec::with_capacity(p.grid.len()); 2 * n + m];
    for t in p.grid.nodes() {
        let (x, u, l) = p
            .spec
            .reference_at(t)
            .ok_or_else(|| CliError::Input("problem file has no reference triple".into()))?
            .map_err(|e| CliError::Input(e.to_string()))?;
        for (c, v) in comps.iter_mut().zip(x.into_iter().chain(u).chain(l)) {
            c.push(v);
        }
    }
    let input = |e: docsolve::Error| CliError::Input(e.to_string());
    let lambda = comps.split_off(n + m);
    let u = comps.split_off(n);
    let bundle = TrajectoryBundle::new(
        SampledFn::new(p.grid, comps).map_err(input)?,
        SampledFn::new(p.grid, u).map_err(input)?,
        Some(SampledFn::new(p.grid, lambda).map_err(input)?),
    )
    .map_err(input)?;
    write_trajectory(output, &bundle)
}

pub struct OperatorOptions {
    pub kind: String,
    pub psi: Option<String>,
    pub alpha: Option<f64>,
    pub nodes: usize,
    pub input: PathBuf,
    pub output: PathBuf,
}

pub fn operator(opts: &OperatorOptions) -> Result<(), CliError> {
    let kind = OperatorKind::from_cli_name(&opts.kind)
        .ok_or_else(|| CliError::Input(format!("unknown operator kind '{}'", opts.kind)))?;
    let (grid, values) = read_function(&opts.input)?;
    let input = |e: docsolve::Error| CliError::Input(e.to_string());
    let matrix = if kind.is_distributed() {
        if opts.alpha.is_some() {
            return Err(CliError::Input(format!("'{}' takes --psi, not --alpha", opts.kind)));
        }
        let src = opts
            .psi
            .as_deref()
            .ok_or_else(|| CliError::Input(format!("'{}' needs --psi", opts.kind)))?;
        let psi = docsolve::expr::parse(src).map_err(|e| CliError::Input(format!("psi: {e}")))?;
        let kernel = DistributionKernel::build(&psi, opts.nodes).map_err(input)?;
        distributed_matrix(kind, &kernel, &grid).map_err(input)?
    } else {
        if opts.psi.is_some() {
            return Err(CliError::Input(format!("'{}' takes --alpha, not --psi", opts.kind)));
        }
        let alpha = opts
            .alpha
            .ok_or_else(|| CliError::Input(format!("'{}' needs --alpha", opts.kind)))?;
        single_order_matrix(kind, alpha, &grid).map_err(input)?
    };
    write_function(&opts.output, "value", &grid, &matrix.apply(&values))
}

pub fn gronwall(alpha: f64, a_path: &Path, b_path: &Path, output: &Path) -> Result<(), CliError> {
    let (ga, a) = read_function(a_path)?;
    let (gb, b) = read_function(b_path)?;
    if ga != gb {
        return Err(CliError::Input("a and b are sampled on different grids".into()));
    }
    let env = gronwall_envelope(&a, &b, alpha, &ga).map_err(|e| CliError::Input(e.to_string()))?;
    eprintln!(
        "series terms: {}, largest relative tail: {:e}",
        env.truncation_index, env.max_relative_tail
    );
    write_function(output, "envelope", &ga, &env.values)
}
