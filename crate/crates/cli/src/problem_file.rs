//! JSON problem files.

use std::path::Path;

use docsolve::expr::{parse, Expr};
use docsolve::fde::Reference;
use docsolve::pmp::SweepParams;
use docsolve::{BoundaryMode, DistributionKernel, Grid, ProblemSpec};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    /// Free-form note, ignored.
    #[serde(default, rename = "comment")]
    pub _comment: Option<String>,
    pub interval: Interval,
    pub dims: Dims,
    pub expressions: Expressions,
    pub boundary: Boundary,
    pub grid: GridSpec,
    pub kernel: KernelSpec,
    pub sweep: Sweep,
    #[serde(default)]
    pub reference: Option<ReferenceSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interval {
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dims {
    pub n: usize,
    pub m: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expressions {
    #[serde(rename = "L")]
    pub lagrangian: String,
    pub f: Vec<String>,
    pub psi: String,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Initial,
    Terminal,
    Free,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Boundary {
    pub mode: Mode,
    #[serde(default)]
    pub values: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(rename = "N")]
    pub intervals: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    #[serde(rename = "M")]
    pub nodes: usize,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(String),
    Many(Vec<String>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub theta: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// One expression in `t` per control component; a single string is
    /// used for every component.
    pub u0: OneOrMany,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSpec {
    pub x_star: Vec<String>,
    pub u_star: Vec<String>,
    pub lambda_star: Vec<String>,
}

/// A validated problem file with every object the commands need.
pub struct LoadedProblem {
    pub spec: ProblemSpec,
    pub kernel: DistributionKernel,
    pub grid: Grid,
    pub sweep: SweepParams,
}

fn expr(src: &str, what: &str) -> Result<Expr, CliError> {
    parse(src).map_err(|e| CliError::Input(format!("{what}: {e}")))
}

fn exprs(srcs: &[String], what: &str) -> Result<Vec<Expr>, CliError> {
    srcs.iter()
        .enumerate()
        .map(|(i, s)| expr(s, &format!("{what}[{}]", i + 1)))
        .collect()
}

impl ProblemFile {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }

    /// Parses every expression and checks every invariant.
    pub fn load(&self) -> Result<LoadedProblem, CliError> {
        let input = |e: docsolve::Error| CliError::Input(e.to_string());
        let lagrangian = expr(&self.expressions.lagrangian, "L")?;
        let dynamics = exprs(&self.expressions.f, "f")?;
        let psi = expr(&self.expressions.psi, "psi")?;
        let boundary = match self.boundary.mode {
            Mode::Initial => BoundaryMode::InitialFixed(self.boundary.values.clone()),
            Mode::Terminal => BoundaryMode::TerminalFixed(self.boundary.values.clone()),
            Mode::Free => {
                if !self.boundary.values.is_empty() {
                    return Err(CliError::Input("boundary mode 'free' takes no values".into()));
                }
                BoundaryMode::Free
            }
        };
        let reference = match &self.reference {
            None => None,
            Some(r) => Some(Reference {
                x_star: exprs(&r.x_star, "x_star")?,
                u_star: exprs(&r.u_star, "u_star")?,
                lambda_star: exprs(&r.lambda_star, "lambda_star")?,
            }),
        };
        let spec = ProblemSpec::new(
            lagrangian,
            dynamics,
            psi,
            (self.interval.a, self.interval.b),
            self.dims.n,
            self.dims.m,
            boundary,
            reference,
        )
        .map_err(input)?;
        let grid = Grid::new(self.interval.a, self.interval.b, self.grid.intervals).map_err(input)?;
        let kernel = DistributionKernel::build(spec.psi(), self.kernel.nodes).map_err(input)?;
        let u0 = match &self.sweep.u0 {
            OneOrMany::One(s) => vec![expr(s, "u0")?; self.dims.m],
            OneOrMany::Many(v) => exprs(v, "u0")?,
        };
        let sweep = SweepParams::new(self.sweep.theta, self.sweep.tol, self.sweep.max_iter, u0).map_err(input)?;
        if sweep.u0.len() != self.dims.m {
            return Err(CliError::Input(format!("u0 has {} entries, m = {}", sweep.u0.len(), self.dims.m)));
        }
        for e in &sweep.u0 {
            e.compile(&["t"]).map_err(|err| CliError::Input(format!("u0: {err}")))?;
        }
        Ok(LoadedProblem { spec, kernel, grid, sweep })
    }
}
