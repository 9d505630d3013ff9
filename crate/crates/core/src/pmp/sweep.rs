use serde::Serialize;

use super::{optimality_update_with, solve_adjoint_with};
use crate::distkernel::DistributionKernel;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::expr::Expr;
use crate::fde::{evaluate_objective_with, solve_forward_with, BoundaryMode, ProblemSpec, TrajectoryBundle};
use crate::fracops::{distributed_matrix_with, OperatorKind, SampledFn};
use crate::grid::Grid;

/// Forward–backward sweep settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepParams {
    /// Relaxation `u ← θ u_new + (1 − θ) u_old`, `0 < θ ≤ 1`.
    pub theta: f64,
    /// Stop once `sup |u_new − u_old| ≤ tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// Initial control, one expression in `t` per component.
    pub u0: Vec<Expr>,
}

impl SweepParams {
    pub fn new(theta: f64, tol: f64, max_iter: usize, u0: Vec<Expr>) -> Result<Self> {
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(Error::invalid(format!("relaxation must be in (0, 1], got {theta}")));
        }
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(Error::invalid(format!("tolerance must be positive, got {tol}")));
        }
        if max_iter == 0 {
            return Err(Error::invalid("max_iter must be at least 1"));
        }
        Ok(SweepParams { theta, tol, max_iter, u0 })
    }

    /// θ = 0.5, tol = 1e−8, 200 iterations, u⁰ ≡ 0.
    pub fn defaults(m: usize) -> Self {
        SweepParams {
            theta: 0.5,
            tol: 1e-8,
            max_iter: 200,
            u0: vec![Expr::Num(0.0); m],
        }
    }
}

/// One sweep: the control change it produced and `J` at its start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRecord {
    pub iteration: usize,
    pub control_change: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SweepLog {
    pub records: Vec<SweepRecord>,
}

impl SweepLog {
    /// One JSON object per line.
    pub fn to_json_lines(&self) -> String {
        self.records
            .iter()
            .map(|r| serde_json_line(r) + "\n")
            .collect()
    }
}

fn serde_json_line(r: &SweepRecord) -> String {
    format!(
        "{{\"iteration\":{},\"control_change\":{:e},\"objective\":{:e}}}",
        r.iteration, r.control_change, r.objective
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    /// State, control, adjoint and `J`, recomputed from the returned control.
    pub bundle: TrajectoryBundle,
    pub log: SweepLog,
    pub converged: bool,
}

impl SweepOutcome {
    pub fn iterations(&self) -> usize {
        self.log.records.len()
    }
}

pub fn fbsm_solve(p: &ProblemSpec, kernel: &DistributionKernel, grid: &Grid, params: &SweepParams) -> Result<SweepOutcome> {
    fbsm_solve_with(p, kernel, grid, params, Exec::default())
}

/// Iterates forward solve, adjoint solve, optimality update and relaxation.
/// Without convergence the control with the smallest recorded change is
/// returned with `converged = false`.
pub fn fbsm_solve_with(
    p: &ProblemSpec,
    kernel: &DistributionKernel,
    grid: &Grid,
    params: &SweepParams,
    exec: Exec,
) -> Result<SweepOutcome> {
    let params = SweepParams::new(params.theta, params.tol, params.max_iter, params.u0.clone())?;
    if !matches!(p.boundary(), BoundaryMode::InitialFixed(_)) {
        return Err(Error::invalid("the sweep needs an initial condition on the state"));
    }
    if params.u0.len() != p.control_dim() {
        return Err(Error::DimensionMismatch(format!(
            "initial guess has {} components, m = {}",
            params.u0.len(),
            p.control_dim()
        )));
    }
    let mut u = sample_time_exprs(p, grid, &params.u0)?;
    let a = distributed_matrix_with(OperatorKind::DistributedCaputoLeft, kernel, grid, exec)?;

    let mut log = SweepLog::default();
    let mut best: Option<(f64, SampledFn)> = None;
    let mut converged = false;
    for iteration in 1..=params.max_iter {
        let x = solve_forward_with(p, &a, &u)?;
        let lambda = solve_adjoint_with(p, &a, &x, &u, exec)?;
        let u_new = optimality_update_with(p, &x, &lambda, &u, exec)?;
        let change = u_new.sup_distance(&u);
        let objective = evaluate_objective_with(p, &TrajectoryBundle::new(x, u.clone(), None)?, exec)?;
        log.records.push(SweepRecord {
            iteration,
            control_change: change,
            objective,
        });
        if !change.is_finite() {
            break;
        }
        let relaxed = relax(&u, &u_new, params.theta)?;
        if best.as_ref().is_none_or(|(c, _)| change < *c) {
            best = Some((change, relaxed.clone()));
        }
        u = relaxed;
        if change <= params.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        if let Some((_, b)) = best {
            u = b;
        }
    }
    let x = solve_forward_with(p, &a, &u)?;
    let lambda = solve_adjoint_with(p, &a, &x, &u, exec)?;
    let mut bundle = TrajectoryBundle::new(x, u, Some(lambda))?;
    bundle.objective = Some(evaluate_objective_with(p, &bundle, exec)?);
    Ok(SweepOutcome { bundle, log, converged })
}

fn relax(old: &SampledFn, new: &SampledFn, theta: f64) -> Result<SampledFn> {
    let comps = old
        .components()
        .iter()
        .zip(new.components())
        .map(|(o, n)| o.iter().zip(n).map(|(a, b)| theta * b + (1.0 - theta) * a).collect())
        .collect();
    SampledFn::new(*old.grid(), comps)
}

/// Samples expressions in `t` on the grid, with endpoint limits.
pub(crate) fn sample_time_exprs(p: &ProblemSpec, grid: &Grid, exprs: &[Expr]) -> Result<SampledFn> {
    let compiled = exprs
        .iter()
        .map(|e| e.compile(&["t"]).map_err(|err| Error::expr("initial control", err)))
        .collect::<Result<Vec<_>>>()?;
    let mut comps = vec![Vec::with_capacity(grid.len()); exprs.len()];
    for t in grid.nodes() {
        let v = p
            .eval_at(&[t], |q| compiled.iter().map(|c| c.value(q)).collect())
            .map_err(|e| Error::expr(format!("initial control at t = {t}"), e))?;
        for (c, x) in comps.iter_mut().zip(v) {
            c.push(x);
        }
    }
    SampledFn::new(*grid, comps)
}
