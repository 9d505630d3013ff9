//! Forward state equation `ᶜ𝔻ψ_{a+} x = f(t, x, u)`, its linearization, and
//! the objective functional.
//!
//! Time stepping is implicit: row `i` of the distributed Caputo matrix `A`
//! splits into the diagonal `dᵢ = A[i][i]` and the history
//! `Hᵢ = Σ_{k<i} A[i][k] x_k`, and each step solves
//! `dᵢ xᵢ − f(tᵢ, xᵢ, uᵢ) = −Hᵢ` by damped Newton.

mod problem;

pub use problem::{compile_problem_expr, BoundaryMode, ProblemSpec, Reference};

use serde::Serialize;

use crate::distkernel::DistributionKernel;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::fracops::{distributed_matrix, OperatorKind, OperatorMatrix, SampledFn};
use crate::grid::Grid;
use crate::linalg::solve_dense;

/// Newton stopping tolerance (relative).
pub const NEWTON_TOL: f64 = 1e-12;
/// Newton iteration cap per time step.
pub const NEWTON_MAX_ITER: usize = 50;

/// Sampled state, control, optional adjoint, and optional objective value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryBundle {
    pub grid: Grid,
    pub x: SampledFn,
    pub u: SampledFn,
    pub lambda: Option<SampledFn>,
    /// `Some` once evaluated by [`evaluate_objective`].
    pub objective: Option<f64>,
}

impl TrajectoryBundle {
    pub fn new(x: SampledFn, u: SampledFn, lambda: Option<SampledFn>) -> Result<Self> {
        let grid = *x.grid();
        if u.grid() != &grid || lambda.as_ref().is_some_and(|l| l.grid() != &grid) {
            return Err(Error::DimensionMismatch("bundle components use different grids".into()));
        }
        if lambda.as_ref().is_some_and(|l| l.dim() != x.dim()) {
            return Err(Error::DimensionMismatch("adjoint and state dimensions differ".into()));
        }
        Ok(TrajectoryBundle { grid, x, u, lambda, objective: None })
    }

    /// Checks dimensions and grid against a problem.
    pub fn check_against(&self, p: &ProblemSpec) -> Result<()> {
        if self.x.dim() != p.state_dim() || self.u.dim() != p.control_dim() {
            return Err(Error::DimensionMismatch(format!(
                "bundle has (n, m) = ({}, {}), problem has ({}, {})",
                self.x.dim(),
                self.u.dim(),
                p.state_dim(),
                p.control_dim()
            )));
        }
        let (a, b) = p.interval();
        let scale = b - a;
        if (self.grid.a() - a).abs() > 1e-9 * scale || (self.grid.b() - b).abs() > 1e-9 * scale {
            return Err(Error::DimensionMismatch(format!(
                "bundle grid [{}, {}] does not match the problem interval [{a}, {b}]",
                self.grid.a(),
                self.grid.b()
            )));
        }
        Ok(())
    }
}

fn check_inputs(p: &ProblemSpec, a: &OperatorMatrix, u: &SampledFn) -> Result<Vec<f64>> {
    if !a.is_lower() {
        return Err(Error::invalid("forward marching needs a left-sided operator"));
    }
    if u.grid() != a.grid() {
        return Err(Error::DimensionMismatch("control and operator use different grids".into()));
    }
    if u.dim() != p.control_dim() {
        return Err(Error::DimensionMismatch(format!(
            "control has {} components, problem has m = {}",
            u.dim(),
            p.control_dim()
        )));
    }
    let (lo, hi) = p.interval();
    let g = a.grid();
    if (g.a() - lo).abs() > 1e-9 * (hi - lo) || (g.b() - hi).abs() > 1e-9 * (hi - lo) {
        return Err(Error::DimensionMismatch("grid does not span the problem interval".into()));
    }
    match p.boundary() {
        BoundaryMode::InitialFixed(x0) => Ok(x0.clone()),
        other => Err(Error::invalid(format!(
            "forward integration needs an initial condition, boundary mode is '{}'",
            other.name()
        ))),
    }
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// History term `Σ_{k<i} A[i][k] x_j[k]` for every component `j`.
fn history(a: &OperatorMatrix, xs: &[Vec<f64>], i: usize) -> Vec<f64> {
    let row = a.row(i);
    xs.iter().map(|c| (0..i).map(|k| row[k] * c[k]).sum()).collect()
}

/// Forward solve with the distributed Caputo matrix built from `kernel`.
pub fn solve_forward(p: &ProblemSpec, kernel: &DistributionKernel, grid: &Grid, u: &SampledFn) -> Result<SampledFn> {
    let a = distributed_matrix(OperatorKind::DistributedCaputoLeft, kernel, grid)?;
    solve_forward_with(p, &a, u)
}

/// Forward solve with a prebuilt left-sided operator matrix.
pub fn solve_forward_with(p: &ProblemSpec, a: &OperatorMatrix, u: &SampledFn) -> Result<SampledFn> {
    let x0 = check_inputs(p, a, u)?;
    let grid = *a.grid();
    let n = p.state_dim();
    let mut xs: Vec<Vec<f64>> = x0.iter().map(|&v| vec![v; grid.len()]).collect();
    for i in 1..grid.len() {
        let t = grid.node(i);
        let hist = history(a, &xs, i);
        let guess: Vec<f64> = (0..n).map(|j| xs[j][i - 1]).collect();
        let xi = newton_step(p, a.get(i, i), &hist, t, &u.at(i), guess).map_err(|e| match e {
            Error::Expr { .. } => e,
            _ => Error::NewtonFailure { step: i, t },
        })?;
        for (j, v) in xi.into_iter().enumerate() {
            xs[j][i] = v;
        }
    }
    SampledFn::new(grid, xs)
}

/// Solves `d·x − f(t, x, u) + hist = 0` by damped Newton.
fn newton_step(p: &ProblemSpec, d: f64, hist: &[f64], t: f64, u: &[f64], mut x: Vec<f64>) -> Result<Vec<f64>> {
    let n = x.len();
    let residual = |x: &[f64]| -> Result<Vec<f64>> {
        let f = p.dynamics_value(t, x, u)?;
        Ok((0..n).map(|j| d * x[j] - f[j] + hist[j]).collect())
    };
    let mut r = residual(&x)?;
    for _ in 0..NEWTON_MAX_ITER {
        let rn = sup(&r);
        if rn <= NEWTON_TOL * d.abs().max(1.0) * (1.0 + sup(&x)) {
            return Ok(x);
        }
        let (fx, _) = p.dynamics_jacobian(t, &x, u)?;
        let mut jac: Vec<f64> = fx.iter().map(|v| -v).collect();
        for j in 0..n {
            jac[j * n + j] += d;
        }
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let delta = solve_dense(n, &jac, &rhs, 0)?;

        let mut step = 1.0;
        let (x_new, r_new) = loop {
            let trial: Vec<f64> = x.iter().zip(&delta).map(|(a, b)| a + step * b).collect();
            match residual(&trial) {
                Ok(rt) if sup(&rt) < rn || step < 1e-6 => break (trial, rt),
                Err(e) if step < 1e-6 => return Err(e),
                _ => step *= 0.5,
            }
        };
        let moved = step * sup(&delta);
        x = x_new;
        r = r_new;
        if moved <= NEWTON_TOL * (1.0 + sup(&x)) {
            return Ok(x);
        }
    }
    Err(Error::NonConvergence {
        what: "Newton",
        detail: format!("t = {t}"),
    })
}

/// Solves `ᶜ𝔻ψ η = f_x η + f_u h`, `η(a) = 0`, along `base`.
pub fn solve_variational(
    p: &ProblemSpec,
    kernel: &DistributionKernel,
    grid: &Grid,
    base: &TrajectoryBundle,
    hdir: &SampledFn,
) -> Result<SampledFn> {
    let a = distributed_matrix(OperatorKind::DistributedCaputoLeft, kernel, grid)?;
    solve_variational_with(p, &a, base, hdir, Exec::default())
}

/// [`solve_variational`] with a prebuilt matrix. Jacobians along the base
/// trajectory are evaluated per node under `exec`; the marching is
/// sequential.
pub fn solve_variational_with(
    p: &ProblemSpec,
    a: &OperatorMatrix,
    base: &TrajectoryBundle,
    hdir: &SampledFn,
    exec: Exec,
) -> Result<SampledFn> {
    check_inputs(p, a, &base.u)?;
    base.check_against(p)?;
    if hdir.grid() != a.grid() || base.grid != *a.grid() || hdir.dim() != p.control_dim() {
        return Err(Error::DimensionMismatch("direction, base and operator must share grid and control dimension".into()));
    }
    let grid = *a.grid();
    let (n, m) = (p.state_dim(), p.control_dim());
    let jacobians = exec.try_map_range(grid.len(), |i| p.dynamics_jacobian(grid.node(i), &base.x.at(i), &base.u.at(i)))?;

    let mut eta: Vec<Vec<f64>> = vec![vec![0.0; grid.len()]; n];
    for i in 1..grid.len() {
        let (fx, fu) = &jacobians[i];
        let hist = history(a, &eta, i);
        let hi = hdir.at(i);
        let d = a.get(i, i);
        let mut lhs: Vec<f64> = fx.iter().map(|v| -v).collect();
        for j in 0..n {
            lhs[j * n + j] += d;
        }
        let rhs: Vec<f64> = (0..n)
            .map(|j| -hist[j] + (0..m).map(|k| fu[j * m + k] * hi[k]).sum::<f64>())
            .collect();
        let sol = solve_dense(n, &lhs, &rhs, i)?;
        for (j, v) in sol.into_iter().enumerate() {
            eta[j][i] = v;
        }
    }
    SampledFn::new(grid, eta)
}

/// Composite trapezoid of `L(tᵢ, xᵢ, uᵢ)`.
pub fn evaluate_objective(p: &ProblemSpec, bundle: &TrajectoryBundle) -> Result<f64> {
    evaluate_objective_with(p, bundle, Exec::default())
}

pub fn evaluate_objective_with(p: &ProblemSpec, bundle: &TrajectoryBundle, exec: Exec) -> Result<f64> {
    bundle.check_against(p)?;
    let g = bundle.grid;
    let values = exec.try_map_range(g.len(), |i| p.lagrangian_value(g.node(i), &bundle.x.at(i), &bundle.u.at(i)))?;
    Ok(g.trapezoid(&values))
}

/// Solves the state equation for several controls, one solve per task.
pub fn solve_forward_batch(
    p: &ProblemSpec,
    a: &OperatorMatrix,
    controls: &[SampledFn],
    exec: Exec,
) -> Result<Vec<SampledFn>> {
    exec.try_map_range(controls.len(), |k| solve_forward_with(p, a, &controls[k]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn scalar_problem(l: &str, f: &str, psi: &str, x0: f64) -> ProblemSpec {
        ProblemSpec::new(
            parse(l).unwrap(),
            vec![parse(f).unwrap()],
            parse(psi).unwrap(),
            (0.0, 1.0),
            1,
            1,
            BoundaryMode::InitialFixed(vec![x0]),
            None,
        )
        .unwrap()
    }

    fn g_star(t: f64) -> f64 {
        if t == 0.0 {
            0.0
        } else if t == 1.0 {
            1.0
        } else {
            t * (t - 1.0) / t.ln()
        }
    }

    #[test]
    fn zero_dynamics_keep_initial_value() {
        let p = scalar_problem("0", "0", "1", 0.7);
        let g = Grid::new(0.0, 1.0, 50).unwrap();
        let k = DistributionKernel::build(p.psi(), 8).unwrap();
        let x = solve_forward(&p, &k, &g, &SampledFn::zeros(g, 1)).unwrap();
        assert!(x.component(0).iter().all(|&v| v == 0.7));
    }

    #[test]
    fn example1_forward_solve() {
        let p = scalar_problem("0", "u", "gamma(3-alpha)/2", 0.0);
        let g = Grid::new(0.0, 1.0, 2000).unwrap();
        let k = DistributionKernel::build(p.psi(), 20).unwrap();
        let u = SampledFn::from_fn(g, g_star).unwrap();
        let x = solve_forward(&p, &k, &g, &u).unwrap();
        let err = x.sup_distance(&SampledFn::from_fn(g, |t| t * t).unwrap());
        assert!(err <= 2e-2, "sup error {err}");
    }

    #[test]
    fn classical_exponential() {
        let p = scalar_problem("0", "x", "1", 1.0);
        let g = Grid::new(0.0, 1.0, 2000).unwrap();
        let k = DistributionKernel::degenerate(1.0).unwrap();
        let x = solve_forward(&p, &k, &g, &SampledFn::zeros(g, 1)).unwrap();
        assert!((x.component(0)[2000] - std::f64::consts::E).abs() < 5e-3);
    }

    #[test]
    fn nonlinear_newton_converges() {
        // x' = −x³, x(0) = 1 → x = 1/√(1 + 2t)
        let p = scalar_problem("0", "-x^3", "1", 1.0);
        let g = Grid::new(0.0, 1.0, 1000).unwrap();
        let k = DistributionKernel::degenerate(1.0).unwrap();
        let x = solve_forward(&p, &k, &g, &SampledFn::zeros(g, 1)).unwrap();
        assert!((x.component(0)[1000] - 1.0 / 3f64.sqrt()).abs() < 2e-3);
    }

    #[test]
    fn vector_state() {
        // x1' = x2, x2' = −x1 + u with u = 0 → cos / −sin
        let p = ProblemSpec::new(
            parse("0").unwrap(),
            vec![parse("x2").unwrap(), parse("-x1 + u1").unwrap()],
            parse("1").unwrap(),
            (0.0, 1.0),
            2,
            1,
            BoundaryMode::InitialFixed(vec![1.0, 0.0]),
            None,
        )
        .unwrap();
        let g = Grid::new(0.0, 1.0, 2000).unwrap();
        let k = DistributionKernel::degenerate(1.0).unwrap();
        let x = solve_forward(&p, &k, &g, &SampledFn::zeros(g, 1)).unwrap();
        assert!((x.component(0)[2000] - 1f64.cos()).abs() < 5e-3);
        assert!((x.component(1)[2000] + 1f64.sin()).abs() < 5e-3);
    }

    #[test]
    fn forward_rejects_bad_inputs() {
        let g = Grid::new(0.0, 1.0, 10).unwrap();
        let k = DistributionKernel::degenerate(0.5).unwrap();
        let p = scalar_problem("0", "u", "1", 0.0);
        assert!(matches!(
            solve_forward(&p, &k, &g, &SampledFn::zeros(g, 2)),
            Err(Error::DimensionMismatch(_))
        ));
        let terminal = p.with_boundary(BoundaryMode::TerminalFixed(vec![1.0])).unwrap();
        assert!(solve_forward(&terminal, &k, &g, &SampledFn::zeros(g, 1)).is_err());
        let blowup = scalar_problem("0", "1/(x-1)", "1", 1.0);
        assert!(matches!(
            solve_forward(&blowup, &k, &g, &SampledFn::zeros(g, 1)),
            Err(Error::Expr { .. }) | Err(Error::NewtonFailure { .. })
        ));
    }

    #[test]
    fn variational_trivial_cases() {
        let p = scalar_problem("0", "u", "gamma(3-alpha)/2", 0.0);
        let g = Grid::new(0.0, 1.0, 200).unwrap();
        let k = DistributionKernel::build(p.psi(), 20).unwrap();
        let u = SampledFn::from_fn(g, g_star).unwrap();
        let x = solve_forward(&p, &k, &g, &u).unwrap();
        let base = TrajectoryBundle::new(x, u, None).unwrap();
        let eta = solve_variational(&p, &k, &g, &base, &SampledFn::zeros(g, 1)).unwrap();
        assert!(eta.component(0).iter().all(|&v| v == 0.0));

        // f = u: η solves the same linear problem as x with control h
        let h = SampledFn::from_fn(g, |t| (3.0 * t).sin()).unwrap();
        let eta = solve_variational(&p, &k, &g, &base, &h).unwrap();
        let direct = solve_forward(&p, &k, &g, &h).unwrap();
        assert!(eta.sup_distance(&direct) < 1e-13);
    }

    #[test]
    fn objective_quadrature() {
        let g = Grid::new(0.0, 1.0, 1000).unwrap();
        let bundle = TrajectoryBundle::new(SampledFn::zeros(g, 1), SampledFn::zeros(g, 1), None).unwrap();
        let one = scalar_problem("1", "u", "1", 0.0);
        assert!((evaluate_objective(&one, &bundle).unwrap() - 1.0).abs() < 1e-12);
        let lin = scalar_problem("t", "u", "1", 0.0);
        assert!((evaluate_objective(&lin, &bundle).unwrap() - 0.5).abs() < 1e-12);

        let ex1 = scalar_problem("-(x - t^2)^2 - (u - t*(t-1)/ln(t))^2", "u", "1", 0.0);
        let g = Grid::new(0.0, 1.0, 2000).unwrap();
        let bundle = TrajectoryBundle::new(
            SampledFn::from_fn(g, |t| t * t).unwrap(),
            SampledFn::from_fn(g, g_star).unwrap(),
            None,
        )
        .unwrap();
        assert!(evaluate_objective(&ex1, &bundle).unwrap().abs() < 1e-6);
    }

    #[test]
    fn batch_matches_individual_solves() {
        let p = scalar_problem("0", "-x + u", "gamma(3-alpha)/2", 0.5);
        let g = Grid::new(0.0, 1.0, 100).unwrap();
        let k = DistributionKernel::build(p.psi(), 10).unwrap();
        let a = distributed_matrix(OperatorKind::DistributedCaputoLeft, &k, &g).unwrap();
        let controls: Vec<_> = (0..4)
            .map(|j| SampledFn::from_fn(g, move |t| (j as f64) * t).unwrap())
            .collect();
        let batch = solve_forward_batch(&p, &a, &controls, Exec::default()).unwrap();
        for (c, x) in controls.iter().zip(&batch) {
            assert_eq!(&solve_forward_with(&p, &a, c).unwrap(), x);
        }
    }
}
