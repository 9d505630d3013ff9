//! First-order necessary conditions: adjoint equation, transversality, and
//! stationarity of the Hamiltonian `H = L + λ·f` in `u`.
//!
//! The primary adjoint is the exact transpose of the discrete state
//! equation. With trapezoid weights `q` and the distributed Caputo matrix
//! `A`, stationarity of `Σ qᵢ Lᵢ + Σ_{i≥1} qᵢ λᵢ·(fᵢ − (A x)ᵢ)` in `x_k` gives
//!
//! ```text
//! (A_kk − f_xᵀ(t_k)) λ_k = L_x(t_k) − (1/q_k) Σ_{i>k} q_i A_ik λ_i
//! ```
//!
//! which is `Q⁻¹AᵀQ λ = ∂H/∂x` and is solved by back substitution. The
//! discrete transversality condition is built into the last rows.

mod sweep;

pub use sweep::{fbsm_solve, fbsm_solve_with, SweepLog, SweepOutcome, SweepParams, SweepRecord};

use serde::Serialize;

use crate::distkernel::DistributionKernel;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::fde::{BoundaryMode, ProblemSpec, TrajectoryBundle};
use crate::fracops::{distributed_matrix, OperatorKind, OperatorMatrix, SampledFn};
use crate::grid::Grid;
use crate::linalg::{condition_estimate, solve_dense};

/// Relative finite-difference step for `∂²H/∂u²`.
const HESSIAN_STEP: f64 = 1e-4;
/// Bracketing limit for the scalar fallback root search.
const BRACKET_LIMIT: f64 = 1e6;

fn check_samples(p: &ProblemSpec, grid: &Grid, x: &SampledFn, u: &SampledFn) -> Result<()> {
    if x.grid() != grid || u.grid() != grid {
        return Err(Error::DimensionMismatch("samples and grid differ".into()));
    }
    if x.dim() != p.state_dim() || u.dim() != p.control_dim() {
        return Err(Error::DimensionMismatch(format!(
            "samples have (n, m) = ({}, {}), problem has ({}, {})",
            x.dim(),
            u.dim(),
            p.state_dim(),
            p.control_dim()
        )));
    }
    Ok(())
}

/// `(∂L/∂x, ∂f/∂x)` at every node.
fn x_derivatives(p: &ProblemSpec, grid: &Grid, x: &SampledFn, u: &SampledFn, exec: Exec) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    exec.try_map_range(grid.len(), |i| {
        let t = grid.node(i);
        let (xi, ui) = (x.at(i), u.at(i));
        let (lx, _) = p.lagrangian_gradient(t, &xi, &ui)?;
        let (fx, _) = p.dynamics_jacobian(t, &xi, &ui)?;
        Ok((lx, fx))
    })
}

/// `d·I − f_xᵀ`, row-major.
fn shifted_transpose(n: usize, d: f64, fx: &[f64]) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            m[r * n + c] = -fx[c * n + r];
        }
        m[r * n + r] += d;
    }
    m
}

/// Discrete-transpose adjoint with the distributed Caputo matrix from
/// `kernel`.
pub fn solve_adjoint(
    p: &ProblemSpec,
    kernel: &DistributionKernel,
    grid: &Grid,
    x: &SampledFn,
    u: &SampledFn,
) -> Result<SampledFn> {
    let a = distributed_matrix(OperatorKind::DistributedCaputoLeft, kernel, grid)?;
    solve_adjoint_with(p, &a, x, u, Exec::default())
}

/// Discrete-transpose adjoint with a prebuilt matrix.
///
/// * `InitialFixed`, `Free`: back substitution over `k = N..1`; `λ₀` is
///   set to `λ₁` (node 0 carries no state equation). In `Free` mode the
///   unused `k = 0` equation is the discrete a-side transversality
///   condition and is reported by [`transpose_a_side_defect`].
/// * `TerminalFixed`: `x_N` is not a variable and `x₀` is, so the
///   equations `k = 0..N−1` determine `λ₁..λ_N` through one dense solve.
pub fn solve_adjoint_with(p: &ProblemSpec, a: &OperatorMatrix, x: &SampledFn, u: &SampledFn, exec: Exec) -> Result<SampledFn> {
    let grid = *a.grid();
    if !a.is_lower() {
        return Err(Error::invalid("the transpose adjoint needs the left-sided state operator"));
    }
    check_samples(p, &grid, x, u)?;
    let derivs = x_derivatives(p, &grid, x, u, exec)?;
    let n = p.state_dim();
    let nn = grid.intervals();
    let q = grid.trapezoid_weights();

    let mut lam = vec![vec![0.0; grid.len()]; n];
    match p.boundary() {
        BoundaryMode::InitialFixed(_) | BoundaryMode::Free => {
            // acc[j][k] = Σ_{i>k} q_i A_ik λ_i[j], accumulated row by row
            let mut acc = vec![vec![0.0; grid.len()]; n];
            for k in (1..=nn).rev() {
                let (lx, fx) = &derivs[k];
                let m = shifted_transpose(n, a.get(k, k), fx);
                let rhs: Vec<f64> = (0..n).map(|j| lx[j] - acc[j][k] / q[k]).collect();
                let lk = solve_dense(n, &m, &rhs, k)?;
                let row = a.row(k);
                for (j, &v) in lk.iter().enumerate() {
                    lam[j][k] = v;
                    let w = q[k] * v;
                    for (c, &coef) in row[..k].iter().enumerate() {
                        acc[j][c] += w * coef;
                    }
                }
            }
            for c in lam.iter_mut() {
                c[0] = c[1];
            }
        }
        BoundaryMode::TerminalFixed(_) => {
            // unknowns λ_1..λ_N, equations k = 0..N−1, rows scaled by 1/q_k
            let size = n * nn;
            let mut mat = nalgebra::DMatrix::<f64>::zeros(size, size);
            let mut rhs = nalgebra::DVector::<f64>::zeros(size);
            for k in 0..nn {
                let (lx, fx) = &derivs[k];
                for r in 0..n {
                    rhs[k * n + r] = lx[r];
                    for i in k.max(1)..=nn {
                        mat[(k * n + r, (i - 1) * n + r)] += q[i] * a.get(i, k) / q[k];
                    }
                    if k >= 1 {
                        for c in 0..n {
                            mat[(k * n + r, (k - 1) * n + c)] -= fx[c * n + r];
                        }
                    }
                }
            }
            let sol = mat.clone().lu().solve(&rhs);
            let sol = match sol {
                Some(s) if s.iter().all(|v| v.is_finite()) => s,
                _ => {
                    return Err(Error::Singular {
                        row: 0,
                        condition: condition_estimate(&mat),
                    })
                }
            };
            for i in 1..=nn {
                for j in 0..n {
                    lam[j][i] = sol[(i - 1) * n + j];
                }
            }
            // λ_N multiplies a constraint on the fixed end value and carries
            // the 1/q_N endpoint scaling; report its neighbour instead.
            for c in lam.iter_mut() {
                c[0] = c[1];
                c[nn] = c[nn - 1];
            }
        }
    }
    SampledFn::new(grid, lam)
}

/// Residual of the `k = 0` transpose equation, `|L_x(t₀) − (1/q₀) Σ_{i≥1} qᵢ A_i0 λᵢ|`:
/// the discrete a-side transversality condition when `x(a)` is free.
pub fn transpose_a_side_defect(p: &ProblemSpec, a: &OperatorMatrix, x: &SampledFn, u: &SampledFn, lambda: &SampledFn) -> Result<f64> {
    let grid = *a.grid();
    check_samples(p, &grid, x, u)?;
    let q = grid.trapezoid_weights();
    let (lx, _) = p.lagrangian_gradient(grid.node(0), &x.at(0), &u.at(0))?;
    Ok((0..p.state_dim())
        .map(|j| {
            let l = lambda.component(j);
            let s: f64 = (1..grid.len()).map(|i| q[i] * a.get(i, 0) * l[i]).sum();
            (lx[j] - s / q[0]).abs()
        })
        .fold(0.0, f64::max))
}

/// `Q⁻¹AᵀQ λ` for a scalar sampled `λ`.
pub fn transpose_operator_apply(a: &OperatorMatrix, lambda: &[f64]) -> Vec<f64> {
    let grid = a.grid();
    let q = grid.trapezoid_weights();
    let len = grid.len();
    let mut out = vec![0.0; len];
    for i in 0..len {
        let w = q[i] * lambda[i];
        for (k, &coef) in a.row(i).iter().enumerate().take(i + 1) {
            out[k] += w * coef;
        }
    }
    for (o, qk) in out.iter_mut().zip(&q) {
        *o /= qk;
    }
    out
}

/// `|⟨λ, A x⟩_Q − ⟨Q⁻¹AᵀQ λ, x⟩_Q|` where `⟨f, g⟩_Q = Σ qᵢ fᵢ gᵢ`. Node 0
/// of the right-hand inner product is the boundary term
/// `x(a)·(AᵀQλ)₀`.
pub fn discrete_ibp_defect(a: &OperatorMatrix, x: &[f64], lambda: &[f64]) -> f64 {
    let q = a.grid().trapezoid_weights();
    let ax = a.apply_with(x, Exec::Sequential);
    let bl = transpose_operator_apply(a, lambda);
    let lhs: f64 = (0..q.len()).map(|i| q[i] * lambda[i] * ax[i]).sum();
    let interior: f64 = (1..q.len()).map(|i| q[i] * bl[i] * x[i]).sum();
    let boundary = q[0] * bl[0] * x[0];
    (lhs - interior - boundary).abs()
}

/// Direct discretization of `𝔻ψ_{b−} λ = ∂H/∂x` with the distributed
/// right RL matrix `R`, solved by back substitution from `t = b`. When
/// the kernel has a node at α = 1 the last row is replaced by the discrete
/// transversality condition `(𝕀^{1−ψ}_{b−}λ)(b) = c₁ λ_N = 0`.
pub fn solve_adjoint_direct(
    p: &ProblemSpec,
    kernel: &DistributionKernel,
    grid: &Grid,
    x: &SampledFn,
    u: &SampledFn,
) -> Result<SampledFn> {
    let r = distributed_matrix(OperatorKind::DistributedRLRight, kernel, grid)?;
    check_samples(p, grid, x, u)?;
    let derivs = x_derivatives(p, grid, x, u, Exec::default())?;
    let n = p.state_dim();
    let nn = grid.intervals();
    let mut lam = vec![vec![0.0; grid.len()]; n];
    let start = if kernel.first_order_weight() > 0.0 { nn - 1 } else { nn };
    for i in (0..=start).rev() {
        let (lx, fx) = &derivs[i];
        let row = r.row(i);
        let rhs: Vec<f64> = (0..n)
            .map(|j| lx[j] - (i + 1..=nn).map(|k| row[k] * lam[j][k]).sum::<f64>())
            .collect();
        let m = shifted_transpose(n, row[i], fx);
        let li = solve_dense(n, &m, &rhs, i)?;
        for (j, v) in li.into_iter().enumerate() {
            lam[j][i] = v;
        }
    }
    SampledFn::new(*grid, lam)
}

/// Solves `∂L/∂u + λ·∂f/∂u = 0` at every node, starting from `u = 0`.
pub fn optimality_update(p: &ProblemSpec, grid: &Grid, x: &SampledFn, lambda: &SampledFn) -> Result<SampledFn> {
    let guess = SampledFn::zeros(*grid, p.control_dim());
    optimality_update_with(p, x, lambda, &guess, Exec::default())
}

/// Per-node safeguarded Newton from `guess`, nodes processed under `exec`.
pub fn optimality_update_with(p: &ProblemSpec, x: &SampledFn, lambda: &SampledFn, guess: &SampledFn, exec: Exec) -> Result<SampledFn> {
    let grid = *x.grid();
    if lambda.grid() != &grid || guess.grid() != &grid {
        return Err(Error::DimensionMismatch("state, adjoint and guess use different grids".into()));
    }
    if x.dim() != p.state_dim() || lambda.dim() != p.state_dim() || guess.dim() != p.control_dim() {
        return Err(Error::DimensionMismatch("optimality update inputs do not match (n, m)".into()));
    }
    let per_node = exec.try_map_range(grid.len(), |i| {
        let t = grid.node(i);
        stationary_control(p, t, &x.at(i), &lambda.at(i), guess.at(i)).map_err(|e| match e {
            Error::Expr { .. } => e,
            _ => Error::NoStationaryPoint { node: i, t },
        })
    })?;
    let m = p.control_dim();
    let comps = (0..m).map(|k| per_node.iter().map(|u| u[k]).collect()).collect();
    SampledFn::new(grid, comps)
}

fn h_u_hessian(p: &ProblemSpec, t: f64, x: &[f64], u: &[f64], lambda: &[f64]) -> Result<Vec<f64>> {
    let m = u.len();
    let mut hess = vec![0.0; m * m];
    for c in 0..m {
        let s = HESSIAN_STEP * u[c].abs().max(1.0);
        let mut up = u.to_vec();
        up[c] += s;
        let mut dn = u.to_vec();
        dn[c] -= s;
        let gp = p.hamiltonian_u_gradient(t, x, &up, lambda)?;
        let gm = p.hamiltonian_u_gradient(t, x, &dn, lambda)?;
        for r in 0..m {
            hess[r * m + c] = (gp[r] - gm[r]) / (2.0 * s);
        }
    }
    for r in 0..m {
        for c in r + 1..m {
            let avg = 0.5 * (hess[r * m + c] + hess[c * m + r]);
            hess[r * m + c] = avg;
            hess[c * m + r] = avg;
        }
    }
    Ok(hess)
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Root of `∂H/∂u` near `u0`.
pub fn stationary_control(p: &ProblemSpec, t: f64, x: &[f64], lambda: &[f64], u0: Vec<f64>) -> Result<Vec<f64>> {
    let m = u0.len();
    let mut u = u0.clone();
    for _ in 0..50 {
        let g = p.hamiltonian_u_gradient(t, x, &u, lambda)?;
        if sup(&g) <= 1e-13 * (1.0 + sup(&u)) {
            return Ok(u);
        }
        let hess = h_u_hessian(p, t, x, &u, lambda)?;
        let rhs: Vec<f64> = g.iter().map(|v| -v).collect();
        let Ok(delta) = solve_dense(m, &hess, &rhs, 0) else { break };
        let mut step = 1.0;
        let mut next = None;
        while step >= 1.0 / 1024.0 {
            let trial: Vec<f64> = u.iter().zip(&delta).map(|(a, b)| a + step * b).collect();
            if let Ok(gt) = p.hamiltonian_u_gradient(t, x, &trial, lambda) {
                if sup(&gt) < sup(&g) {
                    next = Some(trial);
                    break;
                }
            }
            step *= 0.5;
        }
        let Some(next) = next else { break };
        let moved = sup(&next.iter().zip(&u).map(|(a, b)| a - b).collect::<Vec<_>>());
        u = next;
        if moved <= 1e-14 * (1.0 + sup(&u)) {
            return Ok(u);
        }
    }
    if m == 1 {
        return bisect_scalar(p, t, x, lambda, u0[0]);
    }
    Err(Error::NonConvergence {
        what: "optimality Newton",
        detail: format!("t = {t}"),
    })
}

fn bisect_scalar(p: &ProblemSpec, t: f64, x: &[f64], lambda: &[f64], center: f64) -> Result<Vec<f64>> {
    let g = |v: f64| p.hamiltonian_u_gradient(t, x, &[v], lambda).map(|g| g[0]);
    let mut width = 1.0;
    let (mut lo, mut hi) = loop {
        let (lo, hi) = (center - width, center + width);
        if let (Ok(gl), Ok(gh)) = (g(lo), g(hi)) {
            if gl.signum() != gh.signum() {
                break (lo, hi);
            }
        }
        width *= 2.0;
        if width > BRACKET_LIMIT {
            return Err(Error::NonConvergence {
                what: "optimality bracketing",
                detail: format!("no sign change of dH/du within |u| <= {BRACKET_LIMIT:e} at t = {t}"),
            });
        }
    };
    let mut glo = g(lo)?;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let gm = g(mid)?;
        if gm == 0.0 {
            return Ok(vec![mid]);
        }
        if gm.signum() == glo.signum() {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    Ok(vec![0.5 * (lo + hi)])
}

/// Residuals of the necessary conditions for a candidate triple.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PmpResidualReport {
    /// `sup |∂H/∂u|` over all nodes.
    pub optimality: f64,
    /// `sup |𝔻ψ_{b−}λ − ∂H/∂x|` over nodes `1..=N−2`.
    pub adjoint: f64,
    /// `|(𝕀^{1−ψ}_{b−}λ)(t_{N−1})|` when `x(b)` is free.
    pub transversality_b: Option<f64>,
    /// `|(𝕀^{1−ψ}_{a+}λ)(t₁)|` when `x(a)` is free.
    pub transversality_a: Option<f64>,
    /// `sup |ᶜ𝔻ψ x − f|` over nodes `1..=N`.
    pub state: f64,
    pub intervals: usize,
    pub a: f64,
    pub b: f64,
    pub kernel_nodes: usize,
    pub kernel_mass: f64,
    pub boundary: &'static str,
}

impl PmpResidualReport {
    /// Largest of the necessary-condition residuals (state excluded).
    pub fn max_condition_residual(&self) -> f64 {
        [Some(self.optimality), Some(self.adjoint), self.transversality_b, self.transversality_a]
            .into_iter()
            .flatten()
            .fold(0.0, f64::max)
    }

    /// Whether every reported residual, state included, is at most `tol`.
    pub fn all_below(&self, tol: f64) -> bool {
        self.max_condition_residual() <= tol && self.state <= tol
    }
}

/// Residuals of a bundle with `λ`, using the direct right-sided operators
/// (independent of the transpose construction).
pub fn pmp_residuals(p: &ProblemSpec, kernel: &DistributionKernel, grid: &Grid, bundle: &TrajectoryBundle) -> Result<PmpResidualReport> {
    pmp_residuals_with(p, kernel, grid, bundle, Exec::default())
}

pub fn pmp_residuals_with(
    p: &ProblemSpec,
    kernel: &DistributionKernel,
    grid: &Grid,
    bundle: &TrajectoryBundle,
    exec: Exec,
) -> Result<PmpResidualReport> {
    bundle.check_against(p)?;
    let lambda = bundle
        .lambda
        .as_ref()
        .ok_or_else(|| Error::invalid("residual audit needs an adjoint in the bundle"))?;
    let (x, u) = (&bundle.x, &bundle.u);
    check_samples(p, grid, x, u)?;
    if lambda.grid() != grid || lambda.dim() != p.state_dim() {
        return Err(Error::DimensionMismatch("adjoint samples do not match the problem".into()));
    }
    let n = p.state_dim();
    let nn = grid.intervals();

    let opt = exec.try_map_range(grid.len(), |i| {
        p.hamiltonian_u_gradient(grid.node(i), &x.at(i), &u.at(i), &lambda.at(i)).map(|g| sup(&g))
    })?;
    let optimality = opt.into_iter().fold(0.0, f64::max);

    let r = distributed_matrix_exec(OperatorKind::DistributedRLRight, kernel, grid, exec)?;
    let rl: Vec<Vec<f64>> = lambda.components().iter().map(|c| r.apply_with(c, exec)).collect();
    let adj = exec.try_map_range(nn.saturating_sub(2), |k| {
        let i = k + 1;
        let hx = p.hamiltonian_x_gradient(grid.node(i), &x.at(i), &u.at(i), &lambda.at(i))?;
        Ok::<_, Error>((0..n).map(|j| (rl[j][i] - hx[j]).abs()).fold(0.0, f64::max))
    })?;
    let adjoint = adj.into_iter().fold(0.0, f64::max);

    let boundary = p.boundary();
    let transversality_b = if boundary.b_side_free() {
        let ir = distributed_matrix_exec(OperatorKind::DistributedRLIntegralRight, kernel, grid, exec)?;
        Some(
            lambda
                .components()
                .iter()
                .map(|c| ir.band(nn - 1).map(|k| ir.get(nn - 1, k) * c[k]).sum::<f64>().abs())
                .fold(0.0, f64::max),
        )
    } else {
        None
    };
    let transversality_a = if boundary.a_side_free() {
        let il = distributed_matrix_exec(OperatorKind::DistributedRLIntegralLeft, kernel, grid, exec)?;
        Some(
            lambda
                .components()
                .iter()
                .map(|c| il.band(1).map(|k| il.get(1, k) * c[k]).sum::<f64>().abs())
                .fold(0.0, f64::max),
        )
    } else {
        None
    };

    let cap = distributed_matrix_exec(OperatorKind::DistributedCaputoLeft, kernel, grid, exec)?;
    let cx: Vec<Vec<f64>> = x.components().iter().map(|c| cap.apply_with(c, exec)).collect();
    let st = exec.try_map_range(nn, |k| {
        let i = k + 1;
        let f = p.dynamics_value(grid.node(i), &x.at(i), &u.at(i))?;
        Ok::<_, Error>((0..n).map(|j| (cx[j][i] - f[j]).abs()).fold(0.0, f64::max))
    })?;
    let state = st.into_iter().fold(0.0, f64::max);

    Ok(PmpResidualReport {
        optimality,
        adjoint,
        transversality_b,
        transversality_a,
        state,
        intervals: nn,
        a: grid.a(),
        b: grid.b(),
        kernel_nodes: kernel.len(),
        kernel_mass: kernel.mass(),
        boundary: boundary.name(),
    })
}

fn distributed_matrix_exec(kind: OperatorKind, kernel: &DistributionKernel, grid: &Grid, exec: Exec) -> Result<OperatorMatrix> {
    crate::fracops::distributed_matrix_with(kind, kernel, grid, exec)
}
