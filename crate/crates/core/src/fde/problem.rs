use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{Compiled, Expr, ExprError};

/// Boundary data on the state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum BoundaryMode {
    /// `x(a) = values`
    InitialFixed(Vec<f64>),
    /// `x(b) = values`, `x(a)` free
    TerminalFixed(Vec<f64>),
    /// both ends free
    Free,
}

impl BoundaryMode {
    pub fn name(&self) -> &'static str {
        match self {
            BoundaryMode::InitialFixed(_) => "initial",
            BoundaryMode::TerminalFixed(_) => "terminal",
            BoundaryMode::Free => "free",
        }
    }

    /// Whether the b-side transversality condition applies.
    pub fn b_side_free(&self) -> bool {
        !matches!(self, BoundaryMode::TerminalFixed(_))
    }

    /// Whether the a-side transversality condition applies.
    pub fn a_side_free(&self) -> bool {
        !matches!(self, BoundaryMode::InitialFixed(_))
    }
}

/// Optional closed-form extremal used by tests and residual audits.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub x_star: Vec<Expr>,
    pub u_star: Vec<Expr>,
    pub lambda_star: Vec<Expr>,
}

/// Relative offset used when evaluating removable endpoint singularities.
const LIMIT_OFFSET: f64 = 1e-6;

/// An optimal control problem: maximize `∫ L` subject to
/// `ᶜ𝔻ψ x = f(t, x, u)` with the given boundary data.
///
/// Expressions are evaluated with slots `[t, x1..xn, u1..um]`; when
/// `n = m = 1` the names `x` and `u` are accepted as aliases. If an
/// expression hits a domain error exactly at `t = a` or `t = b` (e.g.
/// `t*(t-1)/ln(t)`), it is extended by its one-sided limit, estimated by
/// linear extrapolation from two points just inside the interval.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    lagrangian: Compiled,
    dynamics: Vec<Compiled>,
    psi: Expr,
    a: f64,
    b: f64,
    n: usize,
    m: usize,
    boundary: BoundaryMode,
    reference: Option<Reference>,
    reference_compiled: Option<(Vec<Compiled>, Vec<Compiled>, Vec<Compiled>)>,
}

impl ProblemSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        lagrangian: Expr,
        dynamics: Vec<Expr>,
        psi: Expr,
        interval: (f64, f64),
        n: usize,
        m: usize,
        boundary: BoundaryMode,
        reference: Option<Reference>,
    ) -> Result<Self> {
        let (a, b) = interval;
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::invalid(format!("interval must satisfy a < b, got [{a}, {b}]")));
        }
        if n == 0 || m == 0 || m > n {
            return Err(Error::invalid(format!("dimensions must satisfy 1 <= m <= n, got n = {n}, m = {m}")));
        }
        if dynamics.len() != n {
            return Err(Error::DimensionMismatch(format!("f has {} components, n = {n}", dynamics.len())));
        }
        match &boundary {
            BoundaryMode::InitialFixed(v) | BoundaryMode::TerminalFixed(v) => {
                if v.len() != n {
                    return Err(Error::DimensionMismatch(format!("boundary has {} values, n = {n}", v.len())));
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::invalid("boundary values must be finite"));
                }
            }
            BoundaryMode::Free => {}
        }
        psi.compile(&["alpha"]).map_err(|e| Error::expr("psi", e))?;

        let compile = |e: &Expr, what: &str| compile_problem_expr(e, n, m).map_err(|err| Error::expr(what, err));
        let lagrangian = compile(&lagrangian, "L")?;
        let dynamics = dynamics
            .iter()
            .enumerate()
            .map(|(j, e)| compile(e, &format!("f[{}]", j + 1)))
            .collect::<Result<Vec<_>>>()?;
        let reference_compiled = match &reference {
            None => None,
            Some(r) => {
                if r.x_star.len() != n || r.u_star.len() != m || r.lambda_star.len() != n {
                    return Err(Error::DimensionMismatch("reference expressions do not match (n, m)".into()));
                }
                let time_only = |es: &[Expr], what: &str| {
                    es.iter()
                        .map(|e| e.compile(&["t"]).map_err(|err| Error::expr(what, err)))
                        .collect::<Result<Vec<_>>>()
                };
                Some((
                    time_only(&r.x_star, "reference x_star")?,
                    time_only(&r.u_star, "reference u_star")?,
                    time_only(&r.lambda_star, "reference lambda_star")?,
                ))
            }
        };
        Ok(ProblemSpec {
            lagrangian,
            dynamics,
            psi,
            a,
            b,
            n,
            m,
            boundary,
            reference,
            reference_compiled,
        })
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn control_dim(&self) -> usize {
        self.m
    }

    pub fn psi(&self) -> &Expr {
        &self.psi
    }

    pub fn boundary(&self) -> &BoundaryMode {
        &self.boundary
    }

    pub fn reference(&self) -> Option<&Reference> {
        self.reference.as_ref()
    }

    pub fn lagrangian(&self) -> &Compiled {
        &self.lagrangian
    }

    pub fn dynamics(&self) -> &[Compiled] {
        &self.dynamics
    }

    /// Same problem with a different Lagrangian.
    pub fn with_lagrangian(&self, lagrangian: Expr) -> Result<Self> {
        let mut out = self.clone();
        out.lagrangian = compile_problem_expr(&lagrangian, self.n, self.m).map_err(|e| Error::expr("L", e))?;
        Ok(out)
    }

    /// Same problem with different boundary data.
    pub fn with_boundary(&self, boundary: BoundaryMode) -> Result<Self> {
        ProblemSpec::new(
            self.lagrangian.source().clone(),
            self.dynamics.iter().map(|c| c.source().clone()).collect(),
            self.psi.clone(),
            (self.a, self.b),
            self.n,
            self.m,
            boundary,
            self.reference.clone(),
        )
    }

    /// True when `L` or any `f` component uses `abs`.
    pub fn uses_nonsmooth(&self) -> bool {
        self.lagrangian.uses_abs() || self.dynamics.iter().any(Compiled::uses_abs)
    }

    /// Slot indices of the state variables.
    pub fn x_slots(&self) -> Vec<usize> {
        (1..=self.n).collect()
    }

    /// Slot indices of the control variables.
    pub fn u_slots(&self) -> Vec<usize> {
        (self.n + 1..=self.n + self.m).collect()
    }

    /// Slot vector `[t, x.., u..]`.
    pub fn point(&self, t: f64, x: &[f64], u: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(u.len(), self.m);
        let mut p = Vec::with_capacity(1 + self.n + self.m);
        p.push(t);
        p.extend_from_slice(x);
        p.extend_from_slice(u);
        p
    }

    /// Evaluates `eval(point)` and falls back to the one-sided limit at
    /// the interval endpoints on domain errors.
    pub fn eval_at<F>(&self, point: &[f64], eval: F) -> Result<Vec<f64>, ExprError>
    where
        F: Fn(&[f64]) -> Result<Vec<f64>, ExprError>,
    {
        match eval(point) {
            Ok(v) => Ok(v),
            Err(ExprError::Domain(msg)) => {
                let t = point[0];
                let scale = self.b - self.a;
                let dir = if (t - self.a).abs() <= 1e-12 * scale {
                    1.0
                } else if (t - self.b).abs() <= 1e-12 * scale {
                    -1.0
                } else {
                    return Err(ExprError::Domain(msg));
                };
                let delta = LIMIT_OFFSET * scale;
                let mut p = point.to_vec();
                p[0] = t + dir * delta;
                let near = eval(&p)?;
                p[0] = t + 2.0 * dir * delta;
                let far = eval(&p)?;
                Ok(near
                    .iter()
                    .zip(&far)
                    .map(|(&n, &f)| 2.0 * n - f)
                    .collect())
            }
            Err(e) => Err(e),
        }
    }

    fn context(what: &str, t: f64) -> impl Fn(ExprError) -> Error + '_ {
        move |e| Error::expr(format!("{what} at t = {t}"), e)
    }

    /// L(t, x, u).
    pub fn lagrangian_value(&self, t: f64, x: &[f64], u: &[f64]) -> Result<f64> {
        let p = self.point(t, x, u);
        self.eval_at(&p, |q| self.lagrangian.value(q).map(|v| vec![v]))
            .map(|v| v[0])
            .map_err(Self::context("L", t))
    }

    /// f(t, x, u).
    pub fn dynamics_value(&self, t: f64, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        let p = self.point(t, x, u);
        self.eval_at(&p, |q| self.dynamics.iter().map(|f| f.value(q)).collect())
            .map_err(Self::context("f", t))
    }

    /// (∂L/∂x, ∂L/∂u).
    pub fn lagrangian_gradient(&self, t: f64, x: &[f64], u: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let p = self.point(t, x, u);
        let wrt: Vec<usize> = (1..=self.n + self.m).collect();
        let g = self
            .eval_at(&p, |q| self.lagrangian.gradient(q, &wrt))
            .map_err(Self::context("dL", t))?;
        Ok((g[..self.n].to_vec(), g[self.n..].to_vec()))
    }

    /// Jacobians (∂f/∂x, ∂f/∂u), row-major `n×n` and `n×m`.
    pub fn dynamics_jacobian(&self, t: f64, x: &[f64], u: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let p = self.point(t, x, u);
        let wrt: Vec<usize> = (1..=self.n + self.m).collect();
        let (n, m) = (self.n, self.m);
        let rows = self
            .eval_at(&p, |q| {
                let mut all = Vec::with_capacity(n * (n + m));
                for f in &self.dynamics {
                    all.extend(f.gradient(q, &wrt)?);
                }
                Ok(all)
            })
            .map_err(Self::context("df", t))?;
        let mut fx = Vec::with_capacity(n * n);
        let mut fu = Vec::with_capacity(n * m);
        for j in 0..n {
            let row = &rows[j * (n + m)..(j + 1) * (n + m)];
            fx.extend_from_slice(&row[..n]);
            fu.extend_from_slice(&row[n..]);
        }
        Ok((fx, fu))
    }

    /// ∂H/∂u = ∂L/∂u + λ·∂f/∂u.
    pub fn hamiltonian_u_gradient(&self, t: f64, x: &[f64], u: &[f64], lambda: &[f64]) -> Result<Vec<f64>> {
        let (_, lu) = self.lagrangian_gradient(t, x, u)?;
        let (_, fu) = self.dynamics_jacobian(t, x, u)?;
        let m = self.m;
        Ok((0..m)
            .map(|i| lu[i] + (0..self.n).map(|j| lambda[j] * fu[j * m + i]).sum::<f64>())
            .collect())
    }

    /// ∂H/∂x = ∂L/∂x + λ·∂f/∂x.
    pub fn hamiltonian_x_gradient(&self, t: f64, x: &[f64], u: &[f64], lambda: &[f64]) -> Result<Vec<f64>> {
        let (lx, _) = self.lagrangian_gradient(t, x, u)?;
        let (fx, _) = self.dynamics_jacobian(t, x, u)?;
        let n = self.n;
        Ok((0..n)
            .map(|i| lx[i] + (0..n).map(|j| lambda[j] * fx[j * n + i]).sum::<f64>())
            .collect())
    }

    /// Reference (x*, u*, λ*) at time t, if present.
    pub fn reference_at(&self, t: f64) -> Option<Result<(Vec<f64>, Vec<f64>, Vec<f64>)>> {
        let (xs, us, ls) = self.reference_compiled.as_ref()?;
        let eval_all = |cs: &[Compiled], what: &str| {
            self.eval_at(&[t], |q| cs.iter().map(|c| c.value(q)).collect())
                .map_err(|e| Error::expr(format!("reference {what} at t = {t}"), e))
        };
        Some((|| Ok((eval_all(xs, "x")?, eval_all(us, "u")?, eval_all(ls, "lambda")?)))())
    }
}

/// Compiles a problem expression over slots `[t, x1..xn, u1..um]`.
pub fn compile_problem_expr(e: &Expr, n: usize, m: usize) -> Result<Compiled, ExprError> {
    e.compile_with(1 + n + m, |name| slot_of(name, n, m))
}

fn slot_of(name: &str, n: usize, m: usize) -> Option<usize> {
    if name == "t" {
        return Some(0);
    }
    if n == 1 && name == "x" {
        return Some(1);
    }
    if m == 1 && name == "u" {
        return Some(1 + n);
    }
    let indexed = |prefix: &str, count: usize| -> Option<usize> {
        let k: usize = name.strip_prefix(prefix)?.parse().ok()?;
        (1..=count).contains(&k).then_some(k)
    };
    if let Some(k) = indexed("x", n) {
        return Some(k);
    }
    indexed("u", m).map(|k| n + k)
}
