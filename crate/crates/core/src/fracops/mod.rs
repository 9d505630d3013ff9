//! Discrete fractional operators on a uniform grid.
//!
//! Every operator is assembled from a *left-form profile*: a Toeplitz band
//! `toeplitz[i − m]` for columns `m ≥ 1` plus an explicit column `edge[i]`
//! for `m = 0`. Left-sided operators use the profile directly (lower
//! triangular); right-sided operators are its reflection
//! `R[i][k] = L[N − i][N − k]` (upper triangular), which realizes the
//! mirror identity `D_{b−}x(t) = D_{a+}[x∘r](a + b − t)`, `r(s) = a + b − s`.
//!
//! Building blocks:
//! * Caputo: L1 scheme, `h^{−α}/Γ(2−α) Σ_k b_{i−1−k}(x_{k+1} − x_k)` with
//!   `b_j = (j+1)^{1−α} − j^{1−α}`; α = 1 is the backward difference.
//! * Riemann–Liouville derivative: Caputo plus the lower-terminal term
//!   `x(a)(t−a)^{−α}/Γ(1−α)`; at the singular node the term is evaluated
//!   one step inside the interval.
//! * Riemann–Liouville integral: product integration against the
//!   piecewise-linear interpolant; order 0 is the identity.

mod residual;

pub use residual::{caputo_rl_relation_residual, integration_by_parts_residual};

use std::fmt;

use serde::Serialize;

pub use crate::grid::Grid;

use crate::distkernel::DistributionKernel;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::specfun::{gamma, recip_gamma};

/// Samples of a (possibly vector-valued) function on a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampledFn {
    grid: Grid,
    components: Vec<Vec<f64>>,
}

impl SampledFn {
    pub fn new(grid: Grid, components: Vec<Vec<f64>>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::DimensionMismatch("sampled function needs at least one component".into()));
        }
        for (j, c) in components.iter().enumerate() {
            if c.len() != grid.len() {
                return Err(Error::DimensionMismatch(format!(
                    "component {j} has {} samples, grid has {}",
                    c.len(),
                    grid.len()
                )));
            }
            if let Some(i) = c.iter().position(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("component {j} is not finite at node {i}")));
            }
        }
        Ok(SampledFn { grid, components })
    }

    pub fn scalar(grid: Grid, values: Vec<f64>) -> Result<Self> {
        Self::new(grid, vec![values])
    }

    /// Samples `f(t)` at the grid nodes.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::scalar(grid, grid.nodes().into_iter().map(f).collect())
    }

    pub fn zeros(grid: Grid, dim: usize) -> Self {
        SampledFn {
            grid,
            components: vec![vec![0.0; grid.len()]; dim],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, j: usize) -> &[f64] {
        &self.components[j]
    }

    pub fn component_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.components[j]
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    /// Values of all components at node `i`.
    pub fn at(&self, i: usize) -> Vec<f64> {
        self.components.iter().map(|c| c[i]).collect()
    }

    pub fn sup_norm(&self) -> f64 {
        self.components
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Sup-norm of the difference with `other` (same grid and dimension).
    pub fn sup_distance(&self, other: &SampledFn) -> f64 {
        assert_eq!(self.dim(), other.dim());
        self.components
            .iter()
            .zip(&other.components)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }

    pub fn into_components(self) -> Vec<Vec<f64>> {
        self.components
    }
}

/// Which operator a matrix discretizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum OperatorKind {
    CaputoLeft,
    CaputoRight,
    RLLeft,
    RLRight,
    RLIntegralLeft,
    RLIntegralRight,
    DistributedCaputoLeft,
    DistributedCaputoRight,
    DistributedRLLeft,
    DistributedRLRight,
    DistributedRLIntegralLeft,
    DistributedRLIntegralRight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Base {
    Caputo,
    Rl,
    Integral,
}

impl OperatorKind {
    pub const ALL: [OperatorKind; 12] = [
        OperatorKind::CaputoLeft,
        OperatorKind::CaputoRight,
        OperatorKind::RLLeft,
        OperatorKind::RLRight,
        OperatorKind::RLIntegralLeft,
        OperatorKind::RLIntegralRight,
        OperatorKind::DistributedCaputoLeft,
        OperatorKind::DistributedCaputoRight,
        OperatorKind::DistributedRLLeft,
        OperatorKind::DistributedRLRight,
        OperatorKind::DistributedRLIntegralLeft,
        OperatorKind::DistributedRLIntegralRight,
    ];

    pub fn is_left(self) -> bool {
        use OperatorKind::*;
        matches!(
            self,
            CaputoLeft | RLLeft | RLIntegralLeft | DistributedCaputoLeft | DistributedRLLeft | DistributedRLIntegralLeft
        )
    }

    pub fn is_distributed(self) -> bool {
        use OperatorKind::*;
        matches!(
            self,
            DistributedCaputoLeft
                | DistributedCaputoRight
                | DistributedRLLeft
                | DistributedRLRight
                | DistributedRLIntegralLeft
                | DistributedRLIntegralRight
        )
    }

    fn base(self) -> Base {
        use OperatorKind::*;
        match self {
            CaputoLeft | CaputoRight | DistributedCaputoLeft | DistributedCaputoRight => Base::Caputo,
            RLLeft | RLRight | DistributedRLLeft | DistributedRLRight => Base::Rl,
            _ => Base::Integral,
        }
    }

    /// Single-order counterpart of a distributed kind (identity otherwise).
    pub fn single_order(self) -> OperatorKind {
        use OperatorKind::*;
        match self {
            DistributedCaputoLeft => CaputoLeft,
            DistributedCaputoRight => CaputoRight,
            DistributedRLLeft => RLLeft,
            DistributedRLRight => RLRight,
            DistributedRLIntegralLeft => RLIntegralLeft,
            DistributedRLIntegralRight => RLIntegralRight,
            other => other,
        }
    }

    /// Command-line name, e.g. `dist-caputo-left`.
    pub fn cli_name(self) -> &'static str {
        use OperatorKind::*;
        match self {
            CaputoLeft => "caputo-left",
            CaputoRight => "caputo-right",
            RLLeft => "rl-left",
            RLRight => "rl-right",
            RLIntegralLeft => "rl-int-left",
            RLIntegralRight => "rl-int-right",
            DistributedCaputoLeft => "dist-caputo-left",
            DistributedCaputoRight => "dist-caputo-right",
            DistributedRLLeft => "dist-rl-left",
            DistributedRLRight => "dist-rl-right",
            DistributedRLIntegralLeft => "dist-rl-int-left",
            DistributedRLIntegralRight => "dist-rl-int-right",
        }
    }

    pub fn from_cli_name(name: &str) -> Option<OperatorKind> {
        OperatorKind::ALL.iter().copied().find(|k| k.cli_name() == name)
    }
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.cli_name())
    }
}

/// Left-form weights: `A[i][m] = toeplitz[i − m]` for `1 ≤ m ≤ i`,
/// `A[i][0] = edge[i]`.
#[derive(Debug, Clone, PartialEq)]
struct Profile {
    toeplitz: Vec<f64>,
    edge: Vec<f64>,
}

impl Profile {
    fn zeros(len: usize) -> Self {
        Profile {
            toeplitz: vec![0.0; len],
            edge: vec![0.0; len],
        }
    }

    fn add_scaled(&mut self, other: &Profile, c: f64) {
        self.toeplitz.iter_mut().zip(&other.toeplitz).for_each(|(a, b)| *a += c * b);
        self.edge.iter_mut().zip(&other.edge).for_each(|(a, b)| *a += c * b);
    }
}

/// `(j+1)^p − j^p` without cancellation for large `j`.
fn pow_diff(j: usize, p: f64) -> f64 {
    if j == 0 {
        1.0
    } else {
        let jf = j as f64;
        jf.powf(p) * (p * (1.0 / jf).ln_1p()).exp_m1()
    }
}

fn caputo_profile(alpha: f64, n: usize, h: f64) -> Profile {
    let len = n + 1;
    let mut p = Profile::zeros(len);
    if alpha == 1.0 {
        p.toeplitz[0] = 1.0 / h;
        if len > 1 {
            p.toeplitz[1] = -1.0 / h;
        }
        for i in 1..len {
            p.edge[i] = if i == 1 { -1.0 / h } else { 0.0 };
        }
        return p;
    }
    let kappa = h.powf(-alpha) * recip_gamma(2.0 - alpha);
    let b: Vec<f64> = (0..len).map(|j| pow_diff(j, 1.0 - alpha)).collect();
    p.toeplitz[0] = kappa * b[0];
    for j in 1..len {
        p.toeplitz[j] = kappa * (b[j] - b[j - 1]);
    }
    for i in 1..len {
        p.edge[i] = -kappa * b[i - 1];
    }
    p
}

fn rl_profile(alpha: f64, n: usize, h: f64) -> Profile {
    let mut p = caputo_profile(alpha, n, h);
    let r = recip_gamma(1.0 - alpha);
    if r != 0.0 {
        p.edge[0] += h.powf(-alpha) * r;
        for i in 1..=n {
            p.edge[i] += (i as f64 * h).powf(-alpha) * r;
        }
    }
    p
}

fn integral_profile(order: f64, n: usize, h: f64) -> Profile {
    let len = n + 1;
    let mut p = Profile::zeros(len);
    if order == 0.0 {
        p.toeplitz[0] = 1.0;
        p.edge[0] = 1.0;
        return p;
    }
    let rho = order;
    let scale = h.powf(rho) / gamma(rho).expect("order in (0, 1]");
    // P0_j = ∫_j^{j+1} σ^{ρ−1}, P1_j = ∫_j^{j+1} σ^ρ
    let p0 = |j: usize| pow_diff(j, rho) / rho;
    let p1 = |j: usize| pow_diff(j, rho + 1.0) / (rho + 1.0);
    // weight of the sample nearer to t_i (σ = j) and of the farther one (σ = j+1)
    let near = |j: usize| (j as f64 + 1.0) * p0(j) - p1(j);
    let far = |j: usize| p1(j) - j as f64 * p0(j);
    p.toeplitz[0] = scale * near(0);
    for d in 1..len {
        p.toeplitz[d] = scale * (near(d) + far(d - 1));
    }
    for i in 1..len {
        p.edge[i] = scale * far(i - 1);
    }
    p
}

fn check_open_order(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("fractional order must be in (0, 1), got {alpha}")))
    }
}

/// Dense square operator matrix, lower triangular for left-sided operators
/// and upper triangular for right-sided ones.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    kind: OperatorKind,
    grid: Grid,
    /// (order, weight) pairs the matrix was assembled from.
    orders: Vec<(f64, f64)>,
    data: Vec<f64>,
}

impl OperatorMatrix {
    fn from_profile(kind: OperatorKind, grid: Grid, orders: Vec<(f64, f64)>, p: &Profile, exec: Exec) -> Self {
        let len = grid.len();
        let n = grid.intervals();
        let mut data = vec![0.0; len * len];
        let left = kind.is_left();
        exec.for_each_chunk_mut(&mut data, len, |i, row| {
            if left {
                row[0] = p.edge[i];
                for m in 1..=i {
                    row[m] = p.toeplitz[i - m];
                }
            } else {
                // R[i][k] = L[N−i][N−k]
                let li = n - i;
                row[n] = p.edge[li];
                for k in i..n {
                    row[k] = p.toeplitz[k - i];
                }
            }
        });
        OperatorMatrix { kind, grid, orders, data }
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn orders(&self) -> &[(f64, f64)] {
        &self.orders
    }

    pub fn size(&self) -> usize {
        self.grid.len()
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.data[i * self.size() + k]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let len = self.size();
        &self.data[i * len..(i + 1) * len]
    }

    pub fn is_lower(&self) -> bool {
        self.kind.is_left()
    }

    /// Column range that can be non-zero in row `i`.
    pub fn band(&self, i: usize) -> std::ops::Range<usize> {
        if self.is_lower() {
            0..i + 1
        } else {
            i..self.size()
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.apply_with(x, Exec::default())
    }

    /// Matrix-vector product; each row is summed in column order.
    pub fn apply_with(&self, x: &[f64], exec: Exec) -> Vec<f64> {
        assert_eq!(x.len(), self.size(), "sample count does not match the operator");
        exec.map_range(self.size(), |i| {
            let row = self.row(i);
            self.band(i).map(|k| row[k] * x[k]).sum()
        })
    }

    /// Applies the operator componentwise.
    pub fn apply_fn(&self, x: &SampledFn) -> Result<SampledFn> {
        if x.grid() != &self.grid {
            return Err(Error::DimensionMismatch("sampled function and operator use different grids".into()));
        }
        SampledFn::new(self.grid, x.components().iter().map(|c| self.apply(c)).collect())
    }

    /// Largest absolute entry difference with `other`.
    pub fn max_abs_difference(&self, other: &OperatorMatrix) -> f64 {
        assert_eq!(self.size(), other.size());
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.data.iter().fold(0.0, |m, a| m.max(a.abs()))
    }
}

fn single_profile(kind: OperatorKind, order: f64, grid: &Grid) -> Profile {
    let (n, h) = (grid.intervals(), grid.step());
    match kind.base() {
        Base::Caputo => caputo_profile(order, n, h),
        Base::Rl => rl_profile(order, n, h),
        Base::Integral => integral_profile(order, n, h),
    }
}

/// Single-order matrix for any non-distributed kind. Derivative orders may
/// be in (0, 1]; integral orders in [0, 1].
pub fn single_order_matrix(kind: OperatorKind, order: f64, grid: &Grid) -> Result<OperatorMatrix> {
    if kind.is_distributed() {
        return Err(Error::invalid(format!("{kind} is a distributed operator")));
    }
    let valid = match kind.base() {
        Base::Integral => (0.0..=1.0).contains(&order),
        _ => order > 0.0 && order <= 1.0,
    };
    if !valid {
        return Err(Error::invalid(format!("order {order} is out of range for {kind}")));
    }
    let p = single_profile(kind, order, grid);
    Ok(OperatorMatrix::from_profile(kind, *grid, vec![(order, 1.0)], &p, Exec::default()))
}

/// L1 discretization of the left Caputo derivative of order α ∈ (0, 1).
pub fn caputo_left_matrix(alpha: f64, grid: &Grid) -> Result<OperatorMatrix> {
    check_open_order(alpha)?;
    single_order_matrix(OperatorKind::CaputoLeft, alpha, grid)
}

/// Left Riemann–Liouville derivative of order α ∈ (0, 1).
pub fn rl_left_matrix(alpha: f64, grid: &Grid) -> Result<OperatorMatrix> {
    check_open_order(alpha)?;
    single_order_matrix(OperatorKind::RLLeft, alpha, grid)
}

/// Right Riemann–Liouville derivative of order α ∈ (0, 1), by reflection.
pub fn rl_right_matrix(alpha: f64, grid: &Grid) -> Result<OperatorMatrix> {
    check_open_order(alpha)?;
    single_order_matrix(OperatorKind::RLRight, alpha, grid)
}

/// Right Riemann–Liouville integral of order ρ ∈ (0, 1].
pub fn rl_integral_right_matrix(order: f64, grid: &Grid) -> Result<OperatorMatrix> {
    if !(order > 0.0 && order <= 1.0) {
        return Err(Error::invalid(format!("integral order must be in (0, 1], got {order}")));
    }
    single_order_matrix(OperatorKind::RLIntegralRight, order, grid)
}

/// ψ-weighted sum of single-order matrices: `Σⱼ cⱼ·A(αⱼ)`, with order
/// `1 − αⱼ` for the integral kinds.
pub fn distributed_matrix(kind: OperatorKind, kernel: &DistributionKernel, grid: &Grid) -> Result<OperatorMatrix> {
    distributed_matrix_with(kind, kernel, grid, Exec::default())
}

pub fn distributed_matrix_with(
    kind: OperatorKind,
    kernel: &DistributionKernel,
    grid: &Grid,
    exec: Exec,
) -> Result<OperatorMatrix> {
    if !kind.is_distributed() {
        return Err(Error::invalid(format!("{kind} is not a distributed operator")));
    }
    let single = kind.single_order();
    let integral = kind.base() == Base::Integral;
    let nodes: Vec<(f64, f64)> = kernel.iter().collect();
    // per-node profiles in parallel, summed in node order
    let profiles = exec.map_range(nodes.len(), |j| {
        let alpha = nodes[j].0;
        single_profile(single, if integral { 1.0 - alpha } else { alpha }, grid)
    });
    let mut total = Profile::zeros(grid.len());
    for (p, &(_, c)) in profiles.iter().zip(&nodes) {
        total.add_scaled(p, c);
    }
    Ok(OperatorMatrix::from_profile(kind, *grid, nodes, &total, exec))
}

/// Σⱼ cⱼ (t − a)^{−αⱼ}/Γ(1 − αⱼ) at every node; node 0 uses `t − a = h`.
pub fn distributed_lower_terminal_term(kernel: &DistributionKernel, grid: &Grid) -> Vec<f64> {
    let h = grid.step();
    (0..grid.len())
        .map(|i| {
            let dist = if i == 0 { h } else { i as f64 * h };
            kernel.integrate(|alpha| dist.powf(-alpha) * recip_gamma(1.0 - alpha))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn grid(n: usize) -> Grid {
        Grid::new(0.0, 1.0, n).unwrap()
    }

    fn at_end(m: &OperatorMatrix, f: impl Fn(f64) -> f64) -> f64 {
        let x: Vec<f64> = m.grid().nodes().into_iter().map(f).collect();
        *m.apply(&x).last().unwrap()
    }

    #[test]
    fn caputo_of_constant_vanishes() {
        let g = grid(200);
        for alpha in [0.1, 0.5, 0.9] {
            let m = caputo_left_matrix(alpha, &g).unwrap();
            let y = m.apply(&vec![3.7; g.len()]);
            assert!(y.iter().all(|v| v.abs() < 1e-12));
            assert!(m.row(0).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn caputo_power_rule_examples() {
        let g = grid(1000);
        let m = caputo_left_matrix(0.5, &g).unwrap();
        // Γ(p+1)/Γ(p+1−α) at t = 1
        assert!((at_end(&m, |t| t) - 1.128_379_167_095_512_6).abs() < 5e-3);
        assert!((at_end(&m, |t| t * t) - 1.504_505_556_127_350_1).abs() < 5e-3);
    }

    #[test]
    fn caputo_order_must_be_open() {
        let g = grid(10);
        for bad in [0.0, 1.0, -0.2, 1.3] {
            assert!(caputo_left_matrix(bad, &g).is_err());
            assert!(rl_right_matrix(bad, &g).is_err());
        }
        assert!(rl_integral_right_matrix(1.0, &g).is_ok());
        assert!(rl_integral_right_matrix(0.0, &g).is_err());
    }

    #[test]
    fn right_rl_of_constant() {
        let g = grid(1000);
        let m = rl_right_matrix(0.5, &g).unwrap();
        let c = 2.5;
        let y = m.apply(&vec![c; g.len()]);
        // c (1 − t)^{−α}/Γ(1−α) at t = 0
        assert!((y[0] - c * 0.564_189_583_547_756_3).abs() < 5e-3 * c);
        assert!(m.apply(&vec![0.0; g.len()]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn right_rl_mirrors_left_rl() {
        let g = Grid::new(0.5, 2.0, 300).unwrap();
        let (a, b) = (g.a(), g.b());
        let right = rl_right_matrix(0.4, &g).unwrap();
        let left = rl_left_matrix(0.4, &g).unwrap();
        // x(t) = b − t reflected is s ↦ s − a
        let x: Vec<f64> = g.nodes().iter().map(|t| b - t).collect();
        let xr: Vec<f64> = g.nodes().iter().map(|s| s - a).collect();
        let yr = right.apply(&x);
        let yl = left.apply(&xr);
        let n = g.intervals();
        for i in 0..=n {
            assert!((yr[i] - yl[n - i]).abs() < 1e-12 * yl[n - i].abs().max(1.0));
            assert!(yr[i].is_finite());
        }
    }

    #[test]
    fn right_integral_of_constant() {
        let g = grid(400);
        let c = 1.7;
        for rho in [0.2, 0.5, 1.0] {
            let m = rl_integral_right_matrix(rho, &g).unwrap();
            let y = m.apply(&vec![c; g.len()]);
            let gamma_rho1 = gamma(rho + 1.0).unwrap();
            for (t, v) in g.nodes().iter().zip(&y) {
                let want = c * (1.0 - t).powf(rho) / gamma_rho1;
                assert!((v - want).abs() < 1e-3, "rho {rho} t {t}: {v} vs {want}");
            }
            assert_eq!(*y.last().unwrap(), 0.0);
        }
    }

    #[test]
    fn unit_order_integral_is_trapezoid() {
        let g = grid(64);
        let m = rl_integral_right_matrix(1.0, &g).unwrap();
        let x: Vec<f64> = g.nodes().iter().map(|t| (3.0 * t).sin()).collect();
        let y = m.apply(&x);
        let exact = |t: f64| ((3.0 * t).cos() - 3f64.cos()) / 3.0;
        for (t, v) in g.nodes().iter().zip(&y) {
            assert!((v - exact(*t)).abs() < 3.0 * g.step().powi(2));
        }
    }

    #[test]
    fn degenerate_kernel_reproduces_single_order() {
        let g = grid(120);
        let k = DistributionKernel::degenerate(0.5).unwrap();
        let d = distributed_matrix(OperatorKind::DistributedCaputoLeft, &k, &g).unwrap();
        let s = caputo_left_matrix(0.5, &g).unwrap();
        assert_eq!(d.max_abs_difference(&s), 0.0);
        let d = distributed_matrix(OperatorKind::DistributedRLRight, &k, &g).unwrap();
        let s = rl_right_matrix(0.5, &g).unwrap();
        assert_eq!(d.max_abs_difference(&s), 0.0);
    }

    #[test]
    fn degenerate_unit_order_is_backward_difference() {
        let g = grid(10);
        let k = DistributionKernel::degenerate(1.0).unwrap();
        let d = distributed_matrix(OperatorKind::DistributedCaputoLeft, &k, &g).unwrap();
        let x: Vec<f64> = g.nodes().iter().map(|t| t * t).collect();
        let y = d.apply(&x);
        for i in 1..=10 {
            assert!((y[i] - (x[i] - x[i - 1]) / g.step()).abs() < 1e-12);
        }
        let r = distributed_matrix(OperatorKind::DistributedRLRight, &k, &g).unwrap();
        let y = r.apply(&x);
        for i in 0..10 {
            assert!((y[i] + (x[i + 1] - x[i]) / g.step()).abs() < 1e-12);
        }
        let integral = distributed_matrix(OperatorKind::DistributedRLIntegralRight, &k, &g).unwrap();
        assert_eq!(integral.apply(&x), x);
    }

    #[test]
    fn distributed_caputo_of_square_matches_closed_form() {
        let g = grid(2000);
        let k = DistributionKernel::build(&parse("gamma(3-alpha)/2").unwrap(), 20).unwrap();
        let m = distributed_matrix(OperatorKind::DistributedCaputoLeft, &k, &g).unwrap();
        let x: Vec<f64> = g.nodes().iter().map(|t| t * t).collect();
        let y = m.apply(&x);
        let mut err: f64 = 0.0;
        for (i, t) in g.nodes().iter().enumerate().skip(1) {
            let want = if i == g.intervals() { 1.0 } else { t * (t - 1.0) / t.ln() };
            err = err.max((y[i] - want).abs());
        }
        assert!(err <= 2e-2, "sup error {err}");
        let c = m.apply(&vec![4.0; g.len()]);
        assert!(c.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn triangularity_matches_causality() {
        let g = grid(30);
        let k = DistributionKernel::build(&parse("1").unwrap(), 6).unwrap();
        for kind in OperatorKind::ALL.iter().filter(|k| k.is_distributed()) {
            let m = distributed_matrix(*kind, &k, &g).unwrap();
            for i in 0..g.len() {
                for j in 0..g.len() {
                    if (kind.is_left() && j > i) || (!kind.is_left() && j < i) {
                        assert_eq!(m.get(i, j), 0.0, "{kind} ({i},{j})");
                    }
                }
            }
        }
    }

    #[test]
    fn cli_names_round_trip() {
        for k in OperatorKind::ALL {
            assert_eq!(OperatorKind::from_cli_name(k.cli_name()), Some(k));
        }
    }

    #[test]
    fn pow_diff_matches_naive() {
        for j in [1usize, 2, 10, 1000] {
            for p in [0.3, 1.0, 1.7] {
                let naive = ((j + 1) as f64).powf(p) - (j as f64).powf(p);
                assert!((pow_diff(j, p) - naive).abs() < 1e-12 * naive.abs().max(1.0));
            }
        }
    }
}
