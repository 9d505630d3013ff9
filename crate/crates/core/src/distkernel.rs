//! Quadrature representation of the order distribution ψ on [0, 1].

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::Expr;

/// Default number of Gauss–Legendre nodes.
pub const DEFAULT_NODES: usize = 20;

/// Mass below this is treated as a vanishing distribution.
pub const MIN_MASS: f64 = 1e-12;

/// Gauss–Legendre nodes and weights on [−1, 1], nodes increasing.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 1);
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    let mf = m as f64;
    for i in 0..(m + 1) / 2 {
        // Tricomi initial guess, then Newton on P_m.
        let mut x = -(std::f64::consts::PI * (i as f64 + 0.75) / (mf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(m, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(m, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = x;
        nodes[m - 1 - i] = -x;
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    if m % 2 == 1 {
        nodes[m / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(m: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if m == 0 { 1.0 } else { p1 };
    let prev = if m == 0 { 0.0 } else { p0 };
    let d = m as f64 * (x * p - prev) / (x * x - 1.0);
    (p, d)
}

/// Nodes αⱼ with combined weights cⱼ = wⱼ·ψ(αⱼ), so that
/// `∫₀¹ ψ(α) g(α) dα ≈ Σⱼ cⱼ g(αⱼ)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionKernel {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    mass: f64,
}

impl DistributionKernel {
    /// Gauss–Legendre rule with `m` nodes mapped to [0, 1], weighted by ψ.
    /// `psi` may only reference the variable `alpha`.
    pub fn build(psi: &Expr, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid("kernel needs at least one node"));
        }
        let compiled = psi
            .compile(&["alpha"])
            .map_err(|e| Error::expr("order distribution psi", e))?;
        let (xi, w) = gauss_legendre(m);
        let mut nodes = Vec::with_capacity(m);
        let mut weights = Vec::with_capacity(m);
        for (x, w) in xi.iter().zip(&w) {
            let alpha = 0.5 * (x + 1.0);
            let psi_value = compiled
                .value(&[alpha])
                .map_err(|e| Error::expr(format!("psi at alpha = {alpha}"), e))?;
            if psi_value < 0.0 {
                return Err(Error::invalid(format!(
                    "psi is negative ({psi_value}) at alpha = {alpha}"
                )));
            }
            nodes.push(alpha);
            weights.push(0.5 * w * psi_value);
        }
        Self::from_parts(nodes, weights)
    }

    /// Single node at `alpha0` with unit weight: distributed operators built
    /// on it are the classical single-order ones (`alpha0 = 1` gives the
    /// first derivative).
    pub fn degenerate(alpha0: f64) -> Result<Self> {
        if !(alpha0 > 0.0 && alpha0 <= 1.0) {
            return Err(Error::invalid(format!("degenerate order must be in (0, 1], got {alpha0}")));
        }
        Ok(DistributionKernel {
            nodes: vec![alpha0],
            weights: vec![1.0],
            mass: 1.0,
        })
    }

    /// Explicit node/weight set. Nodes must lie in (0, 1] and increase
    /// strictly; weights must be non-negative with positive sum.
    pub fn from_parts(nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if nodes.is_empty() || nodes.len() != weights.len() {
            return Err(Error::invalid("kernel nodes and weights must be non-empty and equal in length"));
        }
        if nodes.iter().any(|&a| !(a > 0.0 && a <= 1.0)) || nodes.windows(2).any(|p| p[1] <= p[0]) {
            return Err(Error::invalid("kernel nodes must increase strictly inside (0, 1]"));
        }
        if weights.iter().any(|&c| !(c >= 0.0 && c.is_finite())) {
            return Err(Error::invalid("kernel weights must be finite and non-negative"));
        }
        let mass: f64 = weights.iter().sum();
        if mass <= MIN_MASS {
            return Err(Error::invalid(format!(
                "order distribution has vanishing mass {mass:e}"
            )));
        }
        Ok(DistributionKernel { nodes, weights, mass })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// m = ∫₀¹ ψ(α) dα as computed by the rule.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// (αⱼ, cⱼ) pairs.
    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    /// Σⱼ cⱼ g(αⱼ).
    pub fn integrate(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.iter().map(|(a, c)| c * g(a)).sum()
    }

    /// Total weight carried by a node at α = 1 (classical derivative part).
    pub fn first_order_weight(&self) -> f64 {
        self.iter().filter(|(a, _)| *a == 1.0).map(|(_, c)| c).sum()
    }
}
