//! Gamma, two-parameter Mittag-Leffler and the fractional Gronwall envelope.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::grid::Grid;

/// True at the poles of Γ (zero and the negative integers).
pub fn is_gamma_pole(x: f64) -> bool {
    x <= 0.0 && x.fract() == 0.0
}

/// Γ(x) without pole checking; NaN/inf at poles. Exact factorials at
/// positive integers.
pub(crate) fn gamma_unchecked(x: f64) -> f64 {
    if x.fract() == 0.0 && (1.0..=171.0).contains(&x) {
        return (1..x as u32).fold(1.0, |acc, k| acc * k as f64);
    }
    statrs::function::gamma::gamma(x)
}

/// Γ(x). Errors at the poles.
pub fn gamma(x: f64) -> Result<f64> {
    if is_gamma_pole(x) || x.is_nan() {
        return Err(Error::Pole(x));
    }
    Ok(gamma_unchecked(x))
}

/// 1/Γ(x), which is entire: zero at the poles of Γ.
pub fn recip_gamma(x: f64) -> f64 {
    if is_gamma_pole(x) {
        0.0
    } else {
        1.0 / gamma_unchecked(x)
    }
}

/// ln Γ(x) for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// Digamma ψ(x) = Γ'(x)/Γ(x).
pub fn digamma(x: f64) -> f64 {
    statrs::function::gamma::digamma(x)
}

/// Series terms beyond this count are treated as non-convergence.
pub const MITTAG_LEFFLER_MAX_TERMS: usize = 10_000;
/// Largest |z| accepted when α ≥ 0.3.
pub const MITTAG_LEFFLER_MAX_ARG: f64 = 50.0;

/// Result of a Mittag-Leffler series summation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesSum {
    pub value: f64,
    /// Number of terms summed.
    pub terms: usize,
    /// Magnitude of the first neglected term.
    pub tail: f64,
}

/// E_{α,β}(z) = Σ_{k≥0} z^k / Γ(αk + β) by direct summation.
pub fn mittag_leffler(alpha: f64, beta: f64, z: f64) -> Result<f64> {
    mittag_leffler_series(alpha, beta, z).map(|s| s.value)
}

/// Same as [`mittag_leffler`] but also reports the truncation.
pub fn mittag_leffler_series(alpha: f64, beta: f64, z: f64) -> Result<SeriesSum> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::invalid(format!("Mittag-Leffler needs alpha > 0, got {alpha}")));
    }
    if !z.is_finite() || !beta.is_finite() {
        return Err(Error::invalid("Mittag-Leffler arguments must be finite"));
    }
    if alpha >= 0.3 && z.abs() > MITTAG_LEFFLER_MAX_ARG {
        return Err(Error::invalid(format!(
            "|z| = {} exceeds the direct-series range {MITTAG_LEFFLER_MAX_ARG}",
            z.abs()
        )));
    }
    if z == 0.0 {
        return Ok(SeriesSum {
            value: recip_gamma(beta),
            terms: 1,
            tail: 0.0,
        });
    }
    let ln_abs_z = z.abs().ln();
    let mut sum: f64 = 0.0;
    let mut past_peak = false;
    let mut prev = f64::INFINITY;
    for k in 0..MITTAG_LEFFLER_MAX_TERMS {
        let arg = alpha * k as f64 + beta;
        let mag = if arg > 0.0 {
            (k as f64 * ln_abs_z - ln_gamma(arg)).exp()
        } else {
            (z.abs().powi(k as i32) * recip_gamma(arg)).abs()
        };
        let sign = if z < 0.0 && k % 2 == 1 { -1.0 } else { 1.0 };
        let sign = if arg <= 0.0 && recip_gamma(arg) < 0.0 { -sign } else { sign };
        past_peak |= mag < prev;
        prev = mag;
        if past_peak && k > 0 && (mag < 1e-16 * sum.abs() || mag == 0.0) {
            return Ok(SeriesSum {
                value: sum,
                terms: k,
                tail: mag,
            });
        }
        sum += sign * mag;
        if !sum.is_finite() {
            break;
        }
    }
    Err(Error::NonConvergence {
        what: "Mittag-Leffler series",
        detail: format!("alpha = {alpha}, beta = {beta}, z = {z}"),
    })
}

/// Upper envelope for non-negative `u` satisfying
/// `u(t) ≤ a(t) + b(t) ∫₀ᵗ (t−s)^{α−1} u(s) ds`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GronwallEnvelope {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Largest number of series terms used by any kernel evaluation.
    pub truncation_index: usize,
    /// Largest relative size of the first neglected term.
    pub max_relative_tail: f64,
}

/// Evaluates `a(t) + ∫₀ᵗ Σ_{n≥1} (b(t)Γ(α))ⁿ/Γ(nα) (t−s)^{nα−1} a(s) ds`
/// on the grid (times measured from the grid start).
///
/// The kernel is integrated exactly on each cell against a piecewise-constant
/// interpolant of `a` taking the larger endpoint value: the cell integral of
/// the series is `E_α(β τ₁^α) − E_α(β τ₀^α)` with `β = b(t)Γ(α)`, which also
/// absorbs the integrable singularity at `s = t` on the final cell.
pub fn gronwall_envelope(a: &[f64], b: &[f64], alpha: f64, grid: &Grid) -> Result<GronwallEnvelope> {
    gronwall_envelope_with(a, b, alpha, grid, Exec::default())
}

pub fn gronwall_envelope_with(
    a: &[f64],
    b: &[f64],
    alpha: f64,
    grid: &Grid,
    exec: Exec,
) -> Result<GronwallEnvelope> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid(format!("Gronwall order must be in (0, 1], got {alpha}")));
    }
    if a.len() != grid.len() || b.len() != grid.len() {
        return Err(Error::DimensionMismatch(format!(
            "a has {} and b has {} samples, grid has {}",
            a.len(),
            b.len(),
            grid.len()
        )));
    }
    if let Some(i) = a.iter().chain(b).position(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::invalid(format!("a and b must be finite and non-negative (entry {i})")));
    }
    if let Some(i) = b.windows(2).position(|w| w[1] < w[0]) {
        return Err(Error::invalid(format!("b must be non-decreasing (fails at index {i})")));
    }

    let h = grid.step();
    let gamma_alpha = gamma(alpha)?;
    let rows = exec.try_map_range(grid.len(), |i| -> Result<(f64, usize, f64)> {
        let beta = b[i] * gamma_alpha;
        if i == 0 || beta == 0.0 {
            return Ok((a[i], 0, 0.0));
        }
        // E_α(β (j h)^α) for j = 0..=i, reused by adjacent cells.
        let mut e = Vec::with_capacity(i + 1);
        let (mut terms, mut tail) = (0usize, 0.0f64);
        for j in 0..=i {
            let s = mittag_leffler_series(alpha, 1.0, beta * (j as f64 * h).powf(alpha))?;
            terms = terms.max(s.terms);
            tail = tail.max(s.tail / s.value.abs().max(f64::MIN_POSITIVE));
            e.push(s.value);
        }
        let mut integral = 0.0;
        for k in 0..i {
            // cell [t_k, t_{k+1}] maps to τ ∈ [(i−k−1)h, (i−k)h]
            let weight = e[i - k] - e[i - k - 1];
            integral += a[k].max(a[k + 1]) * weight;
        }
        Ok((a[i] + integral, terms, tail))
    })?;
    Ok(GronwallEnvelope {
        times: grid.nodes(),
        values: rows.iter().map(|r| r.0).collect(),
        truncation_index: rows.iter().map(|r| r.1).max().unwrap_or(0),
        max_relative_tail: rows.iter().map(|r| r.2).fold(0.0, f64::max),
    })
}
