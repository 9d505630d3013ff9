use super::{distributed_lower_terminal_term, distributed_matrix, integral_profile, OperatorKind, SampledFn};
use crate::distkernel::DistributionKernel;
use crate::error::{Error, Result};
use crate::specfun::recip_gamma;

/// Sup over nodes `t_i`, `i ≥ 1`, of
/// `|ᶜ𝔻ψ x − (𝔻ψ x − x(a)·Σⱼ cⱼ (t−a)^{−αⱼ}/Γ(1−αⱼ))|`, maximized over
/// components.
pub fn caputo_rl_relation_residual(kernel: &DistributionKernel, x: &SampledFn) -> Result<f64> {
    let grid = x.grid();
    let caputo = distributed_matrix(OperatorKind::DistributedCaputoLeft, kernel, grid)?;
    let rl = distributed_matrix(OperatorKind::DistributedRLLeft, kernel, grid)?;
    let term = distributed_lower_terminal_term(kernel, grid);
    let mut worst: f64 = 0.0;
    for c in x.components() {
        let cx = caputo.apply(c);
        let rx = rl.apply(c);
        for i in 1..grid.len() {
            worst = worst.max((cx[i] - (rx[i] - c[0] * term[i])).abs());
        }
    }
    Ok(worst)
}

/// `|∫ x·ᶜ𝔻ψ_{a+}y dt − [y·𝕀^{1−ψ}_{b−}x]_a^b − ∫ y·𝔻ψ_{b−}x dt|` for scalar
/// `x`, `y`.
///
/// Time integrals use the trapezoid rule, except the lower-terminal part of
/// the right derivative, `x(b)·Σⱼ cⱼ (b−t)^{−αⱼ}/Γ(1−αⱼ)`, which is
/// unbounded at `t = b`: its product with `y` is integrated exactly against
/// the piecewise-linear interpolant of `y`, i.e. as `x(b)·(𝕀^{1−ψ}_{a+}y)(b)`
/// restricted to the nodes with αⱼ < 1.
pub fn integration_by_parts_residual(kernel: &DistributionKernel, x: &SampledFn, y: &SampledFn) -> Result<f64> {
    if x.grid() != y.grid() {
        return Err(Error::DimensionMismatch("x and y are sampled on different grids".into()));
    }
    if x.dim() != 1 || y.dim() != 1 {
        return Err(Error::DimensionMismatch("integration by parts residual takes scalar functions".into()));
    }
    let grid = x.grid();
    let (n, h) = (grid.intervals(), grid.step());
    let (xs, ys) = (x.component(0), y.component(0));

    let caputo_left = distributed_matrix(OperatorKind::DistributedCaputoLeft, kernel, grid)?;
    let caputo_right = distributed_matrix(OperatorKind::DistributedCaputoRight, kernel, grid)?;
    let integral_right = distributed_matrix(OperatorKind::DistributedRLIntegralRight, kernel, grid)?;

    let dy = caputo_left.apply(ys);
    let lhs = grid.trapezoid(&xs.iter().zip(&dy).map(|(a, b)| a * b).collect::<Vec<_>>());

    let ix = integral_right.apply(xs);
    let boundary = ys[n] * ix[n] - ys[0] * ix[0];

    let dx = caputo_right.apply(xs);
    let smooth = grid.trapezoid(&ys.iter().zip(&dx).map(|(a, b)| a * b).collect::<Vec<_>>());

    // Σⱼ cⱼ (I^{1−αⱼ}_{a+} y)(b) over the nodes carrying a singular term
    let mut singular = 0.0;
    for (alpha, c) in kernel.iter() {
        if recip_gamma(1.0 - alpha) == 0.0 {
            continue;
        }
        let p = integral_profile(1.0 - alpha, n, h);
        let row_end: f64 = p.edge[n] * ys[0] + (1..=n).map(|m| p.toeplitz[n - m] * ys[m]).sum::<f64>();
        singular += c * row_end;
    }
    let rhs = boundary + smooth + xs[n] * singular;
    Ok((lhs - rhs).abs())
}
