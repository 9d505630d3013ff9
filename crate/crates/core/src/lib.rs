//! Numerical toolkit for distributed-order fractional optimal control.
//!
//! Problems have the form: maximize `J = ∫ₐᵇ L(t, x, u) dt` subject to
//! `ᶜ𝔻ψ_{a+} x = f(t, x, u)`, `x(a) = xₐ`, where `ᶜ𝔻ψ_{a+}` is the
//! Caputo derivative averaged over orders α ∈ [0, 1] with weight ψ(α).
//!
//! * [`expr`]: expression parsing and forward-mode differentiation.
//! * [`specfun`]: Γ, Mittag-Leffler, fractional Gronwall envelope.
//! * [`distkernel`]: Gauss–Legendre reduction of the ψ-integral.
//! * [`fracops`]: dense discrete operators and identity residuals.
//! * [`fde`]: problem model, forward and variational solvers.
//! * [`pmp`]: adjoint solver, optimality update, forward–backward sweep.
//! * [`mangasarian`]: concavity/sign certificate for global optimality.

pub mod distkernel;
pub mod error;
pub mod exec;
pub mod expr;
pub mod fde;
pub mod fracops;
pub mod grid;
mod linalg;
pub mod mangasarian;
pub mod pmp;
pub mod specfun;

pub use distkernel::DistributionKernel;
pub use error::{Error, Result};
pub use exec::Exec;
pub use fde::{BoundaryMode, ProblemSpec, TrajectoryBundle};
pub use fracops::{OperatorKind, OperatorMatrix, SampledFn};
pub use grid::Grid;
