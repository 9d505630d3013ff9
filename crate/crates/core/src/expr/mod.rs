//! Arithmetic expressions for the user-supplied functions `L`, `f` and `ψ`.
//!
//! Expressions are parsed once into an [`Expr`] tree and then either
//! evaluated directly against [`Bindings`] or compiled to slot-indexed form
//! ([`Compiled`]) for repeated evaluation inside the solvers. Derivatives
//! are exact forward-mode ([`Dual`]); second derivatives are central
//! differences of the AD gradient.

mod ast;
mod dual;
mod eval;
mod parse;

pub use ast::{BinOp, Expr, Func};
pub use dual::{Dual, Scalar};
pub use eval::{eval, hessian_xu, partials, Bindings, Compiled, HESSIAN_REL_STEP};
pub use parse::parse;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at offset {offset}: expected {expected}, found {found}")]
    Syntax {
        offset: usize,
        expected: String,
        found: String,
    },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unbound variable '{0}'")]
    Unbound(String),
}
