use std::collections::BTreeMap;

use super::ast::{BinOp, Expr, Func};
use super::dual::{Dual, Scalar};
use super::ExprError;
use crate::specfun;

/// Variable name to value map supplied at evaluation time.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Bindings {
    values: BTreeMap<String, f64>,
}

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builder-style insert. Function names cannot be bound.
    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.set(name, value);
        self
    }

    pub fn set(&mut self, name: &str, value: f64) {
        assert!(
            Func::from_name(name).is_none(),
            "'{name}' is a function name and cannot be bound"
        );
        self.values.insert(name.to_string(), value);
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.get(name).copied()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone)]
enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

/// Expression with variables resolved to slot indices. Immutable and `Sync`;
/// evaluation is pure.
#[derive(Debug, Clone)]
pub struct Compiled {
    node: Node,
    source: Expr,
    arity: usize,
}

impl Expr {
    /// Resolves every variable through `slot_of`; unknown names are errors.
    pub fn compile_with<F>(&self, arity: usize, slot_of: F) -> Result<Compiled, ExprError>
    where
        F: Fn(&str) -> Option<usize>,
    {
        fn go<F: Fn(&str) -> Option<usize>>(e: &Expr, slot_of: &F) -> Result<Node, ExprError> {
            Ok(match e {
                Expr::Num(v) => Node::Num(*v),
                Expr::Var(name) => {
                    Node::Var(slot_of(name).ok_or_else(|| ExprError::Unbound(name.clone()))?)
                }
                Expr::Neg(inner) => Node::Neg(Box::new(go(inner, slot_of)?)),
                Expr::Binary(op, l, r) => {
                    Node::Binary(*op, Box::new(go(l, slot_of)?), Box::new(go(r, slot_of)?))
                }
                Expr::Call(f, args) => Node::Call(
                    *f,
                    args.iter().map(|a| go(a, slot_of)).collect::<Result<_, _>>()?,
                ),
            })
        }
        let node = go(self, &slot_of)?;
        Ok(Compiled {
            node,
            source: self.clone(),
            arity,
        })
    }

    /// Compiles against an ordered list of slot names.
    pub fn compile(&self, slots: &[&str]) -> Result<Compiled, ExprError> {
        self.compile_with(slots.len(), |name| slots.iter().position(|s| *s == name))
    }
}

fn domain(msg: impl Into<String>) -> ExprError {
    ExprError::Domain(msg.into())
}

fn eval_node<S: Scalar>(node: &Node, vals: &[S]) -> Result<S, ExprError> {
    Ok(match node {
        Node::Num(v) => S::constant(*v),
        Node::Var(i) => vals[*i],
        Node::Neg(inner) => -eval_node(inner, vals)?,
        Node::Binary(op, l, r) => {
            let a = eval_node(l, vals)?;
            let b = eval_node(r, vals)?;
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => {
                    if b.re() == 0.0 {
                        return Err(domain("division by zero"));
                    }
                    a / b
                }
                BinOp::Pow => checked_pow(a, b)?,
            }
        }
        Node::Call(f, args) => {
            let a = eval_node(&args[0], vals)?;
            match f {
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Exp => a.exp(),
                Func::Ln => {
                    if a.re() <= 0.0 {
                        return Err(domain(format!("ln of non-positive value {}", a.re())));
                    }
                    a.ln()
                }
                Func::Sqrt => {
                    if a.re() < 0.0 {
                        return Err(domain(format!("sqrt of negative value {}", a.re())));
                    }
                    a.sqrt()
                }
                Func::Abs => a.abs(),
                Func::Gamma => {
                    if specfun::is_gamma_pole(a.re()) {
                        return Err(domain(format!("gamma pole at {}", a.re())));
                    }
                    a.gamma()
                }
                Func::Pow => {
                    let b = eval_node(&args[1], vals)?;
                    checked_pow(a, b)?
                }
            }
        }
    })
}

fn checked_pow<S: Scalar>(base: S, exponent: S) -> Result<S, ExprError> {
    let (b, e) = (base.re(), exponent.re());
    if b == 0.0 && e < 0.0 {
        return Err(domain("zero raised to a negative power"));
    }
    if b < 0.0 && e.fract() != 0.0 {
        return Err(domain(format!("negative base {b} with non-integer exponent {e}")));
    }
    Ok(base.pow(exponent))
}

impl Compiled {
    pub fn source(&self) -> &Expr {
        &self.source
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn uses_abs(&self) -> bool {
        self.source.uses_abs()
    }

    fn finish<S: Scalar>(v: S) -> Result<S, ExprError> {
        if v.is_finite() {
            Ok(v)
        } else {
            Err(domain("non-finite result"))
        }
    }

    /// Evaluates with `vals[i]` bound to slot `i`.
    pub fn eval_generic<S: Scalar>(&self, vals: &[S]) -> Result<S, ExprError> {
        debug_assert_eq!(vals.len(), self.arity);
        Self::finish(eval_node(&self.node, vals)?)
    }

    pub fn value(&self, vals: &[f64]) -> Result<f64, ExprError> {
        self.eval_generic(vals)
    }

    /// Value and derivative with respect to slot `wrt`.
    pub fn value_and_derivative(&self, vals: &[f64], wrt: usize) -> Result<(f64, f64), ExprError> {
        let duals: Vec<Dual> = vals
            .iter()
            .enumerate()
            .map(|(i, &v)| Dual::new(v, if i == wrt { 1.0 } else { 0.0 }))
            .collect();
        let d = self.eval_generic(&duals)?;
        Ok((d.re, d.eps))
    }

    /// Forward-mode derivatives, one dual pass per entry of `wrt`.
    pub fn gradient(&self, vals: &[f64], wrt: &[usize]) -> Result<Vec<f64>, ExprError> {
        let mut duals: Vec<Dual> = vals.iter().map(|&v| Dual::constant(v)).collect();
        let mut out = Vec::with_capacity(wrt.len());
        for &k in wrt {
            duals[k].eps = 1.0;
            out.push(self.eval_generic(&duals)?.eps);
            duals[k].eps = 0.0;
        }
        Ok(out)
    }

    /// Symmetrized central differences of the AD gradient, step
    /// `rel_step·max(1, |coordinate|)` per coordinate. Row-major `wrt.len()²`.
    pub fn hessian(&self, vals: &[f64], wrt: &[usize], rel_step: f64) -> Result<Vec<f64>, ExprError> {
        let k = wrt.len();
        let mut h = vec![0.0; k * k];
        let mut point = vals.to_vec();
        for (col, &slot) in wrt.iter().enumerate() {
            let step = rel_step * point[slot].abs().max(1.0);
            let centre = point[slot];
            point[slot] = centre + step;
            let plus = self.gradient(&point, wrt)?;
            point[slot] = centre - step;
            let minus = self.gradient(&point, wrt)?;
            point[slot] = centre;
            for row in 0..k {
                h[row * k + col] = (plus[row] - minus[row]) / (2.0 * step);
            }
        }
        for r in 0..k {
            for c in (r + 1)..k {
                let s = 0.5 * (h[r * k + c] + h[c * k + r]);
                h[r * k + c] = s;
                h[c * k + r] = s;
            }
        }
        Ok(h)
    }
}

/// Default relative finite-difference step for second derivatives.
pub const HESSIAN_REL_STEP: f64 = 1e-4;

fn compile_for_bindings(e: &Expr, b: &Bindings) -> Result<(Compiled, Vec<f64>), ExprError> {
    let names: Vec<&str> = b.values.keys().map(String::as_str).collect();
    let vals: Vec<f64> = b.values.values().copied().collect();
    Ok((e.compile(&names)?, vals))
}

fn slots_of(names: &[&str], b: &Bindings) -> Result<Vec<usize>, ExprError> {
    names
        .iter()
        .map(|n| {
            b.values
                .keys()
                .position(|k| k == n)
                .ok_or_else(|| ExprError::Unbound((*n).to_string()))
        })
        .collect()
}

/// Evaluates `e` under `b`.
pub fn eval(e: &Expr, b: &Bindings) -> Result<f64, ExprError> {
    let (c, vals) = compile_for_bindings(e, b)?;
    c.value(&vals)
}

/// Exact first partial derivatives with respect to each name in `wrt`.
pub fn partials(e: &Expr, wrt: &[&str], b: &Bindings) -> Result<Vec<f64>, ExprError> {
    let (c, vals) = compile_for_bindings(e, b)?;
    c.gradient(&vals, &slots_of(wrt, b)?)
}

/// Symmetric Hessian block over the variables in `wrt`, by central
/// differences of the AD gradient with relative step `rel_step`.
pub fn hessian_xu(e: &Expr, wrt: &[&str], b: &Bindings, rel_step: f64) -> Result<Vec<f64>, ExprError> {
    let (c, vals) = compile_for_bindings(e, b)?;
    c.hessian(&vals, &slots_of(wrt, b)?, rel_step)
}
