//! Sufficiency certificate: joint concavity of `L` and every `f` component
//! in `(x, u)` on a sampled box, plus `λ ≥ 0`, makes a Pontryagin extremal
//! a maximizer among admissible pairs staying in the box.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::expr::{Compiled, HESSIAN_REL_STEP};
use crate::fde::{evaluate_objective_with, solve_forward_batch, ProblemSpec, TrajectoryBundle};
use crate::fracops::{OperatorMatrix, SampledFn};

pub const DEFAULT_TOL_PSD: f64 = 1e-8;
pub const DEFAULT_TOL_LAMBDA: f64 = 1e-10;
pub const DEFAULT_INFLATION: f64 = 0.2;
pub const DEFAULT_SAMPLES: usize = 21;

const CAVEAT: &str = "maximality holds among admissible pairs whose (x, u) stay inside the sampled box";

/// Tensor sample grid over `t × x-box × u-box`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleBox {
    pub t: (f64, f64),
    pub x: Vec<(f64, f64)>,
    pub u: Vec<(f64, f64)>,
    pub t_count: usize,
    pub x_count: usize,
    pub u_count: usize,
}

impl SampleBox {
    pub fn new(t: (f64, f64), x: Vec<(f64, f64)>, u: Vec<(f64, f64)>, counts: (usize, usize, usize)) -> Result<Self> {
        let ok = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo <= hi;
        if !ok(t) || !x.iter().copied().all(ok) || !u.iter().copied().all(ok) {
            return Err(Error::invalid("sample box ranges must be finite with lo <= hi"));
        }
        if counts.0 == 0 || counts.1 == 0 || counts.2 == 0 {
            return Err(Error::invalid("sample counts must be positive"));
        }
        Ok(SampleBox {
            t,
            x,
            u,
            t_count: counts.0,
            x_count: counts.1,
            u_count: counts.2,
        })
    }

    /// Observed ranges of the bundle's `x` and `u`, widened by `inflation`
    /// times their width on each side (degenerate ranges by `inflation ·
    /// max(1, |v|)`).
    pub fn around(bundle: &TrajectoryBundle, inflation: f64, samples: usize) -> Result<Self> {
        let range = |c: &[f64]| {
            let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let w = if hi > lo { hi - lo } else { lo.abs().max(1.0) };
            (lo - inflation * w, hi + inflation * w)
        };
        SampleBox::new(
            (bundle.grid.a(), bundle.grid.b()),
            bundle.x.components().iter().map(|c| range(c)).collect(),
            bundle.u.components().iter().map(|c| range(c)).collect(),
            (samples, samples, samples),
        )
    }

    fn axis(range: (f64, f64), count: usize, k: usize) -> f64 {
        if count == 1 {
            0.5 * (range.0 + range.1)
        } else if k + 1 == count {
            range.1
        } else {
            range.0 + (range.1 - range.0) * k as f64 / (count - 1) as f64
        }
    }

    pub fn sample_count(&self) -> usize {
        self.t_count * self.x_count.pow(self.x.len() as u32) * self.u_count.pow(self.u.len() as u32)
    }

    /// Sample `idx` as `[t, x.., u..]`, `t` varying slowest.
    pub fn sample(&self, mut idx: usize) -> Vec<f64> {
        let dims = self.x.len() + self.u.len();
        let mut p = vec![0.0; 1 + dims];
        for d in (0..dims).rev() {
            let (range, count) = if d < self.x.len() {
                (self.x[d], self.x_count)
            } else {
                (self.u[d - self.x.len()], self.u_count)
            };
            p[1 + d] = Self::axis(range, count, idx % count);
            idx /= count;
        }
        p[0] = Self::axis(self.t, self.t_count, idx);
        p
    }
}

/// Worst (largest) Hessian eigenvalue of one function over the box.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FunctionConcavity {
    pub function: String,
    pub worst_eigenvalue: f64,
    /// `[t, x.., u..]` where the worst eigenvalue occurs.
    pub worst_point: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub kind: &'static str,
    pub function: String,
    pub point: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcavityCheck {
    pub concave: bool,
    pub functions: Vec<FunctionConcavity>,
    pub witnesses: Vec<Witness>,
    pub reason: Option<String>,
}

fn largest_eigenvalue(k: usize, h: &[f64]) -> f64 {
    if k == 1 {
        return h[0];
    }
    SymmetricEigen::new(DMatrix::from_row_slice(k, k, h))
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Samples the `(x, u)` Hessians of `L` and each `f` component.
pub fn check_concavity(p: &ProblemSpec, sbox: &SampleBox, tol_psd: f64) -> Result<ConcavityCheck> {
    check_concavity_with(p, sbox, tol_psd, Exec::default())
}

pub fn check_concavity_with(p: &ProblemSpec, sbox: &SampleBox, tol_psd: f64, exec: Exec) -> Result<ConcavityCheck> {
    if sbox.x.len() != p.state_dim() || sbox.u.len() != p.control_dim() {
        return Err(Error::DimensionMismatch("sample box does not match (n, m)".into()));
    }
    let mut named: Vec<(String, &Compiled)> = vec![("L".to_string(), p.lagrangian())];
    for (j, f) in p.dynamics().iter().enumerate() {
        named.push((format!("f{}", j + 1), f));
    }
    if p.uses_nonsmooth() {
        let witnesses = named
            .iter()
            .filter(|(_, c)| c.uses_abs())
            .map(|(name, _)| Witness {
                kind: "non-smooth",
                function: name.clone(),
                point: vec![],
                value: f64::NAN,
            })
            .collect();
        return Ok(ConcavityCheck {
            concave: false,
            functions: vec![],
            witnesses,
            reason: Some("non-smooth".into()),
        });
    }

    let k = p.state_dim() + p.control_dim();
    let wrt: Vec<usize> = (1..=k).collect();
    let per_sample = exec.try_map_range(sbox.sample_count(), |s| {
        let point = sbox.sample(s);
        named
            .iter()
            .map(|(name, c)| {
                p.eval_at(&point, |q| c.hessian(q, &wrt, HESSIAN_REL_STEP))
                    .map(|h| largest_eigenvalue(k, &h))
                    .map_err(|e| Error::expr(format!("Hessian of {name} at {point:?}"), e))
            })
            .collect::<Result<Vec<f64>>>()
    })?;

    let mut functions = Vec::with_capacity(named.len());
    let mut witnesses = Vec::new();
    for (fi, (name, _)) in named.iter().enumerate() {
        let (mut worst, mut at) = (f64::NEG_INFINITY, 0);
        for (s, vals) in per_sample.iter().enumerate() {
            if vals[fi] > worst {
                worst = vals[fi];
                at = s;
            }
        }
        let point = sbox.sample(at);
        if worst > tol_psd {
            witnesses.push(Witness {
                kind: "hessian",
                function: name.clone(),
                point: point.clone(),
                value: worst,
            });
        }
        functions.push(FunctionConcavity {
            function: name.clone(),
            worst_eigenvalue: worst,
            worst_point: point,
        });
    }
    let concave = witnesses.is_empty();
    Ok(ConcavityCheck {
        concave,
        functions,
        reason: (!concave).then(|| "positive Hessian eigenvalue".to_string()),
        witnesses,
    })
}

/// `(min λ ≥ −tol, min λ)` over all components and nodes.
pub fn check_multiplier_sign(lambda: &SampledFn, tol_lambda: f64) -> (bool, f64) {
    let min = lambda
        .components()
        .iter()
        .flat_map(|c| c.iter().copied())
        .fold(f64::INFINITY, f64::min);
    (min >= -tol_lambda, min)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Certified,
    Refused,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    pub psd: f64,
    pub lambda: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            psd: DEFAULT_TOL_PSD,
            lambda: DEFAULT_TOL_LAMBDA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcavityCertificate {
    pub verdict: Verdict,
    pub functions: Vec<FunctionConcavity>,
    pub min_lambda: f64,
    pub sample_box: SampleBox,
    pub witnesses: Vec<Witness>,
    pub reasons: Vec<String>,
    pub tolerances: Tolerances,
    pub caveat: &'static str,
}

/// Combines [`check_concavity`] and [`check_multiplier_sign`]. Without an
/// explicit box the default one around the bundle is used.
pub fn sufficiency_report(
    p: &ProblemSpec,
    bundle: &TrajectoryBundle,
    sbox: Option<SampleBox>,
    tol: Tolerances,
) -> Result<ConcavityCertificate> {
    sufficiency_report_with(p, bundle, sbox, tol, Exec::default())
}

pub fn sufficiency_report_with(
    p: &ProblemSpec,
    bundle: &TrajectoryBundle,
    sbox: Option<SampleBox>,
    tol: Tolerances,
    exec: Exec,
) -> Result<ConcavityCertificate> {
    bundle.check_against(p)?;
    let lambda = bundle
        .lambda
        .as_ref()
        .ok_or_else(|| Error::invalid("sufficiency check needs an adjoint in the bundle"))?;
    let sbox = match sbox {
        Some(b) => b,
        None => SampleBox::around(bundle, DEFAULT_INFLATION, DEFAULT_SAMPLES)?,
    };
    let conc = check_concavity_with(p, &sbox, tol.psd, exec)?;
    let (sign_ok, min_lambda) = check_multiplier_sign(lambda, tol.lambda);

    let mut witnesses = conc.witnesses;
    let mut reasons: Vec<String> = conc.reason.into_iter().collect();
    if !sign_ok {
        reasons.push("negative multiplier".into());
        for (j, c) in lambda.components().iter().enumerate() {
            let (i, v) = c
                .iter()
                .copied()
                .enumerate()
                .fold((0, f64::INFINITY), |(bi, bv), (i, v)| if v < bv { (i, v) } else { (bi, bv) });
            if v < -tol.lambda {
                witnesses.push(Witness {
                    kind: "multiplier",
                    function: format!("lambda{}", j + 1),
                    point: vec![bundle.grid.node(i)],
                    value: v,
                });
            }
        }
    }
    let verdict = if conc.concave && sign_ok { Verdict::Certified } else { Verdict::Refused };
    Ok(ConcavityCertificate {
        verdict,
        functions: conc.functions,
        min_lambda,
        sample_box: sbox,
        witnesses,
        reasons,
        tolerances: tol,
        caveat: CAVEAT,
    })
}

/// Objective of the bundle versus objectives of perturbed admissible pairs
/// `(x(u + h), u + h)`, each solved forward.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbationAudit {
    pub objective: f64,
    pub perturbed: Vec<f64>,
    /// `max(J_perturbed − J)`; non-positive when no perturbation improves.
    pub worst_gain: f64,
}

pub fn perturbation_audit(
    p: &ProblemSpec,
    a: &OperatorMatrix,
    bundle: &TrajectoryBundle,
    directions: &[SampledFn],
    exec: Exec,
) -> Result<PerturbationAudit> {
    bundle.check_against(p)?;
    let objective = evaluate_objective_with(p, bundle, exec)?;
    let controls = directions
        .iter()
        .map(|h| {
            if h.grid() != &bundle.grid || h.dim() != p.control_dim() {
                return Err(Error::DimensionMismatch("perturbation does not match the bundle control".into()));
            }
            let comps = bundle
                .u
                .components()
                .iter()
                .zip(h.components())
                .map(|(u, d)| u.iter().zip(d).map(|(a, b)| a + b).collect())
                .collect();
            SampledFn::new(bundle.grid, comps)
        })
        .collect::<Result<Vec<_>>>()?;
    let states = solve_forward_batch(p, a, &controls, exec)?;
    let perturbed = states
        .into_iter()
        .zip(controls)
        .map(|(x, u)| evaluate_objective_with(p, &TrajectoryBundle::new(x, u, None)?, Exec::Sequential))
        .collect::<Result<Vec<_>>>()?;
    let worst_gain = perturbed.iter().map(|j| j - objective).fold(f64::NEG_INFINITY, f64::max);
    Ok(PerturbationAudit {
        objective,
        perturbed,
        worst_gain,
    })
}
