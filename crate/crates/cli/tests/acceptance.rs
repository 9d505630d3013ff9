//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the
//! libtest harness so the lines are visible in `cargo test` output.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use docsolve::expr::parse;
use docsolve::fde::{evaluate_objective, solve_forward, solve_variational};
use docsolve::fracops::{
    caputo_rl_relation_residual, distributed_matrix, integration_by_parts_residual, single_order_matrix,
};
use docsolve::pmp::{discrete_ibp_defect, fbsm_solve, pmp_residuals, SweepParams};
use docsolve::specfun::{gamma, gronwall_envelope, mittag_leffler};
use docsolve::{BoundaryMode, DistributionKernel, Grid, OperatorKind, ProblemSpec, SampledFn, TrajectoryBundle};

const EX1_L: &str = "-(x - t^2)^2 - (u - t*(t-1)/ln(t))^2";
const EX1_PSI: &str = "gamma(3-alpha)/2";

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_docsolve")
}

fn bundled() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/paper-example1.json")
}

fn g_star(t: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else if t == 1.0 {
        1.0
    } else {
        t * (t - 1.0) / t.ln()
    }
}

fn scalar_problem(l: &str, f: &str, psi: &str, x0: f64) -> ProblemSpec {
    ProblemSpec::new(
        parse(l).unwrap(),
        vec![parse(f).unwrap()],
        parse(psi).unwrap(),
        (0.0, 1.0),
        1,
        1,
        BoundaryMode::InitialFixed(vec![x0]),
        None,
    )
    .unwrap()
}

fn ex1_kernel() -> DistributionKernel {
    DistributionKernel::build(&parse(EX1_PSI).unwrap(), 20).unwrap()
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn read_csv(path: &Path) -> Vec<Vec<f64>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|rec| rec.unwrap().iter().map(|s| s.parse().unwrap()).collect())
        .collect()
}

fn example1_reproduction() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("ex1");
    let start = Instant::now();
    let status = Command::new(bin())
        .arg("solve")
        .arg(bundled())
        .arg("--out")
        .arg(&prefix)
        .status()
        .unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("ex1-summary.json")).unwrap()).unwrap();
    let rows = read_csv(&dir.path().join("ex1-trajectory.csv"));
    let ex = rows.iter().map(|r| (r[1] - r[0] * r[0]).abs()).fold(0.0, f64::max);
    let eu = rows.iter().map(|r| (r[2] - g_star(r[0])).abs()).fold(0.0, f64::max);
    let iterations = summary["iterations"].as_u64().unwrap();
    let j = summary["objective"].as_f64().unwrap();
    let pass = status.code() == Some(0)
        && summary["converged"].as_bool() == Some(true)
        && iterations <= 200
        && ex <= 2e-2
        && eu <= 2e-2
        && (-1e-3..=0.0).contains(&j)
        && elapsed <= 60.0;
    outcome(
        pass,
        format!("sweeps {iterations}, sup|x-t^2| {ex:.2e}, sup|u-u*| {eu:.2e}, J {j:.2e}, {elapsed:.1} s"),
    )
}

fn residual_refinement() -> Outcome {
    let p = scalar_problem(EX1_L, "u", EX1_PSI, 0.0);
    let k = ex1_kernel();
    let mut reports = Vec::new();
    for n in [500, 1000, 2000] {
        let g = Grid::new(0.0, 1.0, n).unwrap();
        let bundle = TrajectoryBundle::new(
            SampledFn::from_fn(g, |t| t * t).unwrap(),
            SampledFn::from_fn(g, g_star).unwrap(),
            Some(SampledFn::zeros(g, 1)),
        )
        .unwrap();
        reports.push(pmp_residuals(&p, &k, &g, &bundle).unwrap());
    }
    let monotone = reports.windows(2).all(|w| {
        w[1].optimality <= w[0].optimality
            && w[1].adjoint <= w[0].adjoint
            && w[1].transversality_b.unwrap() <= w[0].transversality_b.unwrap()
            && w[1].state < w[0].state
    });
    let g = Grid::new(0.0, 1.0, 2000).unwrap();
    let a = distributed_matrix(OperatorKind::DistributedCaputoLeft, &k, &g).unwrap();
    let x: Vec<f64> = g.nodes().iter().map(|t| t.sin() + t * t).collect();
    let l: Vec<f64> = g.nodes().iter().map(|t| (2.0 * t).cos() - 0.3).collect();
    let defect = discrete_ibp_defect(&a, &x, &l);
    let last = reports.last().unwrap();
    outcome(
        monotone && defect <= 1e-10,
        format!(
            "N=2000: optimality {:.2e}, adjoint {:.2e}, transversality {:.2e}, state {:.2e} (from {:.2e}); transpose identity defect {defect:.2e}",
            last.optimality,
            last.adjoint,
            last.transversality_b.unwrap(),
            last.state,
            reports[0].state
        ),
    )
}

fn certification() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let traj = dir.path().join("reference.csv");
    let ok = Command::new(bin())
        .arg("reference")
        .arg(bundled())
        .arg("--output")
        .arg(&traj)
        .status()
        .unwrap()
        .success();
    let run = |problem: &Path| {
        let out = Command::new(bin()).arg("sufficiency").arg(problem).arg(&traj).output().unwrap();
        let cert: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        (out.status.code(), cert)
    };
    let (code, cert) = run(&bundled());
    let eig = cert["functions"][0]["worst_eigenvalue"].as_f64().unwrap();
    let min_l = cert["min_lambda"].as_f64().unwrap();
    let convex = dir.path().join("convex.json");
    let text = std::fs::read_to_string(bundled()).unwrap().replace("\"-(x - t^2)^2", "\"(x - t^2)^2");
    std::fs::write(&convex, text).unwrap();
    let (code_c, cert_c) = run(&convex);
    let pass = ok
        && code == Some(0)
        && cert["verdict"] == "Certified"
        && (eig + 2.0).abs() <= 1e-6
        && min_l >= -1e-10
        && code_c == Some(2)
        && cert_c["verdict"] == "Refused";
    outcome(
        pass,
        format!("reference triple {} (eigenvalue {eig:.9}, min lambda {min_l:e}); convexified {}", cert["verdict"], cert_c["verdict"]),
    )
}

fn operator_oracles() -> Outcome {
    use docsolve::specfun::gamma as g;
    let mut worst_order = f64::INFINITY;
    let mut exact_ok = true;
    for alpha in [0.3, 0.5, 0.7] {
        for p in [1, 2, 3] {
            let pf = p as f64;
            let c = g(pf + 1.0).unwrap() / g(pf + 1.0 - alpha).unwrap();
            let errs: Vec<f64> = [200, 400, 800]
                .iter()
                .map(|&n| {
                    let grid = Grid::new(0.0, 1.0, n).unwrap();
                    let m = single_order_matrix(OperatorKind::CaputoLeft, alpha, &grid).unwrap();
                    let y = m.apply(&grid.nodes().iter().map(|t| t.powi(p)).collect::<Vec<_>>());
                    grid.nodes()
                        .iter()
                        .zip(&y)
                        .map(|(t, v)| (v - c * t.powf(pf - alpha)).abs())
                        .fold(0.0, f64::max)
                })
                .collect();
            if errs[2] < 1e-12 {
                continue; // reproduced exactly (p = 1)
            }
            for w in errs.windows(2) {
                let order = (w[0] / w[1]).log2();
                worst_order = worst_order.min(order);
            }
            exact_ok &= errs[2] < 1e-2;
        }
    }

    let k = ex1_kernel();
    let grid = Grid::new(0.0, 1.0, 300).unwrap();
    let mut sum_err: f64 = 0.0;
    for kind in [
        OperatorKind::DistributedCaputoLeft,
        OperatorKind::DistributedCaputoRight,
        OperatorKind::DistributedRLLeft,
        OperatorKind::DistributedRLRight,
        OperatorKind::DistributedRLIntegralLeft,
        OperatorKind::DistributedRLIntegralRight,
    ] {
        let d = distributed_matrix(kind, &k, &grid).unwrap();
        let integral = matches!(kind, OperatorKind::DistributedRLIntegralLeft | OperatorKind::DistributedRLIntegralRight);
        let mut acc = vec![0.0; grid.len() * grid.len()];
        for (alpha, c) in k.iter() {
            let order = if integral { 1.0 - alpha } else { alpha };
            let s = single_order_matrix(kind.single_order(), order, &grid).unwrap();
            for i in 0..grid.len() {
                for (j, v) in s.row(i).iter().enumerate() {
                    acc[i * grid.len() + j] += c * v;
                }
            }
        }
        for i in 0..grid.len() {
            for (j, v) in d.row(i).iter().enumerate() {
                let want = acc[i * grid.len() + j];
                sum_err = sum_err.max((v - want).abs() / want.abs().max(1.0));
            }
        }
    }

    let mut relation_ok = true;
    let mut relation_worst: f64 = 0.0;
    for n in [100, 400, 1600] {
        let grid = Grid::new(0.0, 1.0, n).unwrap();
        for f in [|t: f64| t.sin() * t, |t: f64| t.exp(), |t: f64| 1.0 + t * t] {
            let x = SampledFn::from_fn(grid, f).unwrap();
            let r = caputo_rl_relation_residual(&k, &x).unwrap();
            relation_ok &= r <= 5.0 * grid.step();
            relation_worst = relation_worst.max(r / grid.step());
        }
    }
    outcome(
        worst_order >= 1.0 && exact_ok && sum_err <= 1e-13 && relation_ok,
        format!(
            "worst observed power-rule order {worst_order:.3}; distributed vs weighted sum {sum_err:.1e}; relation residual <= {relation_worst:.2e} h"
        ),
    )
}

fn integration_by_parts() -> Outcome {
    let k = ex1_kernel();
    let r: Vec<f64> = [500, 1000, 2000]
        .iter()
        .map(|&n| {
            let g = Grid::new(0.0, 1.0, n).unwrap();
            let x = SampledFn::from_fn(g, |t| t * t).unwrap();
            let y = SampledFn::from_fn(g, |t| t.powi(3)).unwrap();
            integration_by_parts_residual(&k, &x, &y).unwrap()
        })
        .collect();
    let pass = r.windows(2).all(|w| w[1] <= 0.5 * 1.2 * w[0]);
    outcome(pass, format!("residuals {:.3e}, {:.3e}, {:.3e}", r[0], r[1], r[2]))
}

fn classical_limits() -> Outcome {
    let g = Grid::new(0.0, 1.0, 2000).unwrap();
    let k1 = DistributionKernel::degenerate(1.0).unwrap();
    let p = scalar_problem("0", "x", "1", 1.0);
    let x = solve_forward(&p, &k1, &g, &SampledFn::zeros(g, 1)).unwrap();
    let e_err = (x.component(0)[2000] - std::f64::consts::E).abs();

    let lq = scalar_problem("-x^2 - u^2", "u", "1", 1.0);
    let out = fbsm_solve(&lq, &k1, &g, &SweepParams::defaults(1)).unwrap();
    let c = 1f64.cosh();
    let ex = out.bundle.x.sup_distance(&SampledFn::from_fn(g, |t| (1.0 - t).cosh() / c).unwrap());
    let eu = out.bundle.u.sup_distance(&SampledFn::from_fn(g, |t| -(1.0 - t).sinh() / c).unwrap());
    outcome(
        e_err <= 5e-3 && out.converged && ex.max(eu) <= 1e-2,
        format!("|x(1)-e| {e_err:.2e}; LQ sweep vs closed form: x {ex:.2e}, u {eu:.2e}"),
    )
}

fn perturbation_lemmas() -> Outcome {
    let p = scalar_problem(EX1_L, "u", EX1_PSI, 0.0);
    let k = ex1_kernel();
    let g = Grid::new(0.0, 1.0, 1000).unwrap();
    let u_star = SampledFn::from_fn(g, g_star).unwrap();
    let h = SampledFn::from_fn(g, |t| (std::f64::consts::PI * t).sin() + 0.5 * t).unwrap();
    let perturbed = |eps: f64| {
        SampledFn::new(g, vec![u_star.component(0).iter().zip(h.component(0)).map(|(a, b)| a + eps * b).collect()]).unwrap()
    };
    let x_star = solve_forward(&p, &k, &g, &u_star).unwrap();
    let ratios: Vec<f64> = [1e-1, 1e-2, 1e-3]
        .iter()
        .map(|&eps| solve_forward(&p, &k, &g, &perturbed(eps)).unwrap().sup_distance(&x_star) / eps)
        .collect();
    let spread = ratios.iter().copied().fold(0.0, f64::max) / ratios.iter().copied().fold(f64::INFINITY, f64::min);

    // gradient of J along h at a non-stationary base control
    let base_u = SampledFn::zeros(g, 1);
    let base_x = solve_forward(&p, &k, &g, &base_u).unwrap();
    let base = TrajectoryBundle::new(base_x.clone(), base_u.clone(), None).unwrap();
    let eta = solve_variational(&p, &k, &g, &base, &h).unwrap();
    let integrand: Vec<f64> = (0..g.len())
        .map(|i| {
            let (lx, lu) = p.lagrangian_gradient(g.node(i), &base_x.at(i), &base_u.at(i)).unwrap();
            lx[0] * eta.component(0)[i] + lu[0] * h.component(0)[i]
        })
        .collect();
    let dj = g.trapezoid(&integrand);
    let j_at = |eps: f64| {
        let u = SampledFn::new(g, vec![h.component(0).iter().map(|v| eps * v).collect()]).unwrap();
        let x = solve_forward(&p, &k, &g, &u).unwrap();
        evaluate_objective(&p, &TrajectoryBundle::new(x, u, None).unwrap()).unwrap()
    };
    let fd = (j_at(1e-4) - j_at(-1e-4)) / 2e-4;
    let rel = (dj - fd).abs() / fd.abs();
    outcome(
        spread <= 2.0 && rel <= 1e-4,
        format!(
            "ratios {:.4}, {:.4}, {:.4} (spread {spread:.3}); dJ/de {dj:.8} vs central difference {fd:.8} (rel {rel:.1e})",
            ratios[0], ratios[1], ratios[2]
        ),
    )
}

fn special_functions() -> Outcome {
    let mut worst: f64 = 0.0;
    for i in 0..=1990 {
        let x = 0.1 + 0.01 * i as f64;
        let lhs = gamma(x + 1.0).unwrap();
        worst = worst.max((lhs - x * gamma(x).unwrap()).abs() / lhs.abs());
    }
    let e1 = (mittag_leffler(1.0, 1.0, 1.0).unwrap() - std::f64::consts::E).abs();
    let e2 = (mittag_leffler(2.0, 1.0, 4.0).unwrap() - 2f64.cosh()).abs();

    let (alpha, a0, b0) = (0.6, 0.7, 1.3);
    let g = Grid::new(0.0, 1.0, 200).unwrap();
    let env = gronwall_envelope(&vec![a0; g.len()], &vec![b0; g.len()], alpha, &g).unwrap();
    let beta = b0 * gamma(alpha).unwrap();
    let excess = g
        .nodes()
        .iter()
        .zip(&env.values)
        .map(|(t, v)| v - a0 * mittag_leffler(alpha, 1.0, beta * t.powf(alpha)).unwrap())
        .fold(f64::NEG_INFINITY, f64::max);
    outcome(
        worst <= 1e-12 && e1 <= 1e-10 && e2 <= 1e-10 && excess <= 1e-10,
        format!("gamma recurrence {worst:.1e}; |E_1(1)-e| {e1:.1e}; |E_2(4)-cosh 2| {e2:.1e}; envelope minus closed form <= {excess:.1e}"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("example 1 reproduction", example1_reproduction),
        ("necessary-condition residual refinement", residual_refinement),
        ("sufficiency certification", certification),
        ("operator oracle suite", operator_oracles),
        ("integration-by-parts identity", integration_by_parts),
        ("degenerate-kernel classical limits", classical_limits),
        ("perturbation and gradient lemmas", perturbation_lemmas),
        ("special functions", special_functions),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        println!("{} criterion {}: {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
