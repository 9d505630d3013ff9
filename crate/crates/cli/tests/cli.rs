use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn docsolve(args: &[&dyn AsRef<std::ffi::OsStr>]) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_docsolve"));
    for a in args {
        c.arg(a);
    }
    c.output().unwrap()
}

fn bundled() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/paper-example1.json")
}

fn write_fn(path: &Path, n: usize, f: impl Fn(f64) -> f64) {
    let mut s = String::from("t,v\n");
    for i in 0..=n {
        let t = i as f64 / n as f64;
        s += &format!("{t},{}\n", f(t));
    }
    std::fs::write(path, s).unwrap();
}

fn column(path: &Path, c: usize) -> Vec<f64> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap()[c].parse().unwrap()).collect()
}

#[test]
fn operator_applies_caputo_to_a_power() {
    let dir = tempfile::tempdir().unwrap();
    let (inp, out) = (dir.path().join("in.csv"), dir.path().join("out.csv"));
    write_fn(&inp, 400, |t| t * t);
    let o = docsolve(&[&"operator", &"--kind", &"caputo-left", &"--alpha", &"0.5", &"--input", &inp, &"--output", &out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = column(&out, 1);
    let exact = 2.0 / gamma_2_5();
    assert!((v[400] - exact).abs() < 1e-2, "{} vs {exact}", v[400]);
}

// Γ(2.5) = 3√π/4
fn gamma_2_5() -> f64 {
    0.75 * std::f64::consts::PI.sqrt()
}

#[test]
fn operator_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let (inp, out) = (dir.path().join("in.csv"), dir.path().join("out.csv"));
    std::fs::write(&inp, "t,v,w\n0,1,2\n1,1,2\n").unwrap();
    let o = docsolve(&[&"operator", &"--kind", &"caputo-left", &"--alpha", &"0.5", &"--input", &inp, &"--output", &out]);
    assert_eq!(o.status.code(), Some(1));
    write_fn(&inp, 10, |t| t);
    let o = docsolve(&[&"operator", &"--kind", &"dist-caputo-left", &"--alpha", &"0.5", &"--input", &inp, &"--output", &out]);
    assert_eq!(o.status.code(), Some(1));
    let o = docsolve(&[&"operator", &"--kind", &"sideways", &"--alpha", &"0.5", &"--input", &inp, &"--output", &out]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn gronwall_with_constant_data_matches_mittag_leffler() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, out) = (dir.path().join("a.csv"), dir.path().join("b.csv"), dir.path().join("env.csv"));
    write_fn(&a, 50, |_| 2.0);
    write_fn(&b, 50, |_| 1.0);
    let o = docsolve(&[&"gronwall", &"--alpha", &"1", &"--a", &a, &"--b", &b, &"--output", &out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let env = column(&out, 1);
    // alpha = 1: a·E_1(b t) = 2 e^t
    assert!((env[50] - 2.0 * std::f64::consts::E).abs() < 1e-10);
}

#[test]
fn residual_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let traj = dir.path().join("ref.csv");
    assert!(docsolve(&[&"reference", &bundled(), &"--output", &traj]).status.success());
    let o = docsolve(&[&"residual", &bundled(), &traj]);
    assert_eq!(o.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(report["optimality"].as_f64().unwrap() < 1e-6);

    // scramble the control column: residuals blow up
    let text = std::fs::read_to_string(&traj).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    for (i, l) in lines.iter_mut().enumerate().skip(1) {
        let mut f: Vec<String> = l.split(',').map(str::to_string).collect();
        f[2] = format!("{}", ((i * 7919) % 101) as f64 / 10.0 - 5.0);
        *l = f.join(",");
    }
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, lines.join("\n") + "\n").unwrap();
    assert_eq!(docsolve(&[&"residual", &bundled(), &bad]).status.code(), Some(2));

    // wrong column count is an input error
    let short = dir.path().join("short.csv");
    std::fs::write(&short, "t,x1,u1\n0,0,0\n1,1,1\n").unwrap();
    assert_eq!(docsolve(&[&"residual", &bundled(), &short]).status.code(), Some(1));
}

#[test]
fn trivial_problem_solves_to_zero_control() {
    let dir = tempfile::tempdir().unwrap();
    let problem = dir.path().join("p.json");
    std::fs::write(
        &problem,
        r#"{
  "interval": {"a": 0, "b": 1},
  "dims": {"n": 1, "m": 1},
  "expressions": {"L": "-u^2", "f": ["u"], "psi": "1"},
  "boundary": {"mode": "initial", "values": [0]},
  "grid": {"N": 50},
  "kernel": {"M": 8},
  "sweep": {"theta": 0.5, "tol": 1e-10, "max_iter": 50, "u0": "sin(t)"}
}"#,
    )
    .unwrap();
    let prefix = dir.path().join("run");
    let o = docsolve(&[&"solve", &problem, &"--out", &prefix]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let traj = dir.path().join("run-trajectory.csv");
    assert!(column(&traj, 2).iter().all(|u| u.abs() < 1e-8));
    assert!(column(&traj, 1).iter().all(|x| x.abs() < 1e-8));
    let log = std::fs::read_to_string(dir.path().join("run-log.jsonl")).unwrap();
    assert!(log.lines().count() >= 2);
    assert_eq!(docsolve(&[&"solve", &dir.path().join("missing.json"), &"--out", &prefix]).status.code(), Some(1));
}
