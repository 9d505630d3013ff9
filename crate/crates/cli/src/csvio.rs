//! CSV formats: trajectories `t, x1.., u1.., lambda1..` and sampled
//! functions `t, v`. Numbers are written with 17 significant digits.

use std::path::Path;

use docsolve::{Grid, SampledFn, TrajectoryBundle};

use crate::CliError;

/// Relative tolerance (of the step) for recognizing a uniform grid.
const UNIFORM_TOL: f64 = 1e-6;

pub fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_rows(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<f64>>) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))?;
    let io = |e: csv::Error| CliError::Internal(format!("cannot write {}: {e}", path.display()));
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r.into_iter().map(fmt)).map_err(io)?;
    }
    w.flush()
        .map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))
}

fn read_rows(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), CliError> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let row = rec
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Input(format!("{} row {}: {e}", path.display(), line + 2)))?;
        if row.iter().any(|v| !v.is_finite()) {
            return Err(CliError::Input(format!("{} row {}: non-finite value", path.display(), line + 2)));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

fn grid_of(path: &Path, times: &[f64]) -> Result<Grid, CliError> {
    Grid::from_times(times, UNIFORM_TOL).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn trajectory_header(n: usize, m: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((1..=n).map(|j| format!("x{j}")));
    h.extend((1..=m).map(|j| format!("u{j}")));
    h.extend((1..=n).map(|j| format!("lambda{j}")));
    h
}

pub fn write_trajectory(path: &Path, bundle: &TrajectoryBundle) -> Result<(), CliError> {
    let lambda = bundle
        .lambda
        .as_ref()
        .ok_or_else(|| CliError::Internal("trajectory has no adjoint".into()))?;
    let header = trajectory_header(bundle.x.dim(), bundle.u.dim());
    let rows = (0..bundle.grid.len()).map(|i| {
        let mut r = vec![bundle.grid.node(i)];
        r.extend(bundle.x.at(i));
        r.extend(bundle.u.at(i));
        r.extend(lambda.at(i));
        r
    });
    write_rows(path, &header, rows)
}

/// Reads a trajectory and checks its header against `(n, m)`.
pub fn read_trajectory(path: &Path, n: usize, m: usize) -> Result<TrajectoryBundle, CliError> {
    let (header, rows) = read_rows(path)?;
    let expected = trajectory_header(n, m);
    if header != expected {
        return Err(CliError::Input(format!(
            "{}: expected columns {}, found {}",
            path.display(),
            expected.join(","),
            header.join(",")
        )));
    }
    let times: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let grid = grid_of(path, &times)?;
    let column = |c: usize| rows.iter().map(|r| r[c]).collect::<Vec<f64>>();
    let input = |e: docsolve::Error| CliError::Input(e.to_string());
    let x = SampledFn::new(grid, (1..=n).map(column).collect()).map_err(input)?;
    let u = SampledFn::new(grid, (n + 1..=n + m).map(column).collect()).map_err(input)?;
    let lambda = SampledFn::new(grid, (n + m + 1..=2 * n + m).map(column).collect()).map_err(input)?;
    TrajectoryBundle::new(x, u, Some(lambda)).map_err(input)
}

/// Reads a two-column `t, v` file.
pub fn read_function(path: &Path) -> Result<(Grid, Vec<f64>), CliError> {
    let (header, rows) = read_rows(path)?;
    if header.len() != 2 {
        return Err(CliError::Input(format!(
            "{}: expected 2 columns (t, v), found {}",
            path.display(),
            header.len()
        )));
    }
    let times: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let grid = grid_of(path, &times)?;
    Ok((grid, rows.iter().map(|r| r[1]).collect()))
}

pub fn write_function(path: &Path, column: &str, grid: &Grid, values: &[f64]) -> Result<(), CliError> {
    let header = ["t".to_string(), column.to_string()];
    write_rows(path, &header, (0..grid.len()).map(|i| vec![grid.node(i), values[i]]))
}
