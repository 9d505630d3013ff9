use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform mesh `t_i = a + i·h`, `i = 0..=N`, `h = (b − a)/N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    a: f64,
    b: f64,
    n: usize,
}

impl Grid {
    pub fn new(a: f64, b: f64, n: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && b > a) {
            return Err(Error::invalid(format!("grid needs finite a < b, got [{a}, {b}]")));
        }
        if n < 2 {
            return Err(Error::invalid(format!("grid needs N >= 2 intervals, got {n}")));
        }
        Ok(Grid { a, b, n })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// Number of intervals N.
    pub fn intervals(&self) -> usize {
        self.n
    }

    /// Number of nodes N + 1.
    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        (self.b - self.a) / self.n as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i == self.n {
            self.b
        } else {
            self.a + i as f64 * self.step()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n).map(|i| self.node(i)).collect()
    }

    /// Composite trapezoid weights.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let h = self.step();
        let mut w = vec![h; self.len()];
        w[0] = 0.5 * h;
        w[self.n] = 0.5 * h;
        w
    }

    /// Composite trapezoid rule over the grid.
    pub fn trapezoid(&self, values: &[f64]) -> f64 {
        assert_eq!(values.len(), self.len());
        let h = self.step();
        let inner: f64 = values[1..self.n].iter().sum();
        h * (inner + 0.5 * (values[0] + values[self.n]))
    }

    /// Recovers a grid from sampled times, requiring uniform spacing to a
    /// relative tolerance `rel_tol` of the step.
    pub fn from_times(times: &[f64], rel_tol: f64) -> Result<Self> {
        if times.len() < 3 {
            return Err(Error::invalid("need at least 3 time samples"));
        }
        let grid = Grid::new(times[0], times[times.len() - 1], times.len() - 1)?;
        let h = grid.step();
        for (i, &t) in times.iter().enumerate() {
            if (t - grid.node(i)).abs() > rel_tol * h {
                return Err(Error::invalid(format!(
                    "time samples are not uniform: t[{i}] = {t}, expected {}",
                    grid.node(i)
                )));
            }
        }
        Ok(grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_are_reproducible() {
        let g = Grid::new(0.0, 1.0, 10).unwrap();
        assert_eq!(g.node(0), 0.0);
        assert_eq!(g.node(10), 1.0);
        assert_eq!(g.nodes(), Grid::new(0.0, 1.0, 10).unwrap().nodes());
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(Grid::new(1.0, 1.0, 10).is_err());
        assert!(Grid::new(0.0, 1.0, 1).is_err());
        assert!(Grid::new(0.0, f64::NAN, 4).is_err());
    }

    #[test]
    fn trapezoid_is_exact_for_linear() {
        let g = Grid::new(0.0, 1.0, 1000).unwrap();
        let v: Vec<f64> = g.nodes();
        assert!((g.trapezoid(&v) - 0.5).abs() < 1e-12);
        assert!((g.trapezoid(&vec![1.0; g.len()]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn from_times_detects_non_uniform() {
        assert!(Grid::from_times(&[0.0, 0.5, 1.0], 1e-9).is_ok());
        assert!(Grid::from_times(&[0.0, 0.4, 1.0], 1e-9).is_err());
    }
}
