//! Uniform time grids and multi-component sample paths.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("t_max must be positive and finite, got {0}")]
    BadHorizon(f64),
    #[error("n_steps must be at least 1")]
    NoSteps,
    #[error("value buffer holds {got} entries, grid with dim {dim} needs {want}")]
    LengthMismatch { got: usize, want: usize, dim: usize },
    #[error("non-finite value at grid point {point}, component {component}")]
    NonFinite { point: usize, component: usize },
}

/// Uniform grid 0, dt, 2·dt, ..., t_max with dt = t_max/n_steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t_max: f64,
    n_steps: usize,
    dt: f64,
}

impl TimeGrid {
    pub fn new(t_max: f64, n_steps: usize) -> Result<Self, GridError> {
        if !(t_max.is_finite() && t_max > 0.0) {
            return Err(GridError::BadHorizon(t_max));
        }
        if n_steps == 0 {
            return Err(GridError::NoSteps);
        }
        Ok(Self { t_max, n_steps, dt: t_max / n_steps as f64 })
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of grid points, n_steps + 1.
    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn time(&self, index: usize) -> f64 {
        index as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|i| self.time(i))
    }
}

/// A path of d-vectors over a grid, stored flat in point-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    grid: TimeGrid,
    dim: usize,
    values: Vec<f64>,
}

impl SamplePath {
    /// Wrap a flat buffer of (n_steps+1)·dim finite values.
    pub fn from_values(grid: TimeGrid, dim: usize, values: Vec<f64>) -> Result<Self, GridError> {
        let want = grid.len() * dim;
        if dim == 0 || values.len() != want {
            return Err(GridError::LengthMismatch { got: values.len(), want, dim });
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFinite { point: bad / dim, component: bad % dim });
        }
        Ok(Self { grid, dim, values })
    }

    pub fn zeros(grid: TimeGrid, dim: usize) -> Self {
        Self { grid, dim, values: vec![0.0; grid.len() * dim] }
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The d-vector at grid point `index`.
    pub fn point(&self, index: usize) -> &[f64] {
        &self.values[index * self.dim..(index + 1) * self.dim]
    }

    pub fn point_mut(&mut self, index: usize) -> &mut [f64] {
        &mut self.values[index * self.dim..(index + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn last(&self) -> &[f64] {
        self.point(self.grid.n_steps)
    }

    /// CSV with header `t,comp_0,...,comp_{d-1}` at full double precision.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        write!(out, "t")?;
        for c in 0..self.dim {
            write!(out, ",comp_{c}")?;
        }
        writeln!(out)?;
        for i in 0..self.grid.len() {
            write!(out, "{:.16e}", self.grid.time(i))?;
            for v in self.point(i) {
                write!(out, ",{v:.16e}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_points_are_uniform() {
        let g = TimeGrid::new(2.0, 4).unwrap();
        let ts: Vec<f64> = g.times().collect();
        assert_eq!(ts, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(g.dt(), 0.5);
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(TimeGrid::new(0.0, 4).is_err());
        assert!(TimeGrid::new(-1.0, 4).is_err());
        assert!(TimeGrid::new(f64::NAN, 4).is_err());
        assert!(TimeGrid::new(1.0, 0).is_err());
    }

    #[test]
    fn path_layout_is_point_major() {
        let g = TimeGrid::new(1.0, 1).unwrap();
        let p = SamplePath::from_values(g, 2, vec![0.0, 0.0, 3.0, 4.0]).unwrap();
        assert_eq!(p.point(0), &[0.0, 0.0]);
        assert_eq!(p.point(1), &[3.0, 4.0]);
        assert_eq!(p.last(), &[3.0, 4.0]);
    }

    #[test]
    fn path_rejects_non_finite_and_missized_buffers() {
        let g = TimeGrid::new(1.0, 1).unwrap();
        assert!(matches!(
            SamplePath::from_values(g, 1, vec![0.0, f64::NAN]),
            Err(GridError::NonFinite { point: 1, component: 0 })
        ));
        assert!(SamplePath::from_values(g, 1, vec![0.0]).is_err());
        assert!(SamplePath::from_values(g, 0, vec![]).is_err());
    }

    #[test]
    fn csv_has_header_and_full_precision() {
        let g = TimeGrid::new(1.0, 2).unwrap();
        let p = SamplePath::from_values(g, 1, vec![0.0, 0.1 + 0.2, 1.0]).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,comp_0");
        // 17 significant digits round-trip f64 exactly.
        assert!(lines.next().unwrap().starts_with("0.0000000000000000e0,"));
        assert!(text.contains("3.0000000000000004e-1"));
    }
}
