use serde::Serialize;

use crate::error::{invalid, Result};
use crate::scalar::{lit, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    /// Torus of length `extent`.
    Periodic,
    /// Truncated line `[-extent, extent)`, treated as numerically periodic.
    Line,
}

/// Uniform 1D grid with the transform-space data needed for spectral
/// differentiation.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    kind: GridKind,
    extent: T,
    n: usize,
    spacing: T,
    nodes: Vec<T>,
    wavenumbers: Vec<T>,
    odd_wavenumbers: Vec<T>,
}

pub fn make_grid<T: Real>(kind: GridKind, extent: T, n_points: usize) -> Result<Grid<T>> {
    Grid::new(kind, extent, n_points)
}

impl<T: Real> Grid<T> {
    pub fn new(kind: GridKind, extent: T, n: usize) -> Result<Self> {
        if !(extent > T::zero()) || !extent.is_finite() {
            return invalid("grid extent must be positive");
        }
        if n < 8 {
            return invalid(format!("n_points must be at least 8, got {n}"));
        }
        if !n.is_multiple_of(2) {
            return invalid(format!("n_points must be even (odd-n), got {n}"));
        }
        let length = match kind {
            GridKind::Periodic => extent,
            GridKind::Line => extent + extent,
        };
        let nf: T = lit(n as f64);
        let spacing = length / nf;
        let start = match kind {
            GridKind::Periodic => T::zero(),
            GridKind::Line => -extent,
        };
        let nodes = (0..n).map(|j| start + spacing * lit(j as f64)).collect();
        let dk = T::TAU() / length;
        let half = n / 2;
        let wavenumbers: Vec<T> = (0..n)
            .map(|j| {
                if j <= half {
                    dk * lit(j as f64)
                } else {
                    dk * lit(j as f64 - n as f64)
                }
            })
            .collect();
        let mut odd_wavenumbers = wavenumbers.clone();
        odd_wavenumbers[half] = T::zero();
        Ok(Self {
            kind,
            extent,
            n,
            spacing,
            nodes,
            wavenumbers,
            odd_wavenumbers,
        })
    }

    pub fn periodic(length: T, n: usize) -> Result<Self> {
        Self::new(GridKind::Periodic, length, n)
    }

    pub fn line(half_width: T, n: usize) -> Result<Self> {
        Self::new(GridKind::Line, half_width, n)
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    /// L for a torus, R for a line.
    pub fn extent(&self) -> T {
        self.extent
    }

    /// Total period of the transform box: L or 2R.
    pub fn length(&self) -> T {
        match self.kind {
            GridKind::Periodic => self.extent,
            GridKind::Line => self.extent + self.extent,
        }
    }

    pub fn n_points(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> T {
        self.spacing
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    /// Wavenumbers in transform order; the Nyquist entry is +N/2 * 2pi/length.
    pub fn wavenumbers(&self) -> &[T] {
        &self.wavenumbers
    }

    /// Wavenumbers for odd-order derivatives, Nyquist set to zero.
    pub fn odd_wavenumbers(&self) -> &[T] {
        &self.odd_wavenumbers
    }

    /// Same kind and extent with twice as many points.
    pub fn refined(&self) -> Result<Self> {
        Self::new(self.kind, self.extent, 2 * self.n)
    }

    pub fn same_as(&self, other: &Self) -> bool {
        self.kind == other.kind && self.n == other.n && self.extent == other.extent
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn periodic_wavenumbers() {
        let g = Grid::<f64>::periodic(2.0 * PI, 8).unwrap();
        assert!((g.spacing() - PI / 4.0).abs() < 1e-15);
        let k: Vec<i64> = g.wavenumbers().iter().map(|x| x.round() as i64).collect();
        assert_eq!(k, vec![0, 1, 2, 3, 4, -3, -2, -1]);
        assert_eq!(g.odd_wavenumbers()[4], 0.0);
        assert_eq!(g.nodes()[0], 0.0);
    }

    #[test]
    fn line_spacing_and_nodes() {
        let g = Grid::<f64>::line(20.0, 512).unwrap();
        assert_eq!(g.spacing(), 0.078125);
        assert_eq!(g.nodes()[0], -20.0);
        assert_eq!(g.nodes()[256], 0.0);
        assert!((g.spacing() * 512.0 - 40.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(Grid::<f64>::periodic(2.0 * PI, 7).is_err());
        assert!(Grid::<f64>::periodic(2.0 * PI, 4).is_err());
        assert!(Grid::<f64>::line(-1.0, 64).is_err());
        assert!(Grid::<f64>::line(0.0, 64).is_err());
    }

    #[test]
    fn single_precision_grid() {
        let g = Grid::<f32>::line(20.0, 512).unwrap();
        assert_eq!(g.spacing(), 0.078125f32);
    }
}
