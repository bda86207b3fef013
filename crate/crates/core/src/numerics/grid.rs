use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_positive, Error, Result};

/// Smallest number of nodes accepted on any axis.
pub const MIN_GRID_POINTS: usize = 16;

/// Number of standard deviations an auto-sized grid extends on each side of the mean.
pub const COVERAGE_SIGMAS: f64 = 8.0;

/// Default number of nodes per axis for outcome-space quadrature.
pub const DEFAULT_DENSITY_POINTS: usize = 256;

/// Uniform grid `center ± half_width` with `points` nodes, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    center: f64,
    half_width: f64,
    points: usize,
}

impl Grid1D {
    pub fn new(center: f64, half_width: f64, points: usize) -> Result<Self> {
        ensure_finite("center", center)?;
        ensure_positive("half_width", half_width)?;
        if points < MIN_GRID_POINTS {
            return Err(Error::InvalidParameter(format!(
                "grid needs at least {MIN_GRID_POINTS} points, got {points}"
            )));
        }
        Ok(Self {
            center,
            half_width,
            points,
        })
    }

    /// Grid spanning `mean ± 8 sigma`.
    pub fn covering(mean: f64, sigma: f64, points: usize) -> Result<Self> {
        ensure_positive("sigma", sigma)?;
        Self::new(mean, COVERAGE_SIGMAS * sigma, points)
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn len(&self) -> usize {
        self.points
    }

    pub fn is_empty(&self) -> bool {
        self.points == 0
    }

    pub fn step(&self) -> f64 {
        2.0 * self.half_width / (self.points - 1) as f64
    }

    pub fn lo(&self) -> f64 {
        self.center - self.half_width
    }

    pub fn hi(&self) -> f64 {
        self.center + self.half_width
    }

    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        self.lo() + i as f64 * self.step()
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.coord(i)).collect()
    }

    /// Composite trapezoid weights.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let h = self.step();
        let mut w = vec![h; self.points];
        w[0] = 0.5 * h;
        w[self.points - 1] = 0.5 * h;
        w
    }

    /// Same spacing and size, recentred by `offset`.
    pub fn shifted(&self, offset: f64) -> Self {
        Self {
            center: self.center + offset,
            ..*self
        }
    }

    /// True when the two grids have identical nodes.
    pub fn same_nodes(&self, other: &Self) -> bool {
        self.points == other.points
            && (self.center - other.center).abs() <= 1e-12 * (1.0 + self.center.abs())
            && (self.half_width - other.half_width).abs() <= 1e-12 * self.half_width
    }
}

/// Outcome plane: `gx` carries the position-like outcome `x`, `gy` the momentum-like `y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub gx: Grid1D,
    pub gy: Grid1D,
}

impl Grid2D {
    pub fn new(gx: Grid1D, gy: Grid1D) -> Self {
        Self { gx, gy }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.gx.len(), self.gy.len())
    }

    pub fn cell_area(&self) -> f64 {
        self.gx.step() * self.gy.step()
    }

    pub fn area(&self) -> f64 {
        4.0 * self.gx.half_width() * self.gy.half_width()
    }

    pub fn shifted(&self, dx: f64, dy: f64) -> Self {
        Self {
            gx: self.gx.shifted(dx),
            gy: self.gy.shifted(dy),
        }
    }

    pub fn same_nodes(&self, other: &Self) -> bool {
        self.gx.same_nodes(&other.gx) && self.gy.same_nodes(&other.gy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_and_symmetry() {
        let g = Grid1D::new(1.0, 4.0, 17).unwrap();
        assert_eq!(g.step(), 0.5);
        assert_eq!(g.coord(0), -3.0);
        assert_eq!(g.coord(16), 5.0);
        assert_eq!(g.coord(8), 1.0);
    }

    #[test]
    fn rejects_small_or_degenerate_grids() {
        assert!(Grid1D::new(0.0, 1.0, 15).is_err());
        assert!(Grid1D::new(0.0, 0.0, 64).is_err());
        assert!(Grid1D::new(f64::NAN, 1.0, 64).is_err());
    }

    #[test]
    fn trapezoid_weights_sum_to_length() {
        let g = Grid1D::new(0.0, 3.0, 64).unwrap();
        let total: f64 = g.trapezoid_weights().iter().sum();
        assert!((total - 6.0).abs() < 1e-12);
    }
}
