use ndarray::Array2;

use super::grid::Grid2D;
use crate::error::{Error, Result};

/// Default tolerance on the quadrature mass of a probability density.
pub const DEFAULT_MASS_TOL: f64 = 1e-6;

/// Values below this contribute nothing to `p ln p` and are clamped in `ln q`.
pub const LOG_FLOOR: f64 = 1e-300;

/// Largest p-mass allowed on cells where the reference density hits the floor.
pub const SUPPORT_MASS_LIMIT: f64 = 1e-9;

/// Nonnegative samples of a density on a [`Grid2D`], indexed `[ix, iy]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Density2D {
    grid: Grid2D,
    values: Array2<f64>,
}

impl Density2D {
    pub fn new(grid: Grid2D, values: Array2<f64>) -> Result<Self> {
        if values.dim() != grid.shape() {
            return Err(Error::GridMismatch(format!(
                "values have shape {:?}, grid has {:?}",
                values.dim(),
                grid.shape()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "density value {v} is not a finite nonnegative number"
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let xs = grid.gx.coords();
        let ys = grid.gy.coords();
        let values = Array2::from_shape_fn(grid.shape(), |(i, j)| f(xs[i], ys[j]));
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    pub fn mass(&self) -> f64 {
        integrate_2d(self)
    }

    /// Quadrature of `f(x, y) * p(x, y)`.
    pub fn expectation(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        let wx = self.grid.gx.trapezoid_weights();
        let wy = self.grid.gy.trapezoid_weights();
        let xs = self.grid.gx.coords();
        let ys = self.grid.gy.coords();
        let mut total = 0.0;
        for (i, row) in self.values.outer_iter().enumerate() {
            let mut acc = 0.0;
            for (j, v) in row.iter().enumerate() {
                acc += wy[j] * v * f(xs[i], ys[j]);
            }
            total += wx[i] * acc;
        }
        total
    }

    /// Largest absolute pointwise difference; grids must match.
    pub fn sup_distance(&self, other: &Density2D) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(other.values.iter())
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs())))
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    pub(crate) fn check_same_grid(&self, other: &Density2D) -> Result<()> {
        if self.grid.same_nodes(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch(
                "densities live on different grids".into(),
            ))
        }
    }
}

/// Trapezoid-rule double integral of the density values.
pub fn integrate_2d(d: &Density2D) -> f64 {
    d.expectation(|_, _| 1.0)
}

fn weighted_sum(d: &Density2D, mut cell: impl FnMut(usize, usize, f64) -> f64) -> f64 {
    let wx = d.grid.gx.trapezoid_weights();
    let wy = d.grid.gy.trapezoid_weights();
    let mut total = 0.0;
    for (i, row) in d.values.outer_iter().enumerate() {
        let mut acc = 0.0;
        for (j, &v) in row.iter().enumerate() {
            acc += wy[j] * cell(i, j, v);
        }
        total += wx[i] * acc;
    }
    total
}

/// `-∫∫ p ln p` in nats, with `0 ln 0 = 0` below [`LOG_FLOOR`].
///
/// A density whose mass is off by more than [`DEFAULT_MASS_TOL`] is still
/// evaluated; the deviation is logged.
pub fn differential_entropy(d: &Density2D) -> f64 {
    let mass = d.mass();
    if (mass - 1.0).abs() > DEFAULT_MASS_TOL {
        log::warn!("differential entropy of a density with mass {mass:.9}");
    }
    -weighted_sum(d, |_, _, v| if v < LOG_FLOOR { 0.0 } else { v * v.ln() })
}

/// Diagnostics from a relative-entropy evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlDiagnostics {
    pub nats: f64,
    /// Cells where `q` was raised to [`LOG_FLOOR`].
    pub clamped_cells: usize,
    /// Quadrature p-mass carried by the clamped cells.
    pub clamped_mass: f64,
}

/// `-∫∫ p ln q` with the support floor applied to `q`.
pub fn cross_entropy_diagnostics(p: &Density2D, q: &Density2D) -> Result<KlDiagnostics> {
    p.check_same_grid(q)?;
    let mut clamped_cells = 0;
    let mut clamped_mass_raw = Vec::new();
    let qv = &q.values;
    let value = -weighted_sum(p, |i, j, pv| {
        let qq = qv[[i, j]];
        let lq = if qq < LOG_FLOOR {
            if pv >= LOG_FLOOR {
                clamped_cells += 1;
                clamped_mass_raw.push((i, j));
            }
            LOG_FLOOR.ln()
        } else {
            qq.ln()
        };
        if pv < LOG_FLOOR {
            0.0
        } else {
            pv * lq
        }
    });
    let clamped_mass = clamped_mass_raw
        .iter()
        .map(|&(i, j)| p.values[[i, j]])
        .sum::<f64>()
        * p.grid.cell_area();
    if clamped_mass > SUPPORT_MASS_LIMIT {
        return Err(Error::SupportViolation { mass: clamped_mass });
    }
    Ok(KlDiagnostics {
        nats: value,
        clamped_cells,
        clamped_mass,
    })
}

/// Relative entropy `∫∫ p ln(p / q)` in nats, with diagnostics.
pub fn kl_divergence_diagnostics(p: &Density2D, q: &Density2D) -> Result<KlDiagnostics> {
    if p == q {
        return Ok(KlDiagnostics {
            nats: 0.0,
            clamped_cells: 0,
            clamped_mass: 0.0,
        });
    }
    let cross = cross_entropy_diagnostics(p, q)?;
    // Evaluated cellwise as p ln(p/q) so identical cells cancel exactly.
    let qv = &q.values;
    let nats = weighted_sum(p, |i, j, pv| {
        if pv < LOG_FLOOR {
            0.0
        } else {
            pv * (pv / qv[[i, j]].max(LOG_FLOOR)).ln()
        }
    });
    Ok(KlDiagnostics { nats, ..cross })
}

/// Relative entropy `∫∫ p ln(p / q)` in nats.
pub fn kl_divergence(p: &Density2D, q: &Density2D) -> Result<f64> {
    kl_divergence_diagnostics(p, q).map(|d| d.nats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::grid::Grid1D;
    use std::f64::consts::{E, PI};

    fn gauss2(mx: f64, my: f64, vx: f64, vy: f64) -> impl Fn(f64, f64) -> f64 {
        move |x, y| {
            (-(x - mx).powi(2) / (2.0 * vx) - (y - my).powi(2) / (2.0 * vy)).exp()
                / (2.0 * PI * (vx * vy).sqrt())
        }
    }

    fn grid(sx: f64, sy: f64, n: usize) -> Grid2D {
        Grid2D::new(
            Grid1D::covering(0.0, sx, n).unwrap(),
            Grid1D::covering(0.0, sy, n).unwrap(),
        )
    }

    #[test]
    fn constant_density_integrates_exactly() {
        let g = Grid2D::new(
            Grid1D::new(0.3, 2.0, 33).unwrap(),
            Grid1D::new(-1.0, 0.5, 20).unwrap(),
        );
        let d = Density2D::from_fn(g, |_, _| 1.0 / g.area()).unwrap();
        assert!((integrate_2d(&d) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn standard_gaussian_mass_and_moment() {
        let d = Density2D::from_fn(grid(1.0, 1.0, 256), gauss2(0.0, 0.0, 1.0, 1.0)).unwrap();
        assert!((integrate_2d(&d) - 1.0).abs() < 1e-6);
        let g = grid(1.0, 0.5f64.sqrt(), 256);
        let d = Density2D::from_fn(g, gauss2(0.0, 0.0, 1.0, 0.5)).unwrap();
        assert!((d.expectation(|x, _| x * x) - 1.0).abs() < 1e-4);
    }

    #[test]
    fn gaussian_entropies_match_closed_form() {
        let d = Density2D::from_fn(grid(1.0, 1.0, 256), gauss2(0.0, 0.0, 1.0, 1.0)).unwrap();
        assert!((differential_entropy(&d) - (2.0 * PI * E).ln()).abs() < 1e-4);
        let d = Density2D::from_fn(grid(1.0, 0.5, 256), gauss2(0.0, 0.0, 1.0, 0.25)).unwrap();
        assert!((differential_entropy(&d) - (PI * E).ln()).abs() < 1e-4);
    }

    #[test]
    fn uniform_entropy_is_log_area() {
        let g = Grid2D::new(
            Grid1D::new(0.0, 1.5, 64).unwrap(),
            Grid1D::new(0.0, 0.25, 64).unwrap(),
        );
        let d = Density2D::from_fn(g, |_, _| 1.0 / g.area()).unwrap();
        assert!((differential_entropy(&d) - g.area().ln()).abs() < 1e-12);
    }

    #[test]
    fn kl_closed_forms() {
        let g = Grid2D::new(
            Grid1D::new(0.5, 9.0, 256).unwrap(),
            Grid1D::covering(0.0, 1.0, 256).unwrap(),
        );
        let p = Density2D::from_fn(g, gauss2(1.0, 0.0, 1.0, 1.0)).unwrap();
        let q = Density2D::from_fn(g, gauss2(0.0, 0.0, 1.0, 1.0)).unwrap();
        assert!((kl_divergence(&p, &q).unwrap() - 0.5).abs() < 1e-4);
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);

        let g = grid(2f64.sqrt(), 2f64.sqrt(), 256);
        let p = Density2D::from_fn(g, gauss2(0.0, 0.0, 2.0, 2.0)).unwrap();
        let q = Density2D::from_fn(g, gauss2(0.0, 0.0, 1.0, 1.0)).unwrap();
        assert!((kl_divergence(&p, &q).unwrap() - (1.0 - 2f64.ln())).abs() < 1e-4);
    }

    #[test]
    fn kl_rejects_support_violation() {
        let g = grid(1.0, 1.0, 64);
        let p = Density2D::from_fn(g, gauss2(0.0, 0.0, 1.0, 1.0)).unwrap();
        let q = Density2D::from_fn(g, |x, y| {
            if x > 0.0 {
                2.0 * gauss2(0.0, 0.0, 1.0, 1.0)(x, y)
            } else {
                0.0
            }
        })
        .unwrap();
        assert!(matches!(
            kl_divergence(&p, &q),
            Err(Error::SupportViolation { .. })
        ));
    }

    #[test]
    fn rejects_negative_or_misshapen_values() {
        let g = grid(1.0, 1.0, 16);
        assert!(Density2D::from_fn(g, |x, _| x).is_err());
        assert!(Density2D::new(g, Array2::zeros((16, 17))).is_err());
    }
}
