use ndarray::Array2;

use super::density::{Density2D, DEFAULT_MASS_TOL};
use crate::error::{ensure_positive, Result};

/// Kernel truncation in units of the kernel standard deviation.
const KERNEL_SIGMAS: f64 = 8.0;

/// Discrete Gaussian kernel of variance `t` on spacing `step`, truncated at
/// `±8√t` and normalised to unit sum. Degenerates to the identity when
/// `√t` is far below the spacing.
fn kernel(t: f64, step: f64) -> Vec<f64> {
    let half = (KERNEL_SIGMAS * t.sqrt() / step).floor() as usize;
    let mut k: Vec<f64> = (0..=2 * half)
        .map(|i| {
            let d = (i as f64 - half as f64) * step;
            (-d * d / (2.0 * t)).exp()
        })
        .collect();
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= total);
    k
}

/// The Markov operator `T_t`: convolution along `y` with a centred Gaussian of variance `t`.
///
/// Mass that would be pushed past the grid edge is dropped and reported in
/// the log when it exceeds the default mass tolerance.
pub fn smooth_y(p: &Density2D, t: f64) -> Result<Density2D> {
    ensure_positive("t", t)?;
    let grid = *p.grid();
    let k = kernel(t, grid.gy.step());
    let half = (k.len() / 2) as isize;
    let (nx, ny) = grid.shape();
    let src = p.values();
    let mut out = Array2::zeros((nx, ny));
    for i in 0..nx {
        for j in 0..ny {
            let mut acc = 0.0;
            let lo = (j as isize - half).max(0);
            let hi = (j as isize + half).min(ny as isize - 1);
            for m in lo..=hi {
                acc += k[(j as isize - m + half) as usize] * src[[i, m as usize]];
            }
            out[[i, j]] = acc;
        }
    }
    let smoothed = Density2D::new(grid, out)?;
    let loss = p.mass() - smoothed.mass();
    if loss.abs() > DEFAULT_MASS_TOL {
        log::warn!("smooth_y(t = {t}) leaked {loss:.3e} of mass off the grid");
    }
    Ok(smoothed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{kl_divergence, Grid1D, Grid2D};
    use std::f64::consts::PI;

    fn gaussian_density(grid: Grid2D, mx: f64, my: f64, vx: f64, vy: f64) -> Density2D {
        Density2D::from_fn(grid, |x, y| {
            (-(x - mx).powi(2) / (2.0 * vx) - (y - my).powi(2) / (2.0 * vy)).exp()
                / (2.0 * PI * (vx * vy).sqrt())
        })
        .unwrap()
    }

    #[test]
    fn narrow_gaussian_acquires_kernel_variance() {
        let grid = Grid2D::new(
            Grid1D::covering(0.0, 1.0, 64).unwrap(),
            Grid1D::covering(0.0, 1.0, 2048).unwrap(),
        );
        let p = gaussian_density(grid, 0.0, 0.0, 1.0, 1e-4);
        let s = smooth_y(&p, 1.0).unwrap();
        let var = s.expectation(|_, y| y * y) / s.mass();
        assert!((var - 1.0001).abs() < 1e-3, "{var}");
    }

    #[test]
    fn vanishing_time_is_identity() {
        let grid = Grid2D::new(
            Grid1D::covering(0.0, 1.0, 64).unwrap(),
            Grid1D::covering(0.0, 1.0, 64).unwrap(),
        );
        let p = gaussian_density(grid, 0.2, -0.1, 1.0, 0.7);
        let s = smooth_y(&p, 1e-8).unwrap();
        assert!(s.sup_distance(&p).unwrap() < 1e-6);
    }

    #[test]
    fn semigroup_and_monotonicity() {
        let grid = Grid2D::new(
            Grid1D::covering(0.0, 1.0, 48).unwrap(),
            Grid1D::covering(0.0, 2.0, 256).unwrap(),
        );
        let p = gaussian_density(grid, 0.3, 0.2, 1.0, 0.6);
        let q = gaussian_density(grid, -0.2, -0.4, 1.3, 0.9);
        let two_step = smooth_y(&smooth_y(&p, 0.3).unwrap(), 0.5).unwrap();
        let one_step = smooth_y(&p, 0.8).unwrap();
        assert!(two_step.sup_distance(&one_step).unwrap() < 1e-6);

        let before = kl_divergence(&p, &q).unwrap();
        let after =
            kl_divergence(&smooth_y(&p, 0.5).unwrap(), &smooth_y(&q, 0.5).unwrap()).unwrap();
        assert!(after <= before + 1e-8);
    }
}
