use libm::erfc;
use ndarray::Array2;
use rayon::prelude::*;

use super::Constellation;
use crate::error::{Error, Result};
use crate::measurement::NoiseCovariance;
use crate::numerics::{Grid1D, Grid2D, COVERAGE_SIGMAS};

/// Largest admissible probability mass of a letter falling outside the outcome cells.
pub const ROW_MASS_TOL: f64 = 1e-6;

/// Letter-to-cell transition probabilities. Cell `(i, j)` of the grid is the
/// rectangle of half-step radius around node `(x_i, y_j)`, flattened row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    pub probs: Array2<f64>,
    pub grid: Grid2D,
}

impl ChannelMatrix {
    pub fn letters(&self) -> usize {
        self.probs.nrows()
    }

    pub fn cells(&self) -> usize {
        self.probs.ncols()
    }
}

/// `P(a ≤ X ≤ b)` for `X ~ N(mean, var)`, using the complementary error
/// function on whichever side keeps the difference well conditioned.
fn interval_mass(a: f64, b: f64, mean: f64, var: f64) -> f64 {
    let s = (2.0 * var).sqrt();
    let (za, zb) = ((a - mean) / s, (b - mean) / s);
    if za >= 0.0 {
        0.5 * (erfc(za) - erfc(zb))
    } else if zb <= 0.0 {
        0.5 * (erfc(-zb) - erfc(-za))
    } else {
        1.0 - 0.5 * (erfc(-za) + erfc(zb))
    }
}

fn cell_masses(axis: &Grid1D, mean: f64, var: f64) -> Vec<f64> {
    let h = axis.step();
    axis.coords()
        .iter()
        .map(|&c| interval_mass(c - 0.5 * h, c + 0.5 * h, mean, var).max(0.0))
        .collect()
}

/// Exact Gaussian cell masses of every letter's outcome law. Rows are
/// renormalised after the coverage check so each is a probability vector.
pub fn build_channel(
    constellation: &Constellation,
    noise: &NoiseCovariance,
    grid: &Grid2D,
) -> Result<ChannelMatrix> {
    let (nx, ny) = grid.shape();
    let rows: Vec<Result<Vec<f64>>> = constellation
        .letters
        .par_iter()
        .map(|letter| {
            let (vx, vy) = letter.outcome_variances(noise);
            let mx = cell_masses(&grid.gx, letter.x, vx);
            let my = cell_masses(&grid.gy, letter.y, vy);
            let mass = mx.iter().sum::<f64>() * my.iter().sum::<f64>();
            if mass < 1.0 - ROW_MASS_TOL {
                return Err(Error::Coverage { mass });
            }
            let inv = 1.0 / mass;
            Ok(mx
                .iter()
                .flat_map(|a| my.iter().map(move |b| a * b * inv))
                .collect())
        })
        .collect();
    let mut probs = Array2::zeros((constellation.len(), nx * ny));
    for (mut dst, row) in probs.rows_mut().into_iter().zip(rows) {
        dst.assign(&ndarray::ArrayView1::from(&row?));
    }
    Ok(ChannelMatrix { probs, grid: *grid })
}

fn axis_cover(lo: f64, hi: f64, points: usize) -> Result<Grid1D> {
    Grid1D::new(0.5 * (lo + hi), 0.5 * (hi - lo), points)
}

/// Outcome grid reaching 8 standard deviations past every letter, with
/// `points` nodes per axis.
pub fn constellation_grid(
    constellation: &Constellation,
    noise: &NoiseCovariance,
    points: usize,
) -> Result<Grid2D> {
    let mut ext = [
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    ];
    for letter in &constellation.letters {
        let (vx, vy) = letter.outcome_variances(noise);
        let (sx, sy) = (COVERAGE_SIGMAS * vx.sqrt(), COVERAGE_SIGMAS * vy.sqrt());
        ext[0] = ext[0].min(letter.x - sx);
        ext[1] = ext[1].max(letter.x + sx);
        ext[2] = ext[2].min(letter.y - sy);
        ext[3] = ext[3].max(letter.y + sy);
    }
    Ok(Grid2D::new(
        axis_cover(ext[0], ext[1], points)?,
        axis_cover(ext[2], ext[3], points)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::Letter;

    #[test]
    fn interval_mass_matches_standard_values() {
        assert!((interval_mass(-1.0, 1.0, 0.0, 1.0) - 0.6826894921370859).abs() < 1e-14);
        assert!((interval_mass(8.0, 9.0, 0.0, 1.0) / 6.219831985865787e-16 - 1.0).abs() < 1e-12);
        assert!((interval_mass(-9.0, -8.0, 0.0, 1.0) / 6.219831985865787e-16 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn vacuum_letter_row_is_standard_gaussian() {
        let noise = NoiseCovariance::new(0.5, 0.5).unwrap();
        let c = Constellation::uniform(vec![Letter {
            x: 0.0,
            y: 0.0,
            delta: 0.5,
        }])
        .unwrap();
        let grid = constellation_grid(&c, &noise, 33).unwrap();
        let w = build_channel(&c, &noise, &grid).unwrap();
        let mid = 16 * 33 + 16;
        let h = grid.gx.step();
        let m = interval_mass(-0.5 * h, 0.5 * h, 0.0, 1.0);
        assert!((w.probs[[0, mid]] - m * m).abs() < 1e-15);
        assert!((w.probs.row(0).sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mirrored_letters_give_mirrored_rows() {
        let noise = NoiseCovariance::new(0.5, 2.0).unwrap();
        let letters = vec![
            Letter {
                x: 1.0,
                y: -0.5,
                delta: 0.3,
            },
            Letter {
                x: -1.0,
                y: 0.5,
                delta: 0.3,
            },
        ];
        let c = Constellation::uniform(letters).unwrap();
        let grid = constellation_grid(&c, &noise, 40).unwrap();
        let w = build_channel(&c, &noise, &grid).unwrap();
        let n = w.cells();
        for j in 0..n {
            assert!((w.probs[[0, j]] - w.probs[[1, n - 1 - j]]).abs() < 1e-15);
        }
    }

    #[test]
    fn narrow_grid_is_rejected() {
        let noise = NoiseCovariance::new(0.5, 0.5).unwrap();
        let c = Constellation::uniform(vec![Letter {
            x: 0.0,
            y: 0.0,
            delta: 0.5,
        }])
        .unwrap();
        let grid = Grid2D::new(
            Grid1D::new(0.0, 3.0, 32).unwrap(),
            Grid1D::new(0.0, 3.0, 32).unwrap(),
        );
        assert!(matches!(
            build_channel(&c, &noise, &grid),
            Err(Error::Coverage { .. })
        ));
    }
}
