use std::f64::consts::{E, PI};

use ndarray::Array2;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::Constellation;
use crate::error::{Error, Result};
use crate::measurement::NoiseCovariance;
use crate::numerics::{differential_entropy, Density2D, Grid1D, Grid2D, DEFAULT_MASS_TOL};

/// Smallest sample count accepted by the Monte Carlo estimator.
pub const MIN_MC_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub samples: usize,
}

fn gaussian_profile(axis: &Grid1D, mean: f64, var: f64) -> Vec<f64> {
    let norm = 1.0 / (2.0 * PI * var).sqrt();
    axis.coords()
        .iter()
        .map(|c| norm * (-(c - mean).powi(2) / (2.0 * var)).exp())
        .collect()
}

/// Prior-averaged outcome density, assembled as `Gxᵀ diag(p) Gy` from the
/// separable letter densities.
fn mixture_density(
    constellation: &Constellation,
    noise: &NoiseCovariance,
    grid: &Grid2D,
) -> Result<Density2D> {
    let (nx, ny) = grid.shape();
    let n = constellation.len();
    let mut gx = Array2::zeros((n, nx));
    let mut gy = Array2::zeros((n, ny));
    for (k, (letter, p)) in constellation
        .letters
        .iter()
        .zip(&constellation.prior)
        .enumerate()
    {
        let (vx, vy) = letter.outcome_variances(noise);
        for (dst, v) in gx
            .row_mut(k)
            .iter_mut()
            .zip(gaussian_profile(&grid.gx, letter.x, vx))
        {
            *dst = p * v;
        }
        for (dst, v) in gy
            .row_mut(k)
            .iter_mut()
            .zip(gaussian_profile(&grid.gy, letter.y, vy))
        {
            *dst = v;
        }
    }
    Density2D::new(*grid, gx.t().dot(&gy))
}

/// `h(p̄) − Σ_k p_k h(p_k)`: output entropy of the mixture by quadrature minus
/// the letter entropies `ln 2πe√((β_q+δ)(β_p+1/(4δ)))` in closed form.
pub fn quadrature_rate(
    constellation: &Constellation,
    noise: &NoiseCovariance,
    grid: &Grid2D,
) -> Result<f64> {
    let mixture = mixture_density(constellation, noise, grid)?;
    let mass = mixture.mass();
    if (mass - 1.0).abs() > DEFAULT_MASS_TOL {
        return Err(Error::Coverage { mass });
    }
    let output = differential_entropy(&mixture);
    let letters: f64 = constellation
        .letters
        .iter()
        .zip(&constellation.prior)
        .map(|(l, p)| {
            let (vx, vy) = l.outcome_variances(noise);
            p * (2.0 * PI * E * (vx * vy).sqrt()).ln()
        })
        .sum();
    Ok((output - letters).max(0.0))
}

/// Log-density of each letter's outcome law at `(x, y)`, written into `out`.
fn letter_log_densities(
    constellation: &Constellation,
    noise: &NoiseCovariance,
    x: f64,
    y: f64,
    out: &mut [f64],
) {
    for (slot, l) in out.iter_mut().zip(&constellation.letters) {
        let (vx, vy) = l.outcome_variances(noise);
        *slot = -(x - l.x).powi(2) / (2.0 * vx)
            - (y - l.y).powi(2) / (2.0 * vy)
            - (2.0 * PI * (vx * vy).sqrt()).ln();
    }
}

/// Monte Carlo estimate of `E[ln p_k(z) − ln p̄(z)]` with `k` drawn from the
/// prior and `z` from letter `k`'s exact Gaussian outcome law.
pub fn mc_rate(
    constellation: &Constellation,
    noise: &NoiseCovariance,
    n_samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    if n_samples < MIN_MC_SAMPLES {
        return Err(Error::InvalidParameter(format!(
            "need at least {MIN_MC_SAMPLES} samples, got {n_samples}"
        )));
    }
    if constellation.len() == 1 {
        return Ok(McEstimate {
            estimate: 0.0,
            std_error: 0.0,
            samples: n_samples,
        });
    }
    let pick = WeightedIndex::new(&constellation.prior)
        .map_err(|e| Error::InvalidParameter(format!("prior cannot be sampled: {e}")))?;
    let log_prior: Vec<f64> = constellation
        .prior
        .iter()
        .map(|p| if *p > 0.0 { p.ln() } else { f64::NEG_INFINITY })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut logs = vec![0.0; constellation.len()];
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..n_samples {
        let k = pick.sample(&mut rng);
        let letter = constellation.letters[k];
        let (vx, vy) = letter.outcome_variances(noise);
        let zx: f64 = StandardNormal.sample(&mut rng);
        let zy: f64 = StandardNormal.sample(&mut rng);
        let (x, y) = (letter.x + vx.sqrt() * zx, letter.y + vy.sqrt() * zy);
        letter_log_densities(constellation, noise, x, y, &mut logs);
        let top = logs
            .iter()
            .zip(&log_prior)
            .map(|(l, p)| l + p)
            .fold(f64::NEG_INFINITY, f64::max);
        let mix = top
            + logs
                .iter()
                .zip(&log_prior)
                .map(|(l, p)| (l + p - top).exp())
                .sum::<f64>()
                .ln();
        let v = logs[k] - mix;
        sum += v;
        sum_sq += v * v;
    }
    let n = n_samples as f64;
    let mean = sum / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok(McEstimate {
        estimate: mean,
        std_error: (var / n).sqrt(),
        samples: n_samples,
    })
}
