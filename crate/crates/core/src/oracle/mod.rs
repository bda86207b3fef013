//! Achievability cross-checks that never touch the closed-form capacity
//! expressions: discretized channels solved by Blahut–Arimoto, quadrature
//! mutual information of finite constellations, and a Monte Carlo estimator.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc_inv;

use crate::capacity::GaussianEncoding;
use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::measurement::NoiseCovariance;

mod ba;
mod channel;
mod curve;
mod rate;

pub use ba::{blahut_arimoto, BAResult, LAMBDA_MAX, LAMBDA_STEPS};
pub use channel::{build_channel, constellation_grid, ChannelMatrix, ROW_MASS_TOL};
pub use curve::{
    lattice_ba, rate_curve, write_rate_curve, RateCurveRow, BA_MAX_ITER, BA_OUTCOME_POINTS, BA_REACH_SIGMAS,
    BA_TOL,
};
pub use rate::{mc_rate, quadrature_rate, McEstimate};

/// A letter state `|x, y⟩_δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Letter {
    pub x: f64,
    pub y: f64,
    pub delta: f64,
}

impl Letter {
    /// `Tr[ρ H]` with `H = (q² + p²)/2`.
    pub fn energy(&self) -> f64 {
        0.5 * (self.delta + 0.25 / self.delta + self.x * self.x + self.y * self.y)
    }

    /// Variances `(β_q + δ, β_p + 1/(4δ))` of the letter's Gaussian outcome law.
    pub fn outcome_variances(&self, noise: &NoiseCovariance) -> (f64, f64) {
        (noise.beta_q + self.delta, noise.beta_p + 0.25 / self.delta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constellation {
    pub letters: Vec<Letter>,
    pub prior: Vec<f64>,
    pub energies: Vec<f64>,
}

impl Constellation {
    pub fn new(letters: Vec<Letter>, prior: Vec<f64>) -> Result<Self> {
        if letters.is_empty() || letters.len() != prior.len() {
            return Err(Error::InvalidParameter(format!(
                "{} letters with {} prior weights",
                letters.len(),
                prior.len()
            )));
        }
        for l in &letters {
            ensure_positive("letter delta", l.delta)?;
            ensure_finite("letter x", l.x)?;
            ensure_finite("letter y", l.y)?;
        }
        if prior.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidParameter(
                "prior weights must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = prior.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("prior sums to {total}")));
        }
        let energies = letters.iter().map(Letter::energy).collect();
        Ok(Self {
            letters,
            prior,
            energies,
        })
    }

    pub fn uniform(letters: Vec<Letter>) -> Result<Self> {
        let n = letters.len().max(1);
        Self::new(letters, vec![1.0 / n as f64; n])
    }

    /// Product lattice of equiprobable normal quantiles approximating the
    /// displacement law of `encoding`, `nq × np` letters with a uniform prior.
    /// Each axis is rescaled so its discrete variance equals `γ` exactly.
    pub fn gaussian_lattice(encoding: &GaussianEncoding, nq: usize, np: usize) -> Result<Self> {
        if nq == 0 || np == 0 {
            return Err(Error::InvalidParameter(
                "lattice needs at least one point per axis".into(),
            ));
        }
        let xs = quantile_axis(encoding.gamma_q, nq);
        let ys = quantile_axis(encoding.gamma_p, np);
        let letters = xs
            .iter()
            .flat_map(|&x| {
                ys.iter().map(move |&y| Letter {
                    x,
                    y,
                    delta: encoding.delta,
                })
            })
            .collect();
        Self::uniform(letters)
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn mean_energy(&self) -> f64 {
        self.prior
            .iter()
            .zip(&self.energies)
            .map(|(p, e)| p * e)
            .sum()
    }

    pub fn with_prior(&self, prior: Vec<f64>) -> Result<Self> {
        Self::new(self.letters.clone(), prior)
    }
}

/// Standard normal quantile.
fn probit(u: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * u)
}

fn quantile_axis(variance: f64, n: usize) -> Vec<f64> {
    if n == 1 || variance <= 0.0 {
        return vec![0.0];
    }
    let z: Vec<f64> = (0..n)
        .map(|k| probit((k as f64 + 0.5) / n as f64))
        .collect();
    let second = z.iter().map(|v| v * v).sum::<f64>() / n as f64;
    let scale = (variance / second).sqrt();
    z.into_iter().map(|v| v * scale).collect()
}
