//! The noisy heterodyne POVM `m(x, y) = D(x, y) ρ_β D(x, y)* / 2π` and the
//! quantities built from it: generalized Husimi densities, the generalized
//! Wehrl entropy, expectations of the kernel operator `K(ρ)`, and the
//! multiplier operators `Λ₀` of the optimality conditions.

use std::f64::consts::{E, PI};

use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};

mod husimi;
mod kernel;

pub use husimi::{
    cross_entropy, husimi, husimi_eigen, husimi_gaussian_closed_form, outcome_grid,
    outcome_grid_for, wehrl_entropy, HusimiDensity, HUSIMI_MASS_TOL,
};
pub use kernel::{
    apply_k_gaussian, gaussian_kernel_constant, lambda0, Lambda0, DERIVATIVE_CHECK_TOL,
};

/// Default tail mass discarded from the thermal eigen-decomposition of `ρ_β`.
pub const DEFAULT_THERMAL_EPS: f64 = 1e-10;

/// Quadrature noise powers `(β_q, β_p)` of the measurement, with `β_q β_p ≥ 1/4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseCovariance {
    pub beta_q: f64,
    pub beta_p: f64,
}

impl NoiseCovariance {
    pub fn new(beta_q: f64, beta_p: f64) -> Result<Self> {
        ensure_positive("beta_q", beta_q)?;
        ensure_positive("beta_p", beta_p)?;
        // One ulp of slack so that (1/2, 1/2) and friends built by division are accepted.
        if beta_q * beta_p < 0.25 * (1.0 - 4.0 * f64::EPSILON) {
            return Err(Error::UncertaintyViolation { beta_q, beta_p });
        }
        Ok(Self { beta_q, beta_p })
    }

    /// Exchange the roles of position and momentum.
    pub fn swapped(&self) -> Self {
        Self {
            beta_q: self.beta_p,
            beta_p: self.beta_q,
        }
    }

    /// `√(β_q β_p)`.
    pub fn geometric_mean(&self) -> f64 {
        (self.beta_q * self.beta_p).sqrt()
    }

    /// Squeeze `½√(β_q/β_p)` of the letter states that minimise the output entropy.
    pub fn matched_delta(&self) -> f64 {
        0.5 * (self.beta_q / self.beta_p).sqrt()
    }
}

/// `ln 2πe(√(β_q β_p) + ½)`: the minimal output entropy over pure states.
pub fn min_wehrl_bound(noise: &NoiseCovariance) -> f64 {
    (2.0 * PI * E * (noise.geometric_mean() + 0.5)).ln()
}

/// `ρ_β` written as a squeezed thermal state: weights `n̄ⁿ/(n̄+1)ⁿ⁺¹` on the
/// squeezed Fock modes of ground variance `δ_β = ½√(β_q/β_p)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementModel {
    pub noise: NoiseCovariance,
    pub delta_beta: f64,
    pub nbar: f64,
    pub weights: Vec<f64>,
}

impl MeasurementModel {
    /// Highest retained Fock index.
    pub fn truncation(&self) -> usize {
        self.weights.len() - 1
    }

    /// Largest eigenvalue of `ρ_β`, which bounds every Husimi density by `w₀/2π`.
    pub fn top_weight(&self) -> f64 {
        self.weights[0]
    }

    /// Covariance `Σ w_n (2n+1) diag(δ_β, 1/(4δ_β))` implied by the truncated weights.
    pub fn implied_covariance(&self) -> (f64, f64) {
        let s: f64 = self
            .weights
            .iter()
            .enumerate()
            .map(|(n, w)| w * (2 * n + 1) as f64)
            .sum();
        (s * self.delta_beta, s / (4.0 * self.delta_beta))
    }

    /// Classical Gaussian noise that, added to the minimal-noise Husimi
    /// density at `δ_β`, produces the full `β` density.
    pub fn excess_noise(&self) -> (f64, f64) {
        let q = (self.noise.beta_q - self.delta_beta).max(0.0);
        let p = (self.noise.beta_p - 0.25 / self.delta_beta).max(0.0);
        (q, p)
    }
}

pub fn build_model(noise: NoiseCovariance, eps: f64) -> Result<MeasurementModel> {
    ensure_positive("eps", eps)?;
    if eps >= 1e-3 {
        return Err(Error::InvalidParameter(format!(
            "thermal truncation eps {eps} must be below 1e-3"
        )));
    }
    let noise = NoiseCovariance::new(noise.beta_q, noise.beta_p)?;
    let nbar = (noise.geometric_mean() - 0.5).max(0.0);
    let ratio = nbar / (nbar + 1.0);
    let mut weights = vec![1.0 / (nbar + 1.0)];
    // Tail beyond index N is ratio^{N+1}.
    let mut tail = ratio;
    while tail >= eps {
        let last = *weights.last().unwrap();
        weights.push(last * ratio);
        tail *= ratio;
    }
    Ok(MeasurementModel {
        noise,
        delta_beta: noise.matched_delta(),
        nbar,
        weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vacuum_kernel() {
        let m = build_model(NoiseCovariance::new(0.5, 0.5).unwrap(), DEFAULT_THERMAL_EPS).unwrap();
        assert_eq!(m.nbar, 0.0);
        assert_eq!(m.truncation(), 0);
        assert_eq!(m.delta_beta, 0.5);
    }

    #[test]
    fn asymmetric_noise_parameters() {
        let m = build_model(NoiseCovariance::new(0.5, 8.0).unwrap(), DEFAULT_THERMAL_EPS).unwrap();
        assert!((m.nbar - 1.5).abs() < 1e-15);
        assert!((m.delta_beta - 0.125).abs() < 1e-15);
        let (q, p) = m.implied_covariance();
        // Truncation leaves out Σ_{n>N} w_n (2n+1), about 1.5e-9 of the covariance here.
        let r = m.nbar / (m.nbar + 1.0);
        let n1 = m.weights.len() as f64;
        let missing = r.powf(n1) * (2.0 * n1 + 1.0 + 2.0 * m.nbar);
        let full = 2.0 * m.nbar + 1.0;
        assert!((m.delta_beta * (full - missing) - q).abs() < 1e-13);
        assert!(((full - missing) / (4.0 * m.delta_beta) - p).abs() < 1e-12);
        assert!(
            (q / 0.5 - 1.0).abs() < 1e-8 && (p / 8.0 - 1.0).abs() < 1e-8,
            "{q} {p}"
        );
        let tail: f64 = 1.0 - m.weights.iter().sum::<f64>();
        assert!(tail < DEFAULT_THERMAL_EPS);
        // minimal: dropping the last weight breaks the tail bound
        assert!(tail + m.weights.last().unwrap() >= DEFAULT_THERMAL_EPS);
    }

    #[test]
    fn geometric_weights() {
        let m = build_model(NoiseCovariance::new(2.0, 2.0).unwrap(), DEFAULT_THERMAL_EPS).unwrap();
        assert!((m.weights[0] - 0.4).abs() < 1e-15);
        assert!((m.weights[1] - 0.24).abs() < 1e-15);
    }

    #[test]
    fn rejects_invalid_noise() {
        assert!(matches!(
            NoiseCovariance::new(0.5, 0.4),
            Err(Error::UncertaintyViolation { .. })
        ));
        assert!(NoiseCovariance::new(-1.0, 2.0).is_err());
        assert!(build_model(
            NoiseCovariance {
                beta_q: 0.1,
                beta_p: 0.1
            },
            1e-10
        )
        .is_err());
        assert!(build_model(NoiseCovariance::new(1.0, 1.0).unwrap(), 1e-2).is_err());
    }

    #[test]
    fn bound_values() {
        let b = |q, p| min_wehrl_bound(&NoiseCovariance::new(q, p).unwrap());
        assert!((b(0.5, 0.5) - (2.0 * PI * E).ln()).abs() < 1e-14);
        assert!((b(0.5, 8.0) - (5.0 * PI * E).ln()).abs() < 1e-14);
        assert!((b(1.0, 1.0) - (3.0 * PI * E).ln()).abs() < 1e-14);
    }
}
