//! Numerical certification of the entropy inequalities, the relative-entropy
//! identity behind them, and the optimality conditions of the Gaussian encodings.
//!
//! Every check returns a [`CheckReport`]; inequalities pass when
//! `slack ≥ −tolerance`, identities when `|slack| ≤ tolerance`.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{ensure_positive, Error, Result};
use crate::measurement::{
    build_model, HusimiDensity, MeasurementModel, NoiseCovariance, DEFAULT_THERMAL_EPS,
};
use crate::numerics::{differential_entropy, Density2D, Grid1D};
use crate::states::{
    displace, fock_grid, momentum_second_moment_spectral, random_state, PureEnsemble,
    SecondMoments, WaveFunction,
};

mod battery;
mod identities;
mod inequalities;

pub use battery::{run_battery, summarize, FamilySummary, BATTERY_VERSION};
pub use identities::{
    check_gaussian_moments, check_kl_data_processing, check_kl_monotonicity, check_vacuum_relative_entropy,
    check_smoothing_identity, smoothing_reference_beta_p,
};
pub use inequalities::{
    check_operator_inequality, check_support_equation, check_log_sobolev, check_entropy_inequality, check_entropy_inequality_batch,
    min_wehrl_scan, GIBBS_TOL, MIN_WEHRL_ATTAIN_TOL, MIN_WEHRL_FLOOR_TOL,
};

/// Environment variable naming the default profile (`fast` or `strict`).
pub const PROFILE_ENV: &str = "HETCAP_PROFILE";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckKind {
    Identity,
    Inequality,
}

/// Outcome of one numerical check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub kind: CheckKind,
    pub params: Value,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs − lhs` for inequalities, the signed residual for identities.
    pub slack: f64,
    pub pass: bool,
    pub tolerance: f64,
}

impl CheckReport {
    pub fn inequality(name: &str, params: Value, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let slack = rhs - lhs;
        Self {
            name: name.into(),
            kind: CheckKind::Inequality,
            params,
            lhs,
            rhs,
            slack,
            pass: slack >= -tolerance,
            tolerance,
        }
    }

    pub fn identity(name: &str, params: Value, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let slack = lhs - rhs;
        Self {
            name: name.into(),
            kind: CheckKind::Identity,
            params,
            lhs,
            rhs,
            slack,
            pass: slack.abs() <= tolerance,
            tolerance,
        }
    }

    /// Identity checked relative to `rhs`: the slack is `lhs / rhs − 1`.
    pub fn relative_identity(name: &str, params: Value, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let slack = lhs / rhs - 1.0;
        Self {
            name: name.into(),
            kind: CheckKind::Identity,
            params,
            lhs,
            rhs,
            slack,
            pass: slack.abs() <= tolerance,
            tolerance,
        }
    }

    /// Distance from failing: positive when passing.
    pub fn margin(&self) -> f64 {
        match self.kind {
            CheckKind::Inequality => self.slack + self.tolerance,
            CheckKind::Identity => self.tolerance - self.slack.abs(),
        }
    }
}

/// Grid resolution and pass tolerance of a verification run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Fast,
    Strict,
}

impl Profile {
    /// Wavefunction grid points.
    pub fn wave_points(self) -> usize {
        match self {
            Profile::Fast => 1024,
            Profile::Strict => 2048,
        }
    }

    /// Minimum outcome grid points per axis.
    pub fn outcome_points(self) -> usize {
        match self {
            Profile::Fast => 128,
            Profile::Strict => 512,
        }
    }

    pub fn tolerance(self) -> f64 {
        match self {
            Profile::Fast => 1e-5,
            Profile::Strict => 1e-7,
        }
    }

    /// Profile named by [`PROFILE_ENV`], falling back to `Fast`.
    pub fn from_env() -> Result<Self> {
        match std::env::var(PROFILE_ENV) {
            Ok(v) => v.parse(),
            Err(_) => Ok(Profile::Fast),
        }
    }
}

impl std::str::FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fast" => Ok(Profile::Fast),
            "strict" => Ok(Profile::Strict),
            other => Err(Error::InvalidParameter(format!("unknown profile {other:?}"))),
        }
    }
}

impl std::fmt::Display for Profile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Profile::Fast => "fast",
            Profile::Strict => "strict",
        })
    }
}

/// Random superposition of squeezed Fock modes `0..dim` displaced to
/// `(x, y)`, on a grid wide enough to hold it before and after the shift.
pub fn seeded_state(
    seed: u64,
    dim: usize,
    delta: f64,
    x: f64,
    y: f64,
    points: usize,
) -> Result<WaveFunction> {
    let base = fock_grid(0.0, dim.max(1) - 1, delta, points)?;
    let grid = Grid1D::new(0.5 * x, base.half_width() + 0.5 * x.abs(), points)?;
    displace(&random_state(seed, dim, delta, grid)?, x, y)
}

pub(crate) fn model_for(noise: &NoiseCovariance) -> Result<MeasurementModel> {
    build_model(*noise, DEFAULT_THERMAL_EPS)
}

/// Raw second moments with `⟨p²⟩` taken from the Fourier spectrum.
pub(crate) fn spectral_moments(rho: &PureEnsemble) -> SecondMoments {
    let base = rho.second_moments();
    let p2 = rho
        .members()
        .iter()
        .map(|(w, psi)| w * momentum_second_moment_spectral(psi))
        .sum();
    SecondMoments { q2: base.q2, p2 }
}

/// `h(p_ρ ‖ p_{|0⟩_δ}) = −h(p_ρ) − ∫p_ρ ln p_{|0⟩_δ}` by quadrature, with the
/// letter's log-density in closed form so its far tails never underflow.
pub(crate) fn kl_to_vacuum(h: &HusimiDensity, delta: f64) -> Result<f64> {
    ensure_positive("delta", delta)?;
    let (a, b) = vacuum_variances(&h.noise, delta);
    let log_norm = (2.0 * std::f64::consts::PI * (a * b).sqrt()).ln();
    let cross = h
        .density
        .expectation(|x, y| log_norm + x * x / (2.0 * a) + y * y / (2.0 * b));
    Ok(cross - differential_entropy(&h.density))
}

/// Relative level below which a spectrally smoothed density is roundoff.
pub const DENSITY_NOISE_FLOOR: f64 = 1e-13;

/// `max(p, floor · max p)`. Used on the second argument of cross entropies
/// and relative entropies: raising it can only lower them, so inequalities
/// of the form `bound ≤ −∫p ln q` stay conservative.
pub fn noise_floored(d: &Density2D) -> Result<Density2D> {
    let floor = DENSITY_NOISE_FLOOR * d.max_value();
    Density2D::new(*d.grid(), d.values().mapv(|v| v.max(floor)))
}

/// Outcome variances `(β_q + δ, β_p + 1/(4δ))` of the squeezed vacuum `|0⟩_δ`.
pub(crate) fn vacuum_variances(noise: &NoiseCovariance, delta: f64) -> (f64, f64) {
    (noise.beta_q + delta, noise.beta_p + 0.25 / delta)
}

pub(crate) fn noise_params(noise: &NoiseCovariance) -> Value {
    serde_json::json!({ "beta_q": noise.beta_q, "beta_p": noise.beta_p })
}

/// Merges `extra` into the noise parameter record.
pub(crate) fn params(noise: &NoiseCovariance, extra: Value) -> Value {
    let mut base = noise_params(noise);
    if let (Value::Object(dst), Value::Object(src)) = (&mut base, extra) {
        dst.extend(src);
    }
    base
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn report_pass_rules() {
        let r = CheckReport::inequality("x", json!({}), 1.0, 1.0 - 5e-6, 1e-5);
        assert!(r.pass && r.margin() > 0.0);
        let r = CheckReport::inequality("x", json!({}), 1.0, 1.0 - 2e-5, 1e-5);
        assert!(!r.pass);
        let r = CheckReport::identity("x", json!({}), 1.0, 1.0 + 2e-5, 1e-5);
        assert!(!r.pass && r.slack < 0.0);
    }

    #[test]
    fn profiles_parse() {
        assert_eq!("Strict".parse::<Profile>().unwrap(), Profile::Strict);
        assert!("medium".parse::<Profile>().is_err());
        assert_eq!(Profile::Fast.to_string(), "fast");
    }

    #[test]
    fn kl_to_vacuum_matches_density_quadrature() {
        use crate::measurement::{husimi, husimi_gaussian_closed_form, outcome_grid};
        use crate::numerics::kl_divergence;
        let noise = NoiseCovariance::new(0.5, 8.0).unwrap();
        let model = model_for(&noise).unwrap();
        let rho = PureEnsemble::from(seeded_state(2, 3, 0.2, 0.4, -0.3, 1024).unwrap());
        let grid = outcome_grid(&model, &rho, 128).unwrap();
        let h = husimi(&model, &rho, &grid).unwrap();
        let reference = husimi_gaussian_closed_form(&noise, 0.25, 0.0, 0.0, &grid).unwrap();
        let direct = kl_divergence(&h.density, &reference.density).unwrap();
        assert!((kl_to_vacuum(&h, 0.25).unwrap() - direct).abs() < 1e-10);
    }

    #[test]
    fn params_merge() {
        let n = NoiseCovariance::new(0.5, 8.0).unwrap();
        let p = params(&n, json!({ "delta": 0.25 }));
        assert_eq!(p["beta_p"], 8.0);
        assert_eq!(p["delta"], 0.25);
    }
}
