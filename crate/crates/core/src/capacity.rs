//! Energy-constrained capacity of the noisy heterodyne channel with Gaussian
//! encodings: threshold classification, closed forms for the three regimes,
//! and the optimal encodings that attain them.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::measurement::NoiseCovariance;

/// Relative slack applied when comparing an energy against a threshold.
const ENERGY_SLACK: f64 = 1e-12;

/// Final bracket width on the optimal letter squeeze.
pub const DELTA_TOL: f64 = 1e-10;

/// Bracket width at which golden section hands over to bisection on the
/// slope; below it rate differences drown in rounding.
const GOLDEN_TOL: f64 = 1e-4;

/// Covariance `diag(α_q, α_p)` of the average signal state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalCovariance {
    pub alpha_q: f64,
    pub alpha_p: f64,
}

impl SignalCovariance {
    pub fn new(alpha_q: f64, alpha_p: f64) -> Result<Self> {
        ensure_positive("alpha_q", alpha_q)?;
        ensure_positive("alpha_p", alpha_p)?;
        if alpha_q * alpha_p < 0.25 * (1.0 - 4.0 * f64::EPSILON) {
            return Err(Error::InvalidParameter(format!(
                "signal covariance ({alpha_q}, {alpha_p}) violates the uncertainty relation"
            )));
        }
        Ok(Self { alpha_q, alpha_p })
    }

    /// Mean oscillator energy `(α_q + α_p)/2`.
    pub fn energy(&self) -> f64 {
        0.5 * (self.alpha_q + self.alpha_p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CaseTag {
    /// Above threshold: letters squeezed to match the noise, displaced in both quadratures.
    C,
    /// Below threshold with `β_q ≤ β_p`: letters displaced in position only.
    L,
    /// Mirror of `L` with the quadratures exchanged.
    R,
}

impl std::fmt::Display for CaseTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            CaseTag::C => "C",
            CaseTag::L => "L",
            CaseTag::R => "R",
        };
        f.write_str(s)
    }
}

/// Letters `|x, y⟩_δ` with `(x, y)` drawn from a centred normal law of
/// covariance `diag(γ_q, γ_p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianEncoding {
    pub case: CaseTag,
    pub delta: f64,
    pub gamma_q: f64,
    pub gamma_p: f64,
    pub alpha: SignalCovariance,
}

impl GaussianEncoding {
    /// Covariance of the average state, `(γ_q + δ, γ_p + 1/(4δ))`.
    pub fn average_covariance(&self) -> (f64, f64) {
        (self.gamma_q + self.delta, self.gamma_p + 0.25 / self.delta)
    }

    pub fn energy(&self) -> f64 {
        let (aq, ap) = self.average_covariance();
        0.5 * (aq + ap)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityResult {
    pub case: CaseTag,
    /// Capacity in nats.
    pub value: f64,
    pub energy: f64,
    pub noise: NoiseCovariance,
    pub encoding: GaussianEncoding,
}

pub fn nats_to_bits(nats: f64) -> f64 {
    nats / std::f64::consts::LN_2
}

/// `½(b1 − b2 + √(b1/b2))`.
pub fn energy_threshold(b1: f64, b2: f64) -> Result<f64> {
    ensure_positive("b1", b1)?;
    ensure_positive("b2", b2)?;
    Ok(0.5 * (b1 - b2 + (b1 / b2).sqrt()))
}

/// Energy above which the squeeze-matched encoding of case C is optimal.
pub fn central_threshold(noise: &NoiseCovariance) -> f64 {
    let a = 0.5 * (noise.beta_p - noise.beta_q + (noise.beta_p / noise.beta_q).sqrt());
    let b = 0.5 * (noise.beta_q - noise.beta_p + (noise.beta_q / noise.beta_p).sqrt());
    a.max(b)
}

/// Regime of a signal covariance. Equalities fall to `L`/`R`.
pub fn classify(alpha: &SignalCovariance, noise: &NoiseCovariance) -> CaseTag {
    let ratio = (noise.beta_q / noise.beta_p).sqrt();
    if 1.0 / (2.0 * alpha.alpha_p) >= ratio {
        CaseTag::L
    } else if ratio >= 2.0 * alpha.alpha_q {
        CaseTag::R
    } else {
        CaseTag::C
    }
}

/// Rate `½ ln[(α_q+β_q)(α_p+β_p) / ((β_q+δ)(β_p+1/(4δ)))]` of any Gaussian encoding.
pub fn rate_of_encoding(encoding: &GaussianEncoding, noise: &NoiseCovariance) -> f64 {
    let (aq, ap) = encoding.average_covariance();
    let out = (aq + noise.beta_q) * (ap + noise.beta_p);
    let letter = (noise.beta_q + encoding.delta) * (noise.beta_p + 0.25 / encoding.delta);
    0.5 * (out / letter).ln()
}

/// Rate of the case-C encoding with average covariance `alpha`. Covariances
/// on the boundary of the case-C region are accepted (one displacement
/// variance is then zero).
pub fn rate_of_encoding_c(alpha: &SignalCovariance, noise: &NoiseCovariance) -> Result<f64> {
    let ratio = (noise.beta_q / noise.beta_p).sqrt();
    if 1.0 / (2.0 * alpha.alpha_p) > ratio || ratio > 2.0 * alpha.alpha_q {
        let case = classify(alpha, noise);
        return Err(Error::Precondition(format!(
            "covariance {alpha:?} lies in case {case}, not C"
        )));
    }
    let denom = noise.geometric_mean() + 0.5;
    Ok(0.5
        * ((alpha.alpha_q + noise.beta_q) * (alpha.alpha_p + noise.beta_p) / (denom * denom)).ln())
}

fn check_energy(energy: f64) -> Result<()> {
    ensure_finite("E", energy)?;
    if energy < 0.5 * (1.0 - ENERGY_SLACK) {
        return Err(Error::InvalidParameter(format!(
            "energy {energy} is below the vacuum energy 1/2"
        )));
    }
    Ok(())
}

fn exceeds(energy: f64, threshold: f64) -> bool {
    energy > threshold + ENERGY_SLACK * threshold.abs().max(1.0)
}

pub fn capacity_case_c(noise: &NoiseCovariance, energy: f64) -> Result<CapacityResult> {
    check_energy(energy)?;
    let threshold = central_threshold(noise);
    if exceeds(threshold, energy) {
        return Err(Error::Precondition(format!(
            "energy {energy} is below the case-C threshold {threshold}"
        )));
    }
    let delta = noise.matched_delta();
    let alpha_q = energy + 0.5 * (noise.beta_p - noise.beta_q);
    let alpha_p = energy + 0.5 * (noise.beta_q - noise.beta_p);
    let alpha = SignalCovariance::new(alpha_q, alpha_p)?;
    let encoding = GaussianEncoding {
        case: CaseTag::C,
        delta,
        gamma_q: (alpha_q - delta).max(0.0),
        gamma_p: (alpha_p - 0.25 / delta).max(0.0),
        alpha,
    };
    let value =
        ((energy + 0.5 * (noise.beta_q + noise.beta_p)) / (noise.geometric_mean() + 0.5)).ln();
    Ok(CapacityResult {
        case: CaseTag::C,
        value,
        energy,
        noise: *noise,
        encoding,
    })
}

/// One-letter rate of the position-only encoding with letter squeeze `delta` at energy `E`.
pub fn rate_case_l(noise: &NoiseCovariance, energy: f64, delta: f64) -> f64 {
    0.5 * ((2.0 * energy - 0.25 / delta + noise.beta_q) / (delta + noise.beta_q)).ln()
}

/// Feasible squeezes for position-only encodings at energy `E`: those with `γ_q ≥ 0`.
fn delta_bracket(energy: f64) -> (f64, f64) {
    let root = (energy * energy - 0.25).max(0.0).sqrt();
    (energy - root, energy + root)
}

/// Sign-carrying numerator of `d rate / dδ`: `β_q + 2δ − 4(2E + β_q)δ²`.
fn rate_slope_l(noise: &NoiseCovariance, energy: f64, delta: f64) -> f64 {
    noise.beta_q + 2.0 * delta - 4.0 * (2.0 * energy + noise.beta_q) * delta * delta
}

/// Maximises the case-L one-letter rate over the letter squeeze by golden
/// section, then narrows the bracket by bisection on the slope. Returns the
/// squeeze, the implied average covariance, and the displacement variance.
pub fn optimal_delta_l(
    noise: &NoiseCovariance,
    energy: f64,
) -> Result<(f64, SignalCovariance, f64)> {
    check_energy(energy)?;
    if noise.beta_q > noise.beta_p {
        return Err(Error::Precondition(
            "position-only encoding needs beta_q <= beta_p".into(),
        ));
    }
    let threshold = central_threshold(noise);
    if exceeds(energy, threshold) {
        return Err(Error::Precondition(format!(
            "energy {energy} is above the case-L limit {threshold}"
        )));
    }
    let energy = energy.max(0.5);
    let (mut lo, mut hi) = delta_bracket(energy);
    let f = |d: f64| rate_case_l(noise, energy, d);
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut a = hi - inv_phi * (hi - lo);
    let mut b = lo + inv_phi * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    while hi - lo > GOLDEN_TOL {
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = lo + inv_phi * (hi - lo);
            fb = f(b);
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - inv_phi * (hi - lo);
            fa = f(a);
        }
    }
    while hi - lo > DELTA_TOL {
        let mid = 0.5 * (lo + hi);
        if rate_slope_l(noise, energy, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let delta = 0.5 * (lo + hi);
    let (blo, bhi) = delta_bracket(energy);
    if !(delta.is_finite() && delta >= blo && delta <= bhi) {
        return Err(Error::Bracket(format!(
            "squeeze optimum {delta} escaped [{blo}, {bhi}]"
        )));
    }
    let alpha_p = 0.25 / delta;
    let alpha_q = (2.0 * energy - alpha_p).max(delta);
    let alpha = SignalCovariance::new(alpha_q, alpha_p)?;
    Ok((delta, alpha, (alpha_q - delta).max(0.0)))
}

/// `ln[(√(1 + 8Eβ_q + 4β_q²) − 1)/(2β_q)]`.
pub fn capacity_case_l_closed_form(noise: &NoiseCovariance, energy: f64) -> f64 {
    let bq = noise.beta_q;
    (((1.0 + 8.0 * energy * bq + 4.0 * bq * bq).sqrt() - 1.0) / (2.0 * bq)).ln()
}

/// Capacity below threshold for `β_q ≤ β_p`, attained by position-only displacements.
pub fn capacity_case_l(noise: &NoiseCovariance, energy: f64) -> Result<CapacityResult> {
    let (delta, alpha, gamma) = optimal_delta_l(noise, energy)?;
    let encoding = GaussianEncoding {
        case: CaseTag::L,
        delta,
        gamma_q: gamma,
        gamma_p: 0.0,
        alpha,
    };
    let value = capacity_case_l_closed_form(noise, energy).max(0.0);
    let achieved = rate_of_encoding(&encoding, noise);
    if (achieved - value).abs() > 1e-8 {
        log::warn!("case-L optimizer reached {achieved}, closed form gives {value}");
    }
    Ok(CapacityResult {
        case: CaseTag::L,
        value,
        energy,
        noise: *noise,
        encoding,
    })
}

/// Mirror of case L obtained by exchanging the quadratures.
pub fn capacity_case_r(noise: &NoiseCovariance, energy: f64) -> Result<CapacityResult> {
    let mirrored = capacity_case_l(&noise.swapped(), energy)?;
    let e = mirrored.encoding;
    let encoding = GaussianEncoding {
        case: CaseTag::R,
        delta: 0.25 / e.delta,
        gamma_q: 0.0,
        gamma_p: e.gamma_q,
        alpha: SignalCovariance {
            alpha_q: e.alpha.alpha_p,
            alpha_p: e.alpha.alpha_q,
        },
    };
    Ok(CapacityResult {
        case: CaseTag::R,
        value: mirrored.value,
        energy,
        noise: *noise,
        encoding,
    })
}

/// Gaussian capacity at energy `E`, dispatched to the regime the noise and energy select.
pub fn capacity(noise: &NoiseCovariance, energy: f64) -> Result<CapacityResult> {
    check_energy(energy)?;
    if energy >= central_threshold(noise) {
        capacity_case_c(noise, energy)
    } else if noise.beta_q <= noise.beta_p {
        capacity_case_l(noise, energy)
    } else {
        capacity_case_r(noise, energy)
    }
}
