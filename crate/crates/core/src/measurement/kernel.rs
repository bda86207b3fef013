use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{min_wehrl_bound, NoiseCovariance};
use crate::capacity::CaseTag;
use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::numerics::spectral;
use crate::states::{momentum_second_moment_spectral, WaveFunction};

/// Largest tolerated relative gap between the finite-difference and spectral `ψ''`.
pub const DERIVATIVE_CHECK_TOL: f64 = 1e-4;

/// Output variances `(β_q + δ, β_p + 1/(4δ))` of a letter with squeeze `δ`.
fn letter_variances(noise: &NoiseCovariance, delta: f64) -> (f64, f64) {
    (noise.beta_q + delta, noise.beta_p + 0.25 / delta)
}

/// `ln 2π√((β_q+δ)(β_p+1/(4δ)))`, the constant term of the kernel of a Gaussian letter.
pub fn gaussian_kernel_constant(noise: &NoiseCovariance, delta: f64) -> f64 {
    let (vq, vp) = letter_variances(noise, delta);
    (2.0 * PI * (vq * vp).sqrt()).ln()
}

fn checked_second_derivative(psi: &WaveFunction) -> Result<Vec<Complex64>> {
    let fd = psi.second_derivative();
    let sp = spectral::second_derivative(psi.amps(), psi.grid().step());
    let scale = sp.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let gap = fd
        .iter()
        .zip(&sp)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    let mismatch = if scale > 0.0 { gap / scale } else { gap };
    if mismatch > DERIVATIVE_CHECK_TOL {
        return Err(Error::Resolution { mismatch });
    }
    Ok(fd)
}

/// Applies `K(ρ₀)` for the Gaussian letter `ρ₀ = |x0, y0⟩_δ⟨x0, y0|`:
///
/// `c + ((q−x0)² + β_q)/(2(β_q+δ)) + ((p−y0)² + β_p)/(2(β_p+1/(4δ)))`.
///
/// The momentum part uses `(p−y0)²ψ = −ψ'' + 2i y0 ψ' + y0² ψ`.
pub fn apply_k_gaussian(
    noise: &NoiseCovariance,
    delta: f64,
    x0: f64,
    y0: f64,
    psi: &WaveFunction,
) -> Result<WaveFunction> {
    ensure_positive("delta", delta)?;
    ensure_finite("x0", x0)?;
    ensure_finite("y0", y0)?;
    let (vq, vp) = letter_variances(noise, delta);
    let c = gaussian_kernel_constant(noise, delta) + noise.beta_p / (2.0 * vp);
    let d2 = checked_second_derivative(psi)?;
    let d1 = psi.derivative();
    let i2y = Complex64::new(0.0, 2.0 * y0);
    let amps = psi
        .grid()
        .coords()
        .iter()
        .zip(psi.amps())
        .zip(d1.iter().zip(&d2))
        .map(|((&q, &a), (&da, &dda))| {
            let position = c + ((q - x0).powi(2) + noise.beta_q) / (2.0 * vq);
            let momentum = -dda + i2y * da + y0 * y0 * a;
            position * a + momentum / (2.0 * vp)
        })
        .collect();
    WaveFunction::new(*psi.grid(), amps)
}

/// The operator `a·I − b·p²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lambda0 {
    pub a: f64,
    pub b: f64,
}

impl Lambda0 {
    /// `aψ + bψ''`.
    pub fn apply(&self, psi: &WaveFunction) -> Result<WaveFunction> {
        let d2 = checked_second_derivative(psi)?;
        let amps = psi
            .amps()
            .iter()
            .zip(&d2)
            .map(|(a, d)| self.a * a + self.b * d)
            .collect();
        WaveFunction::new(*psi.grid(), amps)
    }

    /// `⟨ψ|Λ₀|ψ⟩ = a‖ψ‖² − b⟨p²⟩`.
    pub fn expectation(&self, psi: &WaveFunction) -> f64 {
        self.a * psi.norm_sqr() - self.b * momentum_second_moment_spectral(psi)
    }
}

/// Multiplier operator of the optimality conditions.
///
/// Case C is the scalar `ln 2πe(√(β_qβ_p) + ½)`. Case L, for letter squeeze
/// `δ ≥ ½√(β_q/β_p)`, keeps a momentum term with nonnegative weight.
pub fn lambda0(case: CaseTag, noise: &NoiseCovariance, delta: f64) -> Result<Lambda0> {
    match case {
        CaseTag::C => Ok(Lambda0 {
            a: min_wehrl_bound(noise),
            b: 0.0,
        }),
        CaseTag::L => {
            ensure_positive("delta", delta)?;
            let floor = noise.matched_delta();
            if delta < floor * (1.0 - 1e-12) {
                return Err(Error::Precondition(format!(
                    "letter squeeze {delta} is below {floor}"
                )));
            }
            let (vq, vp) = letter_variances(noise, delta);
            let a = gaussian_kernel_constant(noise, delta)
                + (noise.beta_q + 2.0 * delta) / (2.0 * vq)
                + noise.beta_p / (2.0 * vp);
            let b =
                (0.5 * (4.0 * delta * delta * noise.beta_p - noise.beta_q) / (vq * vp)).max(0.0);
            Ok(Lambda0 { a, b })
        }
        CaseTag::R => Err(Error::Precondition(
            "case R is handled by exchanging the quadratures".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::{build_model, cross_entropy, outcome_grid_for, DEFAULT_THERMAL_EPS};
    use crate::states::{fock_grid, random_state, squeezed_coherent, PureEnsemble};
    use std::f64::consts::E;

    fn noise(q: f64, p: f64) -> NoiseCovariance {
        NoiseCovariance::new(q, p).unwrap()
    }

    #[test]
    fn matched_letter_is_eigenvector() {
        for &(bq, bp, x0, y0) in &[
            (0.5, 0.5, 0.0, 0.0),
            (0.5, 8.0, 0.7, -0.4),
            (2.0, 1.0, -1.0, 0.5),
        ] {
            let n = noise(bq, bp);
            let d = n.matched_delta();
            let g = fock_grid(x0, 0, d, 512).unwrap();
            let psi = squeezed_coherent(d, x0, y0, g).unwrap();
            let k = apply_k_gaussian(&n, d, x0, y0, &psi).unwrap();
            let target = min_wehrl_bound(&n);
            let worst = k
                .amps()
                .iter()
                .zip(psi.amps())
                .map(|(a, b)| (a - target * b).norm())
                .fold(0.0, f64::max);
            assert!(worst < 1e-5, "{worst}");
        }
    }

    #[test]
    fn vacuum_expectation_is_constant_plus_one() {
        let n = noise(0.5, 8.0);
        for d in [0.1, 0.3, 1.2] {
            let psi = squeezed_coherent(d, 0.0, 0.0, fock_grid(0.0, 0, d, 512).unwrap()).unwrap();
            let k = apply_k_gaussian(&n, d, 0.0, 0.0, &psi).unwrap();
            let e = psi.inner(&k).unwrap().re;
            assert!(
                (e - gaussian_kernel_constant(&n, d) - 1.0).abs() < 1e-5,
                "{d}: {e}"
            );
        }
    }

    #[test]
    fn expectation_matches_cross_entropy() {
        let n = noise(0.5, 0.5);
        let model = build_model(n, DEFAULT_THERMAL_EPS).unwrap();
        let (d, x0, y0) = (0.4, 0.5, -0.3);
        let g = fock_grid(0.0, 9, 0.5, 512).unwrap();
        let psi = random_state(7, 6, 0.5, g).unwrap();
        let letter = PureEnsemble::from(squeezed_coherent(d, x0, y0, g).unwrap());
        let grid =
            outcome_grid_for(&model, &[&PureEnsemble::from(psi.clone()), &letter], 128).unwrap();
        let direct = psi
            .inner(&apply_k_gaussian(&n, d, x0, y0, &psi).unwrap())
            .unwrap()
            .re;
        let via_density = cross_entropy(&model, &psi, &letter, &grid).unwrap();
        assert!(
            (direct - via_density).abs() < 1e-5,
            "{direct} vs {via_density}"
        );
    }

    #[test]
    fn lambda0_values() {
        let n = noise(0.5, 8.0);
        let c = lambda0(CaseTag::C, &n, 0.0).unwrap();
        assert!((c.a - (5.0 * PI * E).ln()).abs() < 1e-14 && c.b == 0.0);
        let l = lambda0(CaseTag::L, &n, n.matched_delta()).unwrap();
        assert!(l.b.abs() < 1e-15 && (l.a - c.a).abs() < 1e-14);
        let l = lambda0(CaseTag::L, &n, 0.25).unwrap();
        assert!((l.b - 1.0 / 9.0).abs() < 1e-12);
        assert!(lambda0(CaseTag::L, &n, 0.1).is_err());
        assert!(lambda0(CaseTag::R, &n, 0.25).is_err());
    }

    #[test]
    fn lambda0_expectation_matches_action() {
        let n = noise(0.5, 8.0);
        let l = lambda0(CaseTag::L, &n, 0.3).unwrap();
        let g = fock_grid(0.0, 9, 0.3, 1024).unwrap();
        for seed in 0..4 {
            let psi = random_state(seed, 8, 0.3, g).unwrap();
            let via_action = psi.inner(&l.apply(&psi).unwrap()).unwrap().re;
            assert!(
                (via_action - l.expectation(&psi)).abs() < 1e-6,
                "{via_action} {}",
                l.expectation(&psi)
            );
        }
    }

    #[test]
    fn underresolved_state_is_rejected() {
        let g = crate::numerics::Grid1D::new(0.0, 6.0, 40).unwrap();
        let psi =
            WaveFunction::from_fn(g, |q| Complex64::from_polar((-q * q).exp(), 6.0 * q)).unwrap();
        assert!(matches!(
            apply_k_gaussian(&noise(1.0, 1.0), 0.5, 0.0, 0.0, &psi),
            Err(Error::Resolution { .. })
        ));
    }
}
