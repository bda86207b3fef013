use std::f64::consts::PI;

use serde_json::json;

use super::{
    kl_to_vacuum, model_for, params, spectral_moments, vacuum_variances, CheckReport, Profile,
};
use crate::error::{ensure_positive, Error, Result};
use crate::measurement::{husimi, outcome_grid, HusimiDensity, NoiseCovariance};
use crate::numerics::{differential_entropy, kl_divergence, smooth_y, Density2D, Grid1D, Grid2D};
use crate::states::PureEnsemble;

/// Sup-norm tolerance of the smoothing identity.
pub const SMOOTHING_SUP_TOL: f64 = 1e-5;

/// Slack allowed when relative entropy must not grow under smoothing.
pub const DATA_PROCESSING_TOL: f64 = 1e-6;

const MASS_TOL: f64 = 1e-5;
const MOMENT_REL_TOL: f64 = 1e-4;

/// Vacuum relative-entropy residual from an already computed Husimi density of `rho`.
pub(crate) fn vacuum_relative_entropy_from(
    rho: &PureEnsemble,
    h: &HusimiDensity,
    delta: f64,
    tolerance: f64,
) -> Result<CheckReport> {
    ensure_positive("delta", delta)?;
    let noise = h.noise;
    let kl = kl_to_vacuum(h, delta)?;
    let m = spectral_moments(rho);
    let (a, b) = vacuum_variances(&noise, delta);
    let bracket = -differential_entropy(&h.density)
        + (2.0 * PI * (a * b).sqrt()).ln()
        + (noise.beta_q + m.q2) / (2.0 * a)
        + (noise.beta_p + m.p2) / (2.0 * b);
    let p = params(&noise, json!({ "delta": delta, "q2": m.q2, "p2": m.p2 }));
    Ok(CheckReport::identity("vacuum_relative_entropy", p, kl, bracket, tolerance))
}

/// Relative entropy of `p_ρ` from the squeezed-vacuum outcome law against
/// its expression through the Wehrl entropy and second moments of `ρ`.
pub fn check_vacuum_relative_entropy(
    rho: &PureEnsemble,
    noise: &NoiseCovariance,
    delta: f64,
    profile: Profile,
) -> Result<CheckReport> {
    let model = model_for(noise)?;
    let grid = outcome_grid(&model, rho, profile.outcome_points())?;
    let h = husimi(&model, rho, &grid)?;
    vacuum_relative_entropy_from(rho, &h, delta, profile.tolerance())
}

pub(crate) fn gaussian_moments_from(rho: &PureEnsemble, h: &HusimiDensity) -> Vec<CheckReport> {
    let noise = h.noise;
    let m = spectral_moments(rho);
    let d = &h.density;
    let p = params(&noise, json!({ "q2": m.q2, "p2": m.p2 }));
    vec![
        CheckReport::identity("husimi_mass", p.clone(), d.mass(), 1.0, MASS_TOL),
        CheckReport::relative_identity(
            "husimi_q2",
            p.clone(),
            d.expectation(|x, _| x * x),
            m.q2 + noise.beta_q,
            MOMENT_REL_TOL,
        ),
        CheckReport::relative_identity(
            "husimi_p2",
            p,
            d.expectation(|_, y| y * y),
            m.p2 + noise.beta_p,
            MOMENT_REL_TOL,
        ),
    ]
}

/// Unit mass and raw second moments `⟨q²⟩ + β_q`, `⟨p²⟩ + β_p` of the Husimi density.
pub fn check_gaussian_moments(
    rho: &PureEnsemble,
    noise: &NoiseCovariance,
    profile: Profile,
) -> Result<Vec<CheckReport>> {
    let model = model_for(noise)?;
    let grid = outcome_grid(&model, rho, profile.outcome_points())?;
    Ok(gaussian_moments_from(rho, &husimi(&model, rho, &grid)?))
}

/// `β_q / (4δ²)`: the momentum noise at which `|0⟩_δ` is the minimal-noise letter.
pub fn smoothing_reference_beta_p(noise: &NoiseCovariance, delta: f64) -> f64 {
    noise.beta_q / (4.0 * delta * delta)
}

/// The reference noise `(β_q, β_q/(4δ²))`, valid when `δ_β ≤ δ ≤ β_q`.
fn reference_noise(noise: &NoiseCovariance, delta: f64) -> Result<NoiseCovariance> {
    ensure_positive("delta", delta)?;
    let floor = noise.matched_delta();
    if delta < floor * (1.0 - 1e-12) {
        return Err(Error::Precondition(format!(
            "letter squeeze {delta} is below {floor}"
        )));
    }
    if delta > noise.beta_q * (1.0 + 1e-12) {
        return Err(Error::Precondition(format!(
            "letter squeeze {delta} exceeds beta_q = {}, the reference noise would violate uncertainty",
            noise.beta_q
        )));
    }
    let beta_p = smoothing_reference_beta_p(noise, delta).max(0.25 / noise.beta_q);
    NoiseCovariance::new(noise.beta_q, beta_p.min(noise.beta_p))
}

fn merged_axis(a: &Grid1D, b: &Grid1D) -> Result<Grid1D> {
    let lo = a.lo().min(b.lo());
    let hi = a.hi().max(b.hi());
    let step = a.step().min(b.step());
    let points = ((hi - lo) / step).ceil() as usize + 1;
    Grid1D::new(0.5 * (lo + hi), 0.5 * (hi - lo), points)
}

fn merged_grid(a: &Grid2D, b: &Grid2D) -> Result<Grid2D> {
    Ok(Grid2D::new(
        merged_axis(&a.gx, &b.gx)?,
        merged_axis(&a.gy, &b.gy)?,
    ))
}

/// The Husimi density at `(β_q, β_p)` equals the one at `(β_q, β̃_p)`,
/// `β̃_p = β_q/(4δ²)`, smoothed along the momentum outcome by `β_p − β̃_p`.
/// Passes when the sup-norm gap is within [`SMOOTHING_SUP_TOL`].
pub fn check_smoothing_identity(
    rho: &PureEnsemble,
    noise: &NoiseCovariance,
    delta: f64,
    profile: Profile,
) -> Result<CheckReport> {
    let reference = reference_noise(noise, delta)?;
    let model = model_for(noise)?;
    let model_ref = model_for(&reference)?;
    let points = profile.outcome_points();
    let grid = merged_grid(
        &outcome_grid(&model, rho, points)?,
        &outcome_grid(&model_ref, rho, points)?,
    )?;
    let target = husimi(&model, rho, &grid)?.density;
    let source = husimi(&model_ref, rho, &grid)?.density;
    let t = noise.beta_p - reference.beta_p;
    let smoothed = if t > 0.0 {
        smooth_y(&source, t)?
    } else {
        source
    };
    let gap = smoothed.sup_distance(&target)?;
    let p = params(
        noise,
        json!({ "delta": delta, "reference_beta_p": reference.beta_p, "t": t }),
    );
    Ok(CheckReport::identity(
        "smoothing_identity",
        p,
        gap,
        0.0,
        SMOOTHING_SUP_TOL,
    ))
}

/// `h(p_ρ ‖ p_{|0⟩_δ})` at `(β_q, β_p)` does not exceed its value at `(β_q, β̃_p)`.
pub fn check_kl_data_processing(
    rho: &PureEnsemble,
    noise: &NoiseCovariance,
    delta: f64,
    profile: Profile,
) -> Result<CheckReport> {
    let reference = reference_noise(noise, delta)?;
    let kl_at = |n: &NoiseCovariance| -> Result<f64> {
        let model = model_for(n)?;
        let grid = outcome_grid(&model, rho, profile.outcome_points())?;
        kl_to_vacuum(&husimi(&model, rho, &grid)?, delta)
    };
    let p = params(
        noise,
        json!({ "delta": delta, "reference_beta_p": reference.beta_p }),
    );
    Ok(CheckReport::inequality(
        "data_processing",
        p,
        kl_at(noise)?,
        kl_at(&reference)?,
        DATA_PROCESSING_TOL,
    ))
}

/// `h(T_t p ‖ T_t q) ≤ h(p ‖ q)` for the momentum smoothing `T_t`.
pub fn check_kl_monotonicity(p: &Density2D, q: &Density2D, t: f64) -> Result<CheckReport> {
    let before = kl_divergence(p, q)?;
    let after = kl_divergence(&smooth_y(p, t)?, &smooth_y(q, t)?)?;
    Ok(CheckReport::inequality(
        "kl_monotonicity",
        json!({ "t": t }),
        after,
        before,
        DATA_PROCESSING_TOL,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{fock_grid, squeezed_coherent};
    use crate::verify::seeded_state;

    fn vacuum(delta: f64) -> PureEnsemble {
        let grid = fock_grid(0.0, 0, delta, 512).unwrap();
        PureEnsemble::from(squeezed_coherent(delta, 0.0, 0.0, grid).unwrap())
    }

    #[test]
    fn vacuum_relative_entropy_vanishes_on_its_own_letter() {
        let noise = NoiseCovariance::new(0.5, 0.5).unwrap();
        let r = check_vacuum_relative_entropy(&vacuum(0.5), &noise, 0.5, Profile::Fast).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.lhs.abs() < 1e-5 && r.rhs.abs() < 1e-5);
    }

    #[test]
    fn vacuum_relative_entropy_on_random_and_displaced_states() {
        let noise = NoiseCovariance::new(0.5, 8.0).unwrap();
        let psi = seeded_state(11, 8, 0.25, 0.0, 0.0, 512).unwrap();
        let r = check_vacuum_relative_entropy(&PureEnsemble::from(psi), &noise, 0.25, Profile::Fast).unwrap();
        assert!(r.pass, "{r:?}");
        let grid = fock_grid(0.0, 0, 0.3, 512).unwrap();
        let grid = Grid1D::new(0.6, grid.half_width() + 0.6, 512).unwrap();
        let d = squeezed_coherent(0.3, 1.2, -0.7, grid).unwrap();
        let r = check_vacuum_relative_entropy(&PureEnsemble::from(d), &noise, 0.25, Profile::Fast).unwrap();
        assert!(r.pass && r.lhs > 0.1, "{r:?}");
    }

    #[test]
    fn vacuum_relative_entropy_residual_survives_joint_displacement() {
        // Displacing ρ and the reference letter together leaves the relative
        // entropy unchanged; the bracket must track it through the moments.
        let noise = NoiseCovariance::new(1.0, 1.0).unwrap();
        let base = PureEnsemble::from(seeded_state(5, 4, 0.5, 0.0, 0.0, 512).unwrap());
        let moved = PureEnsemble::from(seeded_state(5, 4, 0.5, 0.8, -0.6, 512).unwrap());
        let a = check_vacuum_relative_entropy(&base, &noise, 0.5, Profile::Fast).unwrap();
        let b = check_vacuum_relative_entropy(&moved, &noise, 0.5, Profile::Fast).unwrap();
        assert!(a.pass && b.pass, "{a:?} {b:?}");
        let model = model_for(&noise).unwrap();
        let grid = outcome_grid(&model, &moved, 128).unwrap();
        let h = husimi(&model, &moved, &grid).unwrap();
        let shifted = crate::measurement::husimi_gaussian_closed_form(&noise, 0.5, 0.8, -0.6, &grid)
            .unwrap();
        let joint = kl_divergence(&h.density, &shifted.density).unwrap();
        assert!((joint - a.lhs).abs() < 1e-5, "{joint} vs {}", a.lhs);
    }

    #[test]
    fn husimi_moments_match_state_moments() {
        let noise = NoiseCovariance::new(2.0, 0.5).unwrap();
        let rho = PureEnsemble::from(seeded_state(3, 6, 0.7, -0.5, 0.4, 512).unwrap());
        for r in check_gaussian_moments(&rho, &noise, Profile::Fast).unwrap() {
            assert!(r.pass, "{r:?}");
        }
    }

    #[test]
    fn smoothing_identity_and_data_processing() {
        let noise = NoiseCovariance::new(0.5, 8.0).unwrap();
        let rho = PureEnsemble::from(seeded_state(21, 5, 0.25, 0.3, 0.2, 512).unwrap());
        for delta in [0.125, 0.25, 0.5] {
            let r = check_smoothing_identity(&rho, &noise, delta, Profile::Fast).unwrap();
            assert!(r.pass, "{r:?}");
            let r = check_kl_data_processing(&rho, &noise, delta, Profile::Fast).unwrap();
            assert!(r.pass, "{r:?}");
        }
        assert!(matches!(
            check_smoothing_identity(&rho, &noise, 0.6, Profile::Fast),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            check_smoothing_identity(&rho, &noise, 0.1, Profile::Fast),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn smoothing_never_increases_relative_entropy() {
        let noise = NoiseCovariance::new(0.5, 0.5).unwrap();
        let model = model_for(&NoiseCovariance::new(0.5, 2.5).unwrap()).unwrap();
        let a = PureEnsemble::from(seeded_state(1, 3, 0.5, 0.0, 0.0, 512).unwrap());
        let b = PureEnsemble::from(seeded_state(2, 3, 0.5, 0.5, 0.0, 512).unwrap());
        let grid = crate::measurement::outcome_grid_for(&model, &[&a, &b], 128).unwrap();
        let m = model_for(&noise).unwrap();
        let p = husimi(&m, &a, &grid).unwrap().density;
        let q = husimi(&m, &b, &grid).unwrap().density;
        let r = check_kl_monotonicity(&p, &q, 1.0).unwrap();
        assert!(r.pass && r.slack > 0.0, "{r:?}");
    }
}
