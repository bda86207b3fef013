use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use super::{
    kl_to_vacuum, model_for, noise_floored, params, seeded_state, spectral_moments, CheckReport, Profile,
};
use crate::capacity::CaseTag;
use crate::error::{ensure_positive, Error, Result};
use crate::measurement::{
    husimi, lambda0, min_wehrl_bound, outcome_grid, outcome_grid_for, wehrl_entropy,
    HusimiDensity, NoiseCovariance,
};
use crate::numerics::{cross_entropy_diagnostics, differential_entropy, Grid1D};
use crate::states::{
    fock_grid, momentum_second_moment_spectral, second_moments, squeezed_coherent, squeezed_fock,
    PureEnsemble, SecondMoments, WaveFunction,
};

/// Allowed negative slack of `−∫p_ψ ln p_ρ − h(p_ψ)`, which is a relative entropy.
pub const GIBBS_TOL: f64 = 1e-8;

/// No state of the scan may fall further than this below the minimal Wehrl entropy.
pub const MIN_WEHRL_FLOOR_TOL: f64 = 1e-4;

/// The scan minimum must come within this of the bound.
pub const MIN_WEHRL_ATTAIN_TOL: f64 = 1e-3;

/// Largest relative gap tolerated between the gradient and spectral `⟨p²⟩`.
const GRADIENT_MATCH_TOL: f64 = 1e-5;

fn require_squeeze_above_floor(noise: &NoiseCovariance, delta: f64) -> Result<()> {
    ensure_positive("delta", delta)?;
    let floor = noise.matched_delta();
    if delta < floor * (1.0 - 1e-12) {
        return Err(Error::Precondition(format!(
            "letter squeeze {delta} is below {floor}"
        )));
    }
    Ok(())
}

/// `(⟨q²⟩ + 4δ²⟨p²⟩ − 2δ) / (2(β_q + δ))`.
fn entropy_inequality_bound(noise: &NoiseCovariance, delta: f64, q2: f64, p2: f64) -> f64 {
    (q2 + 4.0 * delta * delta * p2 - 2.0 * delta) / (2.0 * (noise.beta_q + delta))
}

pub(crate) fn entropy_inequality_from(
    rho: &PureEnsemble,
    h: &HusimiDensity,
    deltas: &[f64],
    tolerance: f64,
) -> Result<Vec<CheckReport>> {
    let noise = h.noise;
    for &d in deltas {
        require_squeeze_above_floor(&noise, d)?;
    }
    let m = spectral_moments(rho);
    deltas
        .iter()
        .map(|&delta| {
            let kl = kl_to_vacuum(h, delta)?;
            let bound = entropy_inequality_bound(&noise, delta, m.q2, m.p2);
            let p = params(&noise, json!({ "delta": delta, "q2": m.q2, "p2": m.p2 }));
            Ok(CheckReport::inequality("entropy_inequality", p, kl, bound, tolerance))
        })
        .collect()
}

/// `h(p_ρ ‖ p_{|0⟩_δ}) ≤ (⟨q²⟩ + 4δ²⟨p²⟩ − 2δ)/(2(β_q + δ))` for `δ ≥ ½√(β_q/β_p)`.
pub fn check_entropy_inequality(
    rho: &PureEnsemble,
    noise: &NoiseCovariance,
    delta: f64,
    profile: Profile,
) -> Result<CheckReport> {
    Ok(check_entropy_inequality_batch(rho, noise, &[delta], profile)?.remove(0))
}

/// [`check_entropy_inequality`] at several squeezes, sharing one Husimi density.
pub fn check_entropy_inequality_batch(
    rho: &PureEnsemble,
    noise: &NoiseCovariance,
    deltas: &[f64],
    profile: Profile,
) -> Result<Vec<CheckReport>> {
    for &d in deltas {
        require_squeeze_above_floor(noise, d)?;
    }
    let model = model_for(noise)?;
    let grid = outcome_grid(&model, rho, profile.outcome_points())?;
    entropy_inequality_from(rho, &husimi(&model, rho, &grid)?, deltas, profile.tolerance())
}

/// Moments with `⟨p²⟩ = ∫|ψ'|²` by differences, plus the spectral `⟨p²⟩` it was checked against.
fn gradient_moments(psi: &WaveFunction) -> Result<(SecondMoments, f64)> {
    let fd = second_moments(psi);
    let spectral = momentum_second_moment_spectral(psi);
    let mismatch = (fd.p2 - spectral).abs() / spectral.max(f64::MIN_POSITIVE);
    if mismatch > GRADIENT_MATCH_TOL {
        return Err(Error::Resolution { mismatch });
    }
    Ok((fd, spectral))
}

pub(crate) fn log_sobolev_from(
    psi: &WaveFunction,
    h: &HusimiDensity,
    delta: f64,
    tolerance: f64,
) -> Result<CheckReport> {
    let noise = h.noise;
    require_squeeze_above_floor(&noise, delta)?;
    let (fd, spectral) = gradient_moments(psi)?;
    let kl = kl_to_vacuum(h, delta)?;
    let bound = entropy_inequality_bound(&noise, delta, fd.q2, fd.p2);
    let p = params(
        &noise,
        json!({ "delta": delta, "q2": fd.q2, "gradient_p2": fd.p2, "spectral_p2": spectral }),
    );
    Ok(CheckReport::inequality(
        "log_sobolev",
        p,
        kl,
        bound,
        tolerance,
    ))
}

/// The pure-state inequality with `⟨p²⟩` replaced by the gradient integral
/// `∫|ψ'|²` (fourth-order differences), which must agree with the spectral
/// momentum moment to `1e-5` relative.
pub fn check_log_sobolev(
    psi: &WaveFunction,
    noise: &NoiseCovariance,
    delta: f64,
    profile: Profile,
) -> Result<CheckReport> {
    require_squeeze_above_floor(noise, delta)?;
    gradient_moments(psi)?;
    let rho = PureEnsemble::pure(psi.clone())?;
    let model = model_for(noise)?;
    let grid = outcome_grid(&model, &rho, profile.outcome_points())?;
    log_sobolev_from(psi, &husimi(&model, &rho, &grid)?, delta, profile.tolerance())
}

/// `max |⟨φ|(K(ρ₀) − Λ₀)|x, y⟩_δ⟩|` over letters and test vectors, where
/// `ρ₀` is the letter itself. Letters are built on the test vectors' grid.
pub fn check_support_equation(
    case: CaseTag,
    noise: &NoiseCovariance,
    delta: f64,
    letters: &[(f64, f64)],
    test_vectors: &[WaveFunction],
    profile: Profile,
) -> Result<CheckReport> {
    let floor = noise.matched_delta();
    match case {
        CaseTag::C if (delta - floor).abs() > 1e-9 * floor => {
            return Err(Error::Precondition(format!(
                "case C letters need squeeze {floor}, got {delta}"
            )))
        }
        CaseTag::L => {
            require_squeeze_above_floor(noise, delta)?;
            if letters.iter().any(|&(_, y)| y != 0.0) {
                return Err(Error::Precondition(
                    "case L letters carry no momentum displacement".into(),
                ));
            }
        }
        _ => {}
    }
    let lam = lambda0(case, noise, delta)?;
    let first = test_vectors
        .first()
        .ok_or_else(|| Error::InvalidParameter("no test vectors".into()))?;
    let grid = *first.grid();
    let mut residual: f64 = 0.0;
    for &(x, y) in letters {
        let letter = squeezed_coherent(delta, x, y, grid)?;
        let k = crate::measurement::apply_k_gaussian(noise, delta, x, y, &letter)?;
        let diff = k.add_scaled((-1.0).into(), &lam.apply(&letter)?)?;
        for phi in test_vectors {
            residual = residual.max(phi.inner(&diff)?.norm());
        }
    }
    let p = params(
        noise,
        json!({
            "case": case.to_string(),
            "delta": delta,
            "a": lam.a,
            "b": lam.b,
            "letters": letters.len(),
            "test_vectors": test_vectors.len(),
        }),
    );
    Ok(CheckReport::identity(
        "support_equation",
        p,
        residual,
        0.0,
        profile.tolerance(),
    ))
}

/// `⟨ψ|Λ₀|ψ⟩ ≤ ⟨ψ|K(ρ)|ψ⟩ = −∫p_ψ ln p_ρ`. The intermediate step
/// `−∫p_ψ ln p_ρ ≥ h(p_ψ)` is reported as `gibbs_slack` and must hold to [`GIBBS_TOL`].
pub fn check_operator_inequality(
    psi: &WaveFunction,
    rho: &PureEnsemble,
    case: CaseTag,
    noise: &NoiseCovariance,
    delta: f64,
    profile: Profile,
) -> Result<CheckReport> {
    let lam = lambda0(case, noise, delta)?;
    let model = model_for(noise)?;
    let pure = PureEnsemble::pure(psi.clone())?;
    let grid = outcome_grid_for(&model, &[&pure, rho], profile.outcome_points())?;
    let p_psi = husimi(&model, &pure, &grid)?;
    let p_rho = husimi(&model, rho, &grid)?;
    let cross = cross_entropy_diagnostics(&p_psi.density, &noise_floored(&p_rho.density)?)?.nats;
    let own = differential_entropy(&p_psi.density);
    let gibbs = cross - own;
    let lower = lam.expectation(psi);
    let p = params(
        noise,
        json!({
            "case": case.to_string(),
            "delta": delta,
            "wehrl": own,
            "gibbs_slack": gibbs,
        }),
    );
    let mut r = CheckReport::inequality("operator_inequality", p, lower, cross, profile.tolerance());
    r.pass &= gibbs >= -GIBBS_TOL;
    Ok(r)
}

#[derive(Clone, Copy, PartialEq)]
enum Member {
    Coherent,
    Fock,
    Random,
}

impl Member {
    fn label(self) -> &'static str {
        match self {
            Member::Coherent => "squeezed_coherent",
            Member::Fock => "squeezed_fock",
            Member::Random => "random",
        }
    }
}

/// Squeeze multiples of the matched squeeze scanned by the Gaussian family.
const COHERENT_SQUEEZES: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];
const COHERENT_SHIFTS: [(f64, f64); 2] = [(0.0, 0.0), (0.7, -0.4)];
const SCAN_FOCK_MAX: usize = 10;

fn scan_family(
    noise: &NoiseCovariance,
    n_trials: usize,
    seed: u64,
    points: usize,
) -> Result<Vec<(Member, f64, WaveFunction)>> {
    let matched = noise.matched_delta();
    let mut out = Vec::new();
    for f in COHERENT_SQUEEZES {
        let d = f * matched;
        for (x, y) in COHERENT_SHIFTS {
            let base = fock_grid(0.0, 0, d, points)?;
            let grid = Grid1D::new(x, base.half_width(), points)?;
            out.push((Member::Coherent, d, squeezed_coherent(d, x, y, grid)?));
        }
    }
    let grid = fock_grid(0.0, SCAN_FOCK_MAX, matched, points)?;
    for n in 1..=SCAN_FOCK_MAX {
        out.push((Member::Fock, matched, squeezed_fock(n, matched, grid)?));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Uniform::new(-1.0f64, 1.0).expect("valid range");
    let dims = Uniform::new_inclusive(2usize, 6).expect("valid range");
    for _ in 0..n_trials {
        let dim = dims.sample(&mut rng);
        let d = matched * unit.sample(&mut rng).exp();
        let (x, y) = (unit.sample(&mut rng), unit.sample(&mut rng));
        let state_seed = rand::Rng::next_u64(&mut rng);
        out.push((Member::Random, d, seeded_state(state_seed, dim, d, x, y, points)?));
    }
    Ok(out)
}

/// Minimum Wehrl entropy over a fixed family: squeezed coherent states on a
/// squeeze/displacement grid including `½√(β_q/β_p)`, squeezed Fock states
/// 1..10, and `n_trials` seeded random superpositions. Passes when nothing
/// falls more than [`MIN_WEHRL_FLOOR_TOL`] below `ln 2πe(√(β_qβ_p) + ½)` and
/// the minimum is a squeezed coherent state within [`MIN_WEHRL_ATTAIN_TOL`] of it.
pub fn min_wehrl_scan(
    noise: &NoiseCovariance,
    n_trials: usize,
    seed: u64,
    profile: Profile,
) -> Result<CheckReport> {
    if n_trials == 0 {
        return Err(Error::InvalidParameter("n_trials must be at least 1".into()));
    }
    let model = model_for(noise)?;
    let family = scan_family(noise, n_trials, seed, profile.wave_points())?;
    let entropies: Vec<f64> = family
        .par_iter()
        .map(|(_, _, psi)| {
            let rho = PureEnsemble::from(psi.clone());
            let grid = outcome_grid(&model, &rho, profile.outcome_points())?;
            wehrl_entropy(&model, &rho, &grid)
        })
        .collect::<Result<_>>()?;
    let (best, &min) = entropies
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("family is never empty");
    let bound = min_wehrl_bound(noise);
    let (member, delta, _) = &family[best];
    let attained = *member == Member::Coherent && (min - bound).abs() <= MIN_WEHRL_ATTAIN_TOL;
    let p = params(
        noise,
        json!({
            "n_trials": n_trials,
            "seed": seed,
            "members": family.len(),
            "argmin": member.label(),
            "argmin_delta": delta,
            "attained": attained,
        }),
    );
    let mut r = CheckReport::inequality("min_wehrl", p, bound, min, MIN_WEHRL_FLOOR_TOL);
    r.pass &= attained;
    Ok(r)
}
