//! The versioned check battery. Families and their state sets are fixed so
//! reports stay comparable across runs; only the seed moves the random states.

use std::collections::BTreeMap;

use rand::distr::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::identities::{gaussian_moments_from, vacuum_relative_entropy_from};
use super::inequalities::{log_sobolev_from, entropy_inequality_from};
use super::{
    check_operator_inequality, check_support_equation, check_kl_data_processing, check_kl_monotonicity,
    check_smoothing_identity, min_wehrl_scan, model_for, noise_floored, seeded_state, CheckReport, Profile,
};
use crate::capacity::CaseTag;
use crate::error::Result;
use crate::measurement::{husimi, outcome_grid, outcome_grid_for, NoiseCovariance};
use crate::numerics::Grid1D;
use crate::states::{squeezed_coherent, squeezed_fock_family, PureEnsemble, WaveFunction};

pub const BATTERY_VERSION: &str = "1";

/// Noise configurations visited by every family.
const NOISES: [(f64, f64); 4] = [(0.5, 0.5), (1.0, 1.0), (0.5, 8.0), (2.0, 0.5)];

const RANDOM_STATES: usize = 50;
const FOCK_MAX: usize = 10;
const LATTICE: [f64; 3] = [-1.0, 0.0, 1.0];
const SCAN_TRIALS: usize = 50;
const OPERATOR_INEQUALITY_PAIRS: usize = 12;
const MONOTONICITY_PAIRS: usize = 20;
/// Squeeze multiples of the matched squeeze used by the inequality families.
const SQUEEZE_MULTIPLES: [f64; 3] = [1.0, 2.0, 4.0];

/// Per-family tally of a battery run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySummary {
    pub family: String,
    pub checks: usize,
    pub failures: usize,
    pub min_slack: f64,
    pub min_margin: f64,
}

pub fn summarize(reports: &[CheckReport]) -> Vec<FamilySummary> {
    let mut by: BTreeMap<&str, FamilySummary> = BTreeMap::new();
    for r in reports {
        let s = by.entry(&r.name).or_insert_with(|| FamilySummary {
            family: r.name.clone(),
            checks: 0,
            failures: 0,
            min_slack: f64::INFINITY,
            min_margin: f64::INFINITY,
        });
        s.checks += 1;
        s.failures += usize::from(!r.pass);
        let signed = match r.kind {
            super::CheckKind::Inequality => r.slack,
            super::CheckKind::Identity => -r.slack.abs(),
        };
        s.min_slack = s.min_slack.min(signed);
        s.min_margin = s.min_margin.min(r.margin());
    }
    by.into_values().collect()
}

/// One seeded random state of the battery: dimension 2..=8, squeeze
/// around the matched squeeze, displaced to a point of the 3×3 lattice.
fn battery_state(noise: &NoiseCovariance, seed: u64, index: usize, points: usize) -> Result<WaveFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let dim = Uniform::new_inclusive(2usize, 8).expect("valid range").sample(&mut rng);
    let spread: f64 = Uniform::new(-0.7, 0.7).expect("valid range").sample(&mut rng);
    let delta = noise.matched_delta() * spread.exp();
    let x = LATTICE[index % 3];
    let y = LATTICE[(index / 3) % 3];
    seeded_state(rng.next_u64(), dim, delta, x, y, points)
}

fn noise(bq: f64, bp: f64) -> NoiseCovariance {
    NoiseCovariance::new(bq, bp).expect("battery noise is valid")
}

/// Vacuum relative entropy, Husimi moments, the entropy inequality and its gradient form, all from one
/// Husimi density per (noise, state).
fn density_families(profile: Profile, seed: u64) -> Result<Vec<CheckReport>> {
    let jobs: Vec<(NoiseCovariance, usize)> = NOISES
        .iter()
        .flat_map(|&(bq, bp)| (0..RANDOM_STATES).map(move |k| (noise(bq, bp), k)))
        .collect();
    let chunks: Vec<Vec<CheckReport>> = jobs
        .par_iter()
        .map(|(n, k)| {
            let psi = battery_state(n, seed, *k, profile.wave_points())?;
            let rho = PureEnsemble::pure(psi.clone())?;
            let model = model_for(n)?;
            let grid = outcome_grid(&model, &rho, profile.outcome_points())?;
            let h = husimi(&model, &rho, &grid)?;
            let m = n.matched_delta();
            let deltas: Vec<f64> = SQUEEZE_MULTIPLES.iter().map(|f| f * m).collect();
            let mut out = vec![vacuum_relative_entropy_from(&rho, &h, m, profile.tolerance())?];
            out.extend(gaussian_moments_from(&rho, &h));
            out.extend(entropy_inequality_from(&rho, &h, &deltas, profile.tolerance())?);
            out.push(log_sobolev_from(&psi, &h, deltas[1], profile.tolerance())?);
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(chunks.into_iter().flatten().collect())
}

fn scan_family(profile: Profile, seed: u64) -> Result<Vec<CheckReport>> {
    NOISES
        .iter()
        .map(|&(bq, bp)| min_wehrl_scan(&noise(bq, bp), SCAN_TRIALS, seed, profile))
        .collect()
}

/// Fock 0..10 at two squeeze scales plus the 3×3 lattice of displaced letters.
fn test_vectors(delta: f64, grid: Grid1D) -> Result<Vec<WaveFunction>> {
    let mut v = squeezed_fock_family(FOCK_MAX, delta, grid)?;
    v.extend(squeezed_fock_family(FOCK_MAX, 2.0 * delta, grid)?);
    for &x in &LATTICE {
        for &y in &LATTICE {
            v.push(squeezed_coherent(delta, x, y, grid)?);
        }
    }
    Ok(v)
}

fn support_equation_family(profile: Profile) -> Result<Vec<CheckReport>> {
    let mut out = Vec::new();
    for &(bq, bp) in &NOISES {
        let n = noise(bq, bp);
        let m = n.matched_delta();
        let half = (4.0 * m).sqrt() * ((2.0 * FOCK_MAX as f64 + 1.0).sqrt() + 6.0) + 2.0;
        let grid = Grid1D::new(0.0, half, 2 * profile.wave_points())?;
        let vectors = test_vectors(m, grid)?;
        let lattice: Vec<(f64, f64)> = LATTICE
            .iter()
            .flat_map(|&x| LATTICE.iter().map(move |&y| (x, y)))
            .collect();
        out.push(check_support_equation(CaseTag::C, &n, m, &lattice, &vectors, profile)?);
        let line: Vec<(f64, f64)> = [-2.0, 0.0, 2.0].iter().map(|&x| (x, 0.0)).collect();
        for f in [1.0, 2.0] {
            out.push(check_support_equation(CaseTag::L, &n, f * m, &line, &vectors, profile)?);
        }
    }
    Ok(out)
}

fn operator_inequality_family(profile: Profile, seed: u64) -> Result<Vec<CheckReport>> {
    let jobs: Vec<(NoiseCovariance, usize, CaseTag, f64)> = NOISES
        .iter()
        .flat_map(|&(bq, bp)| {
            let n = noise(bq, bp);
            let m = n.matched_delta();
            (0..OPERATOR_INEQUALITY_PAIRS).flat_map(move |k| {
                [(n, k, CaseTag::C, m), (n, k, CaseTag::L, 2.0 * m)]
            })
        })
        .collect();
    jobs.par_iter()
        .map(|(n, k, case, delta)| {
            let psi = battery_state(n, seed, 2 * k, profile.wave_points())?;
            let rho = PureEnsemble::pure(battery_state(n, seed, 2 * k + 1, profile.wave_points())?)?;
            check_operator_inequality(&psi, &rho, *case, n, *delta, profile)
        })
        .collect()
}

/// Smoothing identity and data processing wherever `δ_β ≤ δ ≤ β_q` leaves room.
fn smoothing_family(profile: Profile, seed: u64) -> Result<Vec<CheckReport>> {
    let mut jobs = Vec::new();
    for &(bq, bp) in &NOISES {
        let n = noise(bq, bp);
        let m = n.matched_delta();
        if bq <= m {
            continue;
        }
        for f in [0.0, 0.5, 1.0] {
            let delta = m + f * (bq - m);
            for k in 0..3 {
                jobs.push((n, delta, k));
            }
        }
    }
    let chunks: Vec<Vec<CheckReport>> = jobs
        .par_iter()
        .map(|(n, delta, k)| {
            let rho = PureEnsemble::pure(battery_state(n, seed, *k, profile.wave_points())?)?;
            Ok(vec![
                check_smoothing_identity(&rho, n, *delta, profile)?,
                check_kl_data_processing(&rho, n, *delta, profile)?,
            ])
        })
        .collect::<Result<_>>()?;
    Ok(chunks.into_iter().flatten().collect())
}

fn monotonicity_family(profile: Profile, seed: u64) -> Result<Vec<CheckReport>> {
    let n = noise(0.5, 0.5);
    (0..MONOTONICITY_PAIRS)
        .into_par_iter()
        .map(|k| {
            let t = 0.25 * (1 + k % 4) as f64;
            let wide = model_for(&noise(0.5, 0.5 + 4.0 * t))?;
            let a = PureEnsemble::pure(battery_state(&n, seed, 2 * k, profile.wave_points())?)?;
            let b = PureEnsemble::pure(battery_state(&n, seed, 2 * k + 1, profile.wave_points())?)?;
            let grid = outcome_grid_for(&wide, &[&a, &b], profile.outcome_points())?;
            let model = model_for(&n)?;
            let p = husimi(&model, &a, &grid)?.density;
            let q = noise_floored(&husimi(&model, &b, &grid)?.density)?;
            check_kl_monotonicity(&p, &q, t)
        })
        .collect()
}

/// Runs every family and returns the reports sorted by family name, with the
/// generation order kept inside each family.
pub fn run_battery(profile: Profile, seed: u64) -> Result<Vec<CheckReport>> {
    let mut all = density_families(profile, seed)?;
    all.extend(scan_family(profile, seed)?);
    all.extend(support_equation_family(profile)?);
    all.extend(operator_inequality_family(profile, seed)?);
    all.extend(smoothing_family(profile, seed)?);
    all.extend(monotonicity_family(profile, seed)?);
    all.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(all)
}
