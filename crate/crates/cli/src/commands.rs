use std::fmt;

use hetcap::capacity::{
    capacity, central_threshold, classify, nats_to_bits, rate_of_encoding, CapacityResult,
};
use hetcap::measurement::{build_model, min_wehrl_bound, outcome_grid, wehrl_entropy, NoiseCovariance, DEFAULT_THERMAL_EPS};
use hetcap::numerics::Grid1D;
use hetcap::oracle::{
    constellation_grid, lattice_ba, mc_rate, quadrature_rate, rate_curve, Constellation,
};
use hetcap::states::{displace, fock_grid, squeezed_coherent, squeezed_fock, PureEnsemble, WaveFunction};
use hetcap::verify::{
    check_vacuum_relative_entropy, check_log_sobolev, check_entropy_inequality, run_battery, seeded_state, summarize,
    CheckReport, Profile, BATTERY_VERSION, MIN_WEHRL_FLOOR_TOL,
};
use serde_json::{json, Value};

use crate::{Cli, Command, Format, NoiseArgs, StateKind};

/// Nodes per axis of the quadrature grid used by `mc`.
const QUADRATURE_POINTS: usize = 256;
/// Standard errors within which the Monte Carlo rate must meet quadrature.
const MC_SIGMAS: f64 = 3.0;
/// Allowance for a lattice rate above the closed-form capacity.
const ABOVE_CAPACITY_TOL: f64 = 1e-6;
/// Spacing below which an inserted threshold row duplicates a grid energy.
const ENERGY_MATCH_TOL: f64 = 1e-9;

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Compute(hetcap::Error),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) | CliError::Io(_) => 2,
            CliError::Compute(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(s) => write!(f, "invalid input: {s}"),
            CliError::Compute(e) => write!(f, "computation failed: {e}"),
            CliError::Io(s) => write!(f, "output: {s}"),
        }
    }
}

impl From<hetcap::Error> for CliError {
    fn from(e: hetcap::Error) -> Self {
        use hetcap::Error::*;
        match e {
            InvalidParameter(_) | UncertaintyViolation { .. } | Precondition(_) => {
                CliError::Input(e.to_string())
            }
            other => CliError::Compute(other),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// What a command produced: one document for `json`, a record stream for
/// `jsonl`/`csv`, and an optional closing summary.
pub struct Report {
    pub result: Value,
    pub records: Vec<Value>,
    pub summary: Option<Value>,
    pub pass: bool,
    pub default_format: Format,
    pub extra_header: Value,
}

impl Report {
    fn single(result: Value, pass: bool) -> Self {
        Self {
            records: vec![result.clone()],
            result,
            summary: None,
            pass,
            default_format: Format::Json,
            extra_header: json!({}),
        }
    }
}

fn noise_of(n: &NoiseArgs) -> Result<NoiseCovariance> {
    Ok(NoiseCovariance::new(n.bq, n.bp)?)
}

pub fn run(cli: &Cli) -> Result<Report> {
    match &cli.command {
        Command::Capacity { noise, energy } => cmd_capacity(&noise_of(noise)?, *energy),
        Command::Encoding { noise, energy } => cmd_encoding(&noise_of(noise)?, *energy),
        Command::Entropy { noise, state, delta, x, y, n, dim } => {
            let noise = noise_of(noise)?;
            let delta = delta.unwrap_or_else(|| noise.matched_delta());
            let psi = build_state(*state, delta, *x, *y, *n, *dim, cli.seed, cli.profile)?;
            cmd_entropy(&noise, psi, cli.profile)
        }
        Command::Verify { family, delta, bq, bp } => {
            cmd_verify(family.as_deref(), *delta, (*bq, *bp), cli.profile, cli.seed)
        }
        Command::Ba { noise, energy, lattice } => cmd_ba(&noise_of(noise)?, *energy, *lattice),
        Command::Mc { noise, energy, lattice, samples } => {
            cmd_mc(&noise_of(noise)?, *energy, *lattice, *samples, cli.seed)
        }
        Command::Sweep { noise, e_min, e_max, e_step, lattice, no_ba } => cmd_sweep(
            &noise_of(noise)?,
            energy_grid(*e_min, *e_max, *e_step)?,
            (!no_ba).then_some(*lattice),
        ),
    }
}

fn encoding_json(c: &CapacityResult) -> Value {
    let e = &c.encoding;
    json!({
        "delta": e.delta,
        "gamma_q": e.gamma_q,
        "gamma_p": e.gamma_p,
        "alpha_q": e.alpha.alpha_q,
        "alpha_p": e.alpha.alpha_p,
    })
}

fn cmd_capacity(noise: &NoiseCovariance, energy: f64) -> Result<Report> {
    let c = capacity(noise, energy)?;
    Ok(Report::single(
        json!({
            "case": c.case.to_string(),
            "E": energy,
            "nats": c.value,
            "bits": nats_to_bits(c.value),
            "encoding": encoding_json(&c),
        }),
        true,
    ))
}

fn cmd_encoding(noise: &NoiseCovariance, energy: f64) -> Result<Report> {
    let c = capacity(noise, energy)?;
    let mut out = encoding_json(&c);
    let extra = json!({
        "case": c.case.to_string(),
        "classified": classify(&c.encoding.alpha, noise).to_string(),
        "central_threshold": central_threshold(noise),
        "spent_energy": c.encoding.energy(),
        "rate": rate_of_encoding(&c.encoding, noise),
        "capacity": c.value,
    });
    if let (Value::Object(dst), Value::Object(src)) = (&mut out, extra) {
        dst.extend(src);
    }
    Ok(Report::single(out, true))
}

/// Grid centred between the state's origin and its displacement, wide
/// enough for Fock modes up to `nmax` at either end.
fn shifted_grid(nmax: usize, delta: f64, x: f64, points: usize) -> Result<Grid1D> {
    let base = fock_grid(0.0, nmax, delta, points)?;
    Ok(Grid1D::new(0.5 * x, base.half_width() + 0.5 * x.abs(), points)?)
}

#[allow(clippy::too_many_arguments)]
fn build_state(
    kind: StateKind,
    delta: f64,
    x: f64,
    y: f64,
    n: usize,
    dim: usize,
    seed: u64,
    profile: Profile,
) -> Result<WaveFunction> {
    let points = profile.wave_points();
    Ok(match kind {
        StateKind::Coherent => squeezed_coherent(delta, x, y, fock_grid(x, 0, delta, points)?)?,
        StateKind::Fock => displace(&squeezed_fock(n, delta, shifted_grid(n, delta, x, points)?)?, x, y)?,
        StateKind::Random => seeded_state(seed, dim, delta, x, y, points)?,
    })
}

fn cmd_entropy(noise: &NoiseCovariance, psi: WaveFunction, profile: Profile) -> Result<Report> {
    let model = build_model(*noise, DEFAULT_THERMAL_EPS)?;
    let rho = PureEnsemble::from(psi);
    let grid = outcome_grid(&model, &rho, profile.outcome_points())?;
    let h = wehrl_entropy(&model, &rho, &grid)?;
    let bound = min_wehrl_bound(noise);
    Ok(Report::single(
        json!({ "wehrl_entropy": h, "bound": bound, "excess": h - bound }),
        h - bound >= -MIN_WEHRL_FLOOR_TOL,
    ))
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn single_check(
    family: &str,
    delta: f64,
    noise: &NoiseCovariance,
    profile: Profile,
    seed: u64,
) -> Result<CheckReport> {
    let psi = seeded_state(seed, 4, noise.matched_delta(), 0.4, -0.3, profile.wave_points())?;
    let rho = PureEnsemble::from(psi.clone());
    Ok(match family {
        "vacuum_relative_entropy" => check_vacuum_relative_entropy(&rho, noise, delta, profile)?,
        "entropy_inequality" => check_entropy_inequality(&rho, noise, delta, profile)?,
        "log_sobolev" => check_log_sobolev(&psi, noise, delta, profile)?,
        other => {
            return Err(CliError::Input(format!(
                "--delta applies to vacuum_relative_entropy, entropy_inequality and log_sobolev, not {other:?}"
            )))
        }
    })
}

fn cmd_verify(
    family: Option<&str>,
    delta: Option<f64>,
    (bq, bp): (f64, f64),
    profile: Profile,
    seed: u64,
) -> Result<Report> {
    let reports = match (family, delta) {
        (Some(f), Some(d)) => vec![single_check(f, d, &NoiseCovariance::new(bq, bp)?, profile, seed)?],
        (None, Some(_)) => return Err(CliError::Input("--delta needs --family".into())),
        (f, None) => {
            let mut all = run_battery(profile, seed)?;
            if let Some(f) = f {
                all.retain(|r| r.name == f);
                if all.is_empty() {
                    return Err(CliError::Input(format!("no battery family named {f:?}")));
                }
            }
            all
        }
    };
    let families = summarize(&reports);
    let failures: Vec<&CheckReport> = reports.iter().filter(|r| !r.pass).collect();
    for s in &families {
        eprintln!(
            "{:<20} {:>5} checks  {:>3} failed  min slack {:+.3e}",
            s.family, s.checks, s.failures, s.min_slack
        );
    }
    for r in &failures {
        eprintln!("FAILED {} {} slack {:+.3e}", r.name, r.params, r.slack);
    }
    let pass = failures.is_empty();
    let summary = json!({
        "checks": reports.len(),
        "failures": failures.len(),
        "pass": pass,
        "families": to_value(&families),
    });
    let records: Vec<Value> = reports.iter().map(to_value).collect();
    Ok(Report {
        result: json!({ "reports": records, "summary": summary }),
        records,
        summary: Some(summary),
        pass,
        default_format: Format::Jsonl,
        extra_header: json!({ "battery_version": BATTERY_VERSION }),
    })
}

fn cmd_ba(noise: &NoiseCovariance, energy: f64, lattice: usize) -> Result<Report> {
    let (closed, ba) = lattice_ba(noise, energy, lattice)?;
    let pass = ba.monotone && ba.mutual_information <= closed.value + ABOVE_CAPACITY_TOL;
    Ok(Report::single(
        json!({
            "case": closed.case.to_string(),
            "lattice": lattice,
            "letters": ba.prior.len(),
            "C_closed_form": closed.value,
            "C_BA": ba.mutual_information,
            "gap": closed.value - ba.mutual_information,
            "upper_bound": ba.upper_bound,
            "mean_energy": ba.mean_energy,
            "lagrange_multiplier": ba.lagrange_multiplier,
            "iterations": ba.iterations,
            "converged": ba.converged,
            "monotone": ba.monotone,
        }),
        pass,
    ))
}

fn cmd_mc(
    noise: &NoiseCovariance,
    energy: f64,
    lattice: usize,
    samples: usize,
    seed: u64,
) -> Result<Report> {
    let closed = capacity(noise, energy)?;
    let c = Constellation::gaussian_lattice(&closed.encoding, lattice, lattice)?;
    let grid = constellation_grid(&c, noise, QUADRATURE_POINTS)?;
    let quad = quadrature_rate(&c, noise, &grid)?;
    let mc = mc_rate(&c, noise, samples, seed)?;
    let deviation = (mc.estimate - quad).abs();
    Ok(Report::single(
        json!({
            "case": closed.case.to_string(),
            "lattice": lattice,
            "C_closed_form": closed.value,
            "quadrature": quad,
            "mc_estimate": mc.estimate,
            "std_error": mc.std_error,
            "samples": mc.samples,
        }),
        deviation <= MC_SIGMAS * mc.std_error,
    ))
}

/// `e_min, e_min + step, …` up to `e_max` inclusive.
fn energy_grid(e_min: f64, e_max: f64, step: f64) -> Result<Vec<f64>> {
    if !(step.is_finite() && step > 0.0) {
        return Err(CliError::Input(format!("--e-step must be positive, got {step}")));
    }
    if !(e_min.is_finite() && e_max.is_finite() && e_min <= e_max) {
        return Err(CliError::Input(format!("empty energy range [{e_min}, {e_max}]")));
    }
    let count = ((e_max - e_min) / step + ENERGY_MATCH_TOL).floor() as usize;
    Ok((0..=count).map(|k| e_min + k as f64 * step).collect())
}

fn cmd_sweep(noise: &NoiseCovariance, mut energies: Vec<f64>, lattice: Option<usize>) -> Result<Report> {
    let threshold = central_threshold(noise);
    let (lo, hi) = (energies[0], energies[energies.len() - 1]);
    if threshold >= lo && threshold <= hi && energies.iter().all(|e| (e - threshold).abs() > ENERGY_MATCH_TOL) {
        energies.push(threshold);
        energies.sort_by(f64::total_cmp);
    }
    let closed: Vec<CapacityResult> = energies
        .iter()
        .map(|&e| capacity(noise, e))
        .collect::<hetcap::Result<_>>()?;
    let ba: Vec<Option<f64>> = match lattice {
        Some(n) => rate_curve(noise, &energies, n)?.into_iter().map(|r| Some(r.ba)).collect(),
        None => vec![None; energies.len()],
    };
    let mut pass = closed.windows(2).all(|w| w[1].value >= w[0].value);
    let records: Vec<Value> = closed
        .iter()
        .zip(&ba)
        .map(|(c, b)| {
            let gap = b.map(|b| c.value - b);
            pass &= gap.is_none_or(|g| g >= -ABOVE_CAPACITY_TOL);
            json!({
                "E": c.energy,
                "case": c.case.to_string(),
                "C_closed": c.value,
                "C_BA": b,
                "gap": gap,
            })
        })
        .collect();
    Ok(Report {
        result: json!({ "threshold": threshold, "rows": records }),
        records,
        summary: None,
        pass,
        default_format: Format::Csv,
        extra_header: json!({ "threshold": threshold }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn energy_grid_includes_the_end() {
        let g = energy_grid(0.5, 8.0, 0.25).unwrap();
        assert_eq!(g.len(), 31);
        assert_eq!(g[30], 8.0);
        assert_eq!(energy_grid(1.0, 1.0, 0.5).unwrap(), vec![1.0]);
        assert!(energy_grid(2.0, 1.0, 0.5).is_err());
        assert!(energy_grid(1.0, 2.0, -0.5).is_err());
    }

    #[test]
    fn error_classes_map_to_exit_codes() {
        let e: CliError = hetcap::Error::Precondition("x".into()).into();
        assert_eq!(e.exit_code(), 2);
        let e: CliError = hetcap::Error::Resolution { mismatch: 1.0 }.into();
        assert_eq!(e.exit_code(), 1);
    }
}
