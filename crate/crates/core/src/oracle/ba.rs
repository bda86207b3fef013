use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use super::ChannelMatrix;
use crate::error::{ensure_positive, Error, Result};

/// Upper end of the Lagrange multiplier bracket.
pub const LAMBDA_MAX: f64 = 50.0;

/// Bisection steps on the multiplier.
pub const LAMBDA_STEPS: usize = 40;

/// Relative slack tolerated before a decrease of the tilted objective counts as a violation.
const MONOTONE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BAResult {
    pub prior: Vec<f64>,
    /// Mutual information in nats.
    pub mutual_information: f64,
    pub mean_energy: f64,
    /// Upper bound on the constrained capacity certified by the final divergences.
    pub upper_bound: f64,
    pub lagrange_multiplier: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Whether every update raised `I − λE` at the multiplier it used.
    pub monotone: bool,
}

/// `Σ_j W_ij ln W_ij` per letter.
fn row_neg_entropies(channel: &ChannelMatrix) -> Array1<f64> {
    channel.probs.map_axis(ndarray::Axis(1), |row| {
        row.iter().filter(|&&w| w > 0.0).map(|&w| w * w.ln()).sum()
    })
}

/// The channel in both memory orders, so each product below runs along contiguous rows.
struct Layout<'a> {
    w: &'a Array2<f64>,
    wt: Array2<f64>,
    row_terms: Array1<f64>,
}

impl<'a> Layout<'a> {
    fn new(channel: &'a ChannelMatrix) -> Self {
        let wt = channel.probs.t().as_standard_layout().into_owned();
        Self {
            w: &channel.probs,
            wt,
            row_terms: row_neg_entropies(channel),
        }
    }

    /// Divergences `D(W_i ‖ q)` of every row from the output law `q = Wᵀp`.
    fn divergences(&self, prior: &Array1<f64>) -> Array1<f64> {
        let out = self.wt.dot(prior);
        let log_out = out.mapv(|q| {
            if q > 0.0 {
                q.ln()
            } else {
                f64::MIN_POSITIVE.ln()
            }
        });
        &self.row_terms - &self.w.dot(&log_out)
    }
}

/// Prior proportional to `p_i exp(t_i − λ e_i)`, normalised.
fn tilt(
    prior: &Array1<f64>,
    d: &Array1<f64>,
    energies: ArrayView1<f64>,
    lambda: f64,
) -> Array1<f64> {
    let tilted = d - &(lambda * &energies);
    let top = tilted
        .iter()
        .zip(prior)
        .filter(|(_, &p)| p > 0.0)
        .fold(f64::NEG_INFINITY, |m, (&v, _)| m.max(v));
    let mut next = prior * &tilted.mapv(|v| (v - top).exp());
    let z = next.sum();
    next /= z;
    next
}

/// Multiplier for one update: zero when the untilted update is within
/// budget, otherwise the feasible end of a 40-step bisection on `[0, 50]`.
fn update_multiplier(
    prior: &Array1<f64>,
    d: &Array1<f64>,
    energies: ArrayView1<f64>,
    target: f64,
) -> f64 {
    let energy = |lambda: f64| tilt(prior, d, energies, lambda).dot(&energies);
    if energy(0.0) <= target {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, LAMBDA_MAX);
    for _ in 0..LAMBDA_STEPS {
        let mid = 0.5 * (lo + hi);
        if energy(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Energy-constrained capacity of a discrete channel.
///
/// Each iteration computes the row divergences `D_i = D(W_i ‖ Wᵀp)` and moves
/// to `p_i ∝ p_i exp(D_i − λ e_i)`, with `λ ∈ [0, 50]` bisected 40 times so the
/// new prior spends at most `target_energy`. Iteration stops when the
/// increment of `I − λE` over the last update drops below `tol`. The returned mean energy never
/// exceeds `target_energy` by more than the multiplier resolution allows.
///
/// `upper_bound` is the dual bound `max_i (D_i − λ(e_i − E))`, valid for any
/// `λ ≥ 0`, evaluated at the final prior; `converged` requires the gap to it
/// to fall below `tol` as well.
pub fn blahut_arimoto(
    channel: &ChannelMatrix,
    energies: &[f64],
    target_energy: f64,
    tol: f64,
    max_iter: usize,
) -> Result<BAResult> {
    ensure_positive("tol", tol)?;
    let n = channel.letters();
    if energies.len() != n {
        return Err(Error::InvalidParameter(format!(
            "{} energies for {n} letters",
            energies.len()
        )));
    }
    let e_min = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    if target_energy < e_min {
        return Err(Error::Precondition(format!(
            "target energy {target_energy} is below the cheapest letter {e_min}"
        )));
    }
    let energies = ArrayView1::from(energies);
    let layout = Layout::new(channel);

    // Uniform start when affordable, else the Gibbs prior exp(−λe) on budget.
    let mut prior = Array1::from_elem(n, 1.0 / n as f64);
    if prior.dot(&energies) > target_energy {
        prior = tilt(
            &prior,
            &Array1::zeros(n),
            energies,
            update_multiplier(&prior, &Array1::zeros(n), energies, target_energy),
        );
    }
    let mut last = f64::NEG_INFINITY;
    let mut last_energy = prior.dot(&energies);
    let mut monotone = true;
    let mut lambda = 0.0;
    for it in 0..max_iter {
        let d = layout.divergences(&prior);
        let information = prior.dot(&d);
        let mean_energy = prior.dot(&energies);
        // One step at fixed λ raises I − λE; compare at the λ of the step just taken.
        let before = last - lambda * last_energy;
        let after = information - lambda * mean_energy;
        if after < before - MONOTONE_SLACK * before.abs().max(1.0) {
            monotone = false;
            log::warn!(
                "Blahut-Arimoto objective decreased from {before} to {after} at λ = {lambda}"
            );
        }
        let increment = after - before;
        last = information;
        last_energy = mean_energy;
        let bound = dual_bound(&d, energies, lambda, target_energy);
        if increment < tol || it + 1 == max_iter {
            return Ok(BAResult {
                mean_energy,
                prior: prior.to_vec(),
                mutual_information: information.max(0.0),
                upper_bound: bound,
                lagrange_multiplier: lambda,
                iterations: it + 1,
                converged: increment < tol && bound - information < tol,
                monotone,
            });
        }
        lambda = update_multiplier(&prior, &d, energies, target_energy);
        prior = tilt(&prior, &d, energies, lambda);
    }
    Err(Error::InvalidParameter("max_iter must be positive".into()))
}

fn dual_bound(d: &Array1<f64>, energies: ArrayView1<f64>, lambda: f64, target: f64) -> f64 {
    d.iter()
        .zip(energies)
        .map(|(d, e)| d - lambda * (e - target))
        .fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{Grid1D, Grid2D};
    use ndarray::array;

    fn channel(probs: ndarray::Array2<f64>) -> ChannelMatrix {
        let g = Grid1D::new(0.0, 1.0, 16).unwrap();
        ChannelMatrix {
            probs,
            grid: Grid2D::new(g, g),
        }
    }

    fn binary_entropy(p: f64) -> f64 {
        -p * p.ln() - (1.0 - p) * (1.0 - p).ln()
    }

    #[test]
    fn binary_symmetric_channel() {
        let e = 0.11;
        let w = channel(array![[1.0 - e, e], [e, 1.0 - e]]);
        let r = blahut_arimoto(&w, &[0.0, 0.0], 1.0, 1e-12, 10_000).unwrap();
        assert!((r.mutual_information - (2f64.ln() - binary_entropy(e))).abs() < 1e-10);
        assert!(r.converged && r.monotone);
    }

    #[test]
    fn energy_constrained_noiseless_bit() {
        // Costs 0 and 1, budget 0.2: the best prior puts weight 0.2 on the costly letter.
        let w = channel(array![[1.0, 0.0], [0.0, 1.0]]);
        let r = blahut_arimoto(&w, &[0.0, 1.0], 0.2, 1e-12, 10_000).unwrap();
        assert!(
            (r.mutual_information - binary_entropy(0.2)).abs() < 1e-6,
            "{r:?}"
        );
        assert!(r.mean_energy <= 0.2 + 1e-9 && (r.mean_energy - 0.2).abs() < 1e-3);
        assert!(r.lagrange_multiplier > 0.0);
        assert!(r.upper_bound >= r.mutual_information - 1e-12);
        assert!(r.upper_bound - binary_entropy(0.2) < 1e-6);
    }

    #[test]
    fn unaffordable_uniform_start_is_tilted_onto_budget() {
        let w = channel(array![[0.9, 0.1, 0.0], [0.1, 0.8, 0.1], [0.0, 0.1, 0.9]]);
        let r = blahut_arimoto(&w, &[0.0, 1.0, 4.0], 0.5, 1e-12, 100_000).unwrap();
        assert!(r.mean_energy <= 0.5 + 1e-9 && r.mean_energy > 0.499);
        assert!(r.monotone && r.upper_bound >= r.mutual_information);
        // Brute force over the budget line p1 + 4 p2 = 0.5 (the constraint binds).
        let rows = [[0.9, 0.1, 0.0], [0.1, 0.8, 0.1], [0.0, 0.1, 0.9]];
        let info = |p: [f64; 3]| {
            let out: Vec<f64> = (0..3)
                .map(|j| (0..3).map(|i| p[i] * rows[i][j]).sum())
                .collect();
            (0..3)
                .flat_map(|i| (0..3).map(move |j| (i, j)))
                .filter(|&(i, j)| rows[i][j] > 0.0)
                .map(|(i, j)| p[i] * rows[i][j] * (rows[i][j] / out[j]).ln())
                .sum::<f64>()
        };
        let (mut lo, mut hi) = (0.0, 0.125);
        for _ in 0..200 {
            let (a, b) = (lo + (hi - lo) / 3.0, hi - (hi - lo) / 3.0);
            let at = |t: f64| info([0.5 + 3.0 * t, 0.5 - 4.0 * t, t]);
            if at(a) < at(b) {
                lo = a
            } else {
                hi = b
            }
        }
        let t = 0.5 * (lo + hi);
        let best = info([0.5 + 3.0 * t, 0.5 - 4.0 * t, t]);
        assert!(
            (r.mutual_information - best).abs() < 1e-9,
            "{r:?} vs {best}"
        );
    }

    #[test]
    fn single_letter_carries_nothing() {
        let w = channel(array![[0.25, 0.75]]);
        let r = blahut_arimoto(&w, &[0.5], 0.5, 1e-10, 100).unwrap();
        assert_eq!(r.mutual_information, 0.0);
    }

    #[test]
    fn rejects_unreachable_budget() {
        let w = channel(array![[1.0, 0.0], [0.0, 1.0]]);
        assert!(blahut_arimoto(&w, &[1.0, 2.0], 0.5, 1e-8, 100).is_err());
    }
}
