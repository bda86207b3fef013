use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{blahut_arimoto, build_channel, BAResult, Constellation};
use crate::capacity::{capacity, CapacityResult};
use crate::error::{Error, Result};
use crate::measurement::NoiseCovariance;
use crate::numerics::{Grid1D, Grid2D, COVERAGE_SIGMAS};

/// Outcome nodes per axis of the discretized channel.
pub const BA_OUTCOME_POINTS: usize = 96;
/// Half-width of the outcome window in displacement standard deviations,
/// on top of the letter spread; fixed so every lattice size sees the same cells.
pub const BA_REACH_SIGMAS: f64 = 3.0;
pub const BA_TOL: f64 = 1e-9;
pub const BA_MAX_ITER: usize = 20_000;

/// One row of a capacity-versus-energy curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCurveRow {
    #[serde(rename = "E")]
    pub energy: f64,
    #[serde(rename = "C_closed_form")]
    pub closed_form: f64,
    #[serde(rename = "C_BA")]
    pub ba: f64,
    /// `C_closed_form − C_BA`.
    pub gap: f64,
    /// Letters per lattice axis.
    pub lattice: usize,
}

/// Writes rows as CSV with columns `E, C_closed_form, C_BA, gap, lattice`.
pub fn write_rate_curve<W: Write>(rows: &[RateCurveRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)
            .map_err(|e| Error::InvalidParameter(format!("csv: {e}")))?;
    }
    w.flush()
        .map_err(|e| Error::InvalidParameter(format!("csv: {e}")))
}

/// Blahut–Arimoto on the `lattice × lattice` quantile lattice of the optimal
/// Gaussian encoding at `energy` (one axis collapses in the one-quadrature cases).
pub fn lattice_ba(
    noise: &NoiseCovariance,
    energy: f64,
    lattice: usize,
) -> Result<(CapacityResult, BAResult)> {
    let closed = capacity(noise, energy)?;
    let constellation = Constellation::gaussian_lattice(&closed.encoding, lattice, lattice)?;
    let grid = encoding_grid(&closed, noise)?;
    let channel = build_channel(&constellation, noise, &grid)?;
    let target = constellation.mean_energy().max(energy);
    let ba = blahut_arimoto(&channel, &constellation.energies, target, BA_TOL, BA_MAX_ITER)?;
    Ok((closed, ba))
}

/// Outcome window of the encoding itself, independent of the lattice size.
fn encoding_grid(closed: &CapacityResult, noise: &NoiseCovariance) -> Result<Grid2D> {
    let e = &closed.encoding;
    let (vq, vp) = (noise.beta_q + e.delta, noise.beta_p + 0.25 / e.delta);
    let axis = |gamma: f64, var: f64| {
        Grid1D::new(0.0, BA_REACH_SIGMAS * gamma.sqrt() + COVERAGE_SIGMAS * var.sqrt(), BA_OUTCOME_POINTS)
    };
    Ok(Grid2D::new(axis(e.gamma_q, vq)?, axis(e.gamma_p, vp)?))
}

/// Closed form against lattice BA at each energy, in the order given.
pub fn rate_curve(noise: &NoiseCovariance, energies: &[f64], lattice: usize) -> Result<Vec<RateCurveRow>> {
    energies
        .par_iter()
        .map(|&e| {
            let (closed, ba) = lattice_ba(noise, e, lattice)?;
            Ok(RateCurveRow {
                energy: e,
                closed_form: closed.value,
                ba: ba.mutual_information,
                gap: closed.value - ba.mutual_information,
                lattice,
            })
        })
        .collect()
}
