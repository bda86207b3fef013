use std::f64::consts::PI;

use ndarray::{Array2, Zip};
use num_complex::Complex64;

use super::{MeasurementModel, NoiseCovariance};
use crate::error::{ensure_positive, Error, Result};
use crate::numerics::{
    cross_entropy_diagnostics, differential_entropy, spectral, Density2D, Grid1D, Grid2D,
    COVERAGE_SIGMAS,
};
use crate::states::{hermite_functions, PureEnsemble, SecondMoments, WaveFunction};

/// Tolerance on the quadrature mass of a computed Husimi density.
pub const HUSIMI_MASS_TOL: f64 = 1e-5;

/// Amplitudes below this fraction of the peak density are dropped from the overlap sums.
const SUPPORT_CUTOFF: f64 = 1e-32;

/// Minimum number of outcome nodes per standard deviation of the minimal-noise kernel.
const NODES_PER_KERNEL_SIGMA: f64 = 3.0;

/// Outcome density `Tr[ρ m(x, y)]`, tagged with the noise that produced it
/// and the raw second moments of the source state.
#[derive(Debug, Clone, PartialEq)]
pub struct HusimiDensity {
    pub density: Density2D,
    pub noise: NoiseCovariance,
    pub moments: SecondMoments,
}

impl HusimiDensity {
    pub fn grid(&self) -> &Grid2D {
        self.density.grid()
    }
}

/// Adds `scale · Σ_n w_n |⟨D(x,y) χ_n | ψ⟩|² / 2π` over the outcome grid,
/// where `χ_n` are squeezed Fock modes of ground variance `delta`.
///
/// For each outcome `x` the overlap is a Fourier integral in `q` evaluated
/// at frequency `y`, so every mode costs one complex matrix product.
fn accumulate_overlaps(
    delta: f64,
    mode_weights: &[f64],
    psi: &WaveFunction,
    grid: &Grid2D,
    scale: f64,
    out: &mut Array2<f64>,
) {
    let amps = psi.amps();
    let peak = amps.iter().map(|a| a.norm_sqr()).fold(0.0, f64::max);
    let keep = |a: &Complex64| a.norm_sqr() > SUPPORT_CUTOFF * peak;
    let lo = amps.iter().position(keep).unwrap_or(0);
    let hi = amps.iter().rposition(keep).unwrap_or(amps.len() - 1);
    let wave = psi.grid();
    let h = wave.step();
    let qs: Vec<f64> = (lo..=hi).map(|i| wave.coord(i)).collect();
    let xs = grid.gx.coords();
    let ys = grid.gy.coords();
    let nq = qs.len();
    let nmodes = mode_weights.len();

    let phases = Array2::from_shape_fn((ys.len(), nq), |(k, n)| {
        Complex64::from_polar(1.0, -ys[k] * qs[n])
    });

    let scale_len = (2.0 * delta).powf(-0.25);
    let inv_len = 1.0 / (2.0 * delta).sqrt();
    let mut columns: Vec<Array2<Complex64>> =
        (0..nmodes).map(|_| Array2::zeros((nq, xs.len()))).collect();
    let mut herm = Vec::with_capacity(nmodes);
    for (j, &x) in xs.iter().enumerate() {
        for (n, &q) in qs.iter().enumerate() {
            hermite_functions(nmodes - 1, (q - x) * inv_len, &mut herm);
            let a = amps[lo + n] * h * scale_len;
            for (m, col) in columns.iter_mut().enumerate() {
                col[[n, j]] = a * herm[m];
            }
        }
    }
    let norm = scale / (2.0 * PI);
    for (col, w) in columns.iter().zip(mode_weights) {
        let overlaps = phases.dot(col);
        let factor = norm * w;
        Zip::from(&mut *out)
            .and(&overlaps.t())
            .for_each(|o, a| *o += factor * a.norm_sqr());
    }
}

fn finish(
    noise: NoiseCovariance,
    moments: SecondMoments,
    grid: Grid2D,
    mut values: Array2<f64>,
) -> Result<HusimiDensity> {
    values.mapv_inplace(|v| v.max(0.0));
    let density = Density2D::new(grid, values)?;
    let mass = density.mass();
    if (mass - 1.0).abs() > HUSIMI_MASS_TOL {
        return Err(Error::MassDeficit {
            mass,
            tolerance: HUSIMI_MASS_TOL,
        });
    }
    Ok(HusimiDensity {
        density,
        noise,
        moments,
    })
}

/// Generalized Husimi density `Tr[ρ m(x, y)]` on `grid`.
///
/// The minimal-noise density at `δ_β` (a single displaced squeezed vacuum
/// kernel) is computed from wavefunction overlaps and then convolved with
/// the classical Gaussian excess noise `diag(β_q − δ_β, β_p − 1/(4δ_β))`.
/// This equals the thermal eigen-sum of [`husimi_eigen`] exactly.
pub fn husimi(
    model: &MeasurementModel,
    rho: &PureEnsemble,
    grid: &Grid2D,
) -> Result<HusimiDensity> {
    let mut values = Array2::zeros(grid.shape());
    for (w, psi) in rho.members() {
        accumulate_overlaps(model.delta_beta, &[1.0], psi, grid, *w, &mut values);
    }
    let (sq, sp) = model.excess_noise();
    spectral::gaussian_blur(&mut values, 0, sq, grid.gx.step());
    spectral::gaussian_blur(&mut values, 1, sp, grid.gy.step());
    finish(model.noise, rho.second_moments(), *grid, values)
}

/// Generalized Husimi density from the truncated thermal eigen-decomposition
/// `(1/2π) Σ_k λ_k Σ_n w_n |⟨D(x,y) χ_n | φ_k⟩|²`.
pub fn husimi_eigen(
    model: &MeasurementModel,
    rho: &PureEnsemble,
    grid: &Grid2D,
) -> Result<HusimiDensity> {
    let mut values = Array2::zeros(grid.shape());
    for (w, psi) in rho.members() {
        accumulate_overlaps(model.delta_beta, &model.weights, psi, grid, *w, &mut values);
    }
    finish(model.noise, rho.second_moments(), *grid, values)
}

/// Outcome density of `|x0, y0⟩_δ`: a Gaussian centred at `(x0, y0)` with
/// variances `(β_q + δ, β_p + 1/(4δ))`.
pub fn husimi_gaussian_closed_form(
    noise: &NoiseCovariance,
    delta: f64,
    x0: f64,
    y0: f64,
    grid: &Grid2D,
) -> Result<HusimiDensity> {
    ensure_positive("delta", delta)?;
    let vx = noise.beta_q + delta;
    let vy = noise.beta_p + 0.25 / delta;
    let norm = 1.0 / (2.0 * PI * (vx * vy).sqrt());
    let density = Density2D::from_fn(*grid, |x, y| {
        norm * (-(x - x0).powi(2) / (2.0 * vx) - (y - y0).powi(2) / (2.0 * vy)).exp()
    })?;
    let moments = SecondMoments {
        q2: delta + x0 * x0,
        p2: 0.25 / delta + y0 * y0,
    };
    Ok(HusimiDensity {
        density,
        noise: *noise,
        moments,
    })
}

fn axis_extent(noise_var: f64, ensembles: &[&PureEnsemble], position: bool) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for rho in ensembles {
        let (mq, mp) = rho.means();
        let m = rho.second_moments();
        let (mean, raw) = if position { (mq, m.q2) } else { (mp, m.p2) };
        let sigma = ((raw - mean * mean).max(0.0) + noise_var).sqrt();
        lo = lo.min(mean - COVERAGE_SIGMAS * sigma);
        hi = hi.max(mean + COVERAGE_SIGMAS * sigma);
    }
    (lo, hi)
}

fn axis_grid(lo: f64, hi: f64, points: usize, kernel_sigma: f64) -> Result<Grid1D> {
    let width = hi - lo;
    let needed = (NODES_PER_KERNEL_SIGMA * width / kernel_sigma).ceil() as usize + 1;
    Grid1D::new(0.5 * (lo + hi), 0.5 * width, points.max(needed))
}

/// Outcome grid covering `mean ± 8σ` of every given state's Husimi density,
/// with at least `points` nodes per axis (more when the minimal-noise kernel
/// would otherwise be under-resolved).
pub fn outcome_grid_for(
    model: &MeasurementModel,
    ensembles: &[&PureEnsemble],
    points: usize,
) -> Result<Grid2D> {
    let noise = model.noise;
    let (xlo, xhi) = axis_extent(noise.beta_q, ensembles, true);
    let (ylo, yhi) = axis_extent(noise.beta_p, ensembles, false);
    let gx = axis_grid(xlo, xhi, points, model.delta_beta.sqrt())?;
    let gy = axis_grid(ylo, yhi, points, 0.5 / model.delta_beta.sqrt())?;
    Ok(Grid2D::new(gx, gy))
}

pub fn outcome_grid(model: &MeasurementModel, rho: &PureEnsemble, points: usize) -> Result<Grid2D> {
    outcome_grid_for(model, &[rho], points)
}

/// Generalized Wehrl entropy `h_M(ρ)`, the differential entropy of the Husimi density.
pub fn wehrl_entropy(model: &MeasurementModel, rho: &PureEnsemble, grid: &Grid2D) -> Result<f64> {
    Ok(differential_entropy(&husimi(model, rho, grid)?.density))
}

/// `⟨ψ|K(ρ)|ψ⟩ = −∫∫ p_ψ ln p_ρ`.
pub fn cross_entropy(
    model: &MeasurementModel,
    psi: &WaveFunction,
    rho: &PureEnsemble,
    grid: &Grid2D,
) -> Result<f64> {
    let p_psi = husimi(model, &PureEnsemble::from(psi.clone()), grid)?;
    let p_rho = husimi(model, rho, grid)?;
    Ok(cross_entropy_diagnostics(&p_psi.density, &p_rho.density)?.nats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::{build_model, min_wehrl_bound, DEFAULT_THERMAL_EPS};
    use crate::numerics::kl_divergence;
    use crate::states::{displace, fock_grid, random_state, squeezed_coherent, squeezed_fock};

    fn model(bq: f64, bp: f64) -> MeasurementModel {
        build_model(NoiseCovariance::new(bq, bp).unwrap(), DEFAULT_THERMAL_EPS).unwrap()
    }

    #[test]
    fn vacuum_husimi_is_standard_gaussian() {
        let m = model(0.5, 0.5);
        let v = squeezed_coherent(0.5, 0.0, 0.0, fock_grid(0.0, 0, 0.5, 512).unwrap()).unwrap();
        let rho = PureEnsemble::from(v);
        let grid = outcome_grid(&m, &rho, 65).unwrap();
        let h = husimi(&m, &rho, &grid).unwrap();
        let exact =
            Density2D::from_fn(grid, |x, y| (-(x * x + y * y) / 2.0).exp() / (2.0 * PI)).unwrap();
        assert!(h.density.sup_distance(&exact).unwrap() < 1e-6);
        assert!((h.density.max_value() - 1.0 / (2.0 * PI)).abs() < 1e-6);
    }

    #[test]
    fn gaussian_states_match_closed_form_on_both_paths() {
        for &(bq, bp, delta, x0, y0) in &[
            (0.5, 8.0, 0.125, 0.4, -0.3),
            (1.0, 1.0, 0.3, -0.5, 0.8),
            (2.0, 0.5, 1.7, 0.0, 0.2),
        ] {
            let m = model(bq, bp);
            let g = fock_grid(x0, 0, delta, 512).unwrap();
            let psi = squeezed_coherent(delta, x0, y0, g).unwrap();
            let rho = PureEnsemble::from(psi);
            let grid = outcome_grid(&m, &rho, 96).unwrap();
            let exact = husimi_gaussian_closed_form(&m.noise, delta, x0, y0, &grid).unwrap();
            let fast = husimi(&m, &rho, &grid).unwrap();
            let eigen = husimi_eigen(&m, &rho, &grid).unwrap();
            assert!(fast.density.sup_distance(&exact.density).unwrap() < 1e-6);
            assert!(eigen.density.sup_distance(&exact.density).unwrap() < 1e-6);
        }
    }

    #[test]
    fn eigen_and_smoothing_paths_agree_on_random_states() {
        let m = model(1.0, 2.0);
        let g = fock_grid(0.0, 5, 0.4, 512).unwrap();
        let rho = PureEnsemble::from(random_state(11, 6, 0.4, g).unwrap());
        let grid = outcome_grid(&m, &rho, 80).unwrap();
        let a = husimi(&m, &rho, &grid).unwrap();
        let b = husimi_eigen(&m, &rho, &grid).unwrap();
        assert!(a.density.sup_distance(&b.density).unwrap() < 1e-8);
    }

    #[test]
    fn closed_form_peaks_and_marginal() {
        let m = model(0.5, 8.0);
        let grid = Grid2D::new(
            Grid1D::covering(0.0, 0.625f64.sqrt(), 129).unwrap(),
            Grid1D::covering(0.0, 10f64.sqrt(), 129).unwrap(),
        );
        let h = husimi_gaussian_closed_form(&m.noise, 0.125, 0.0, 0.0, &grid).unwrap();
        assert!((h.density.values()[[64, 64]] - 1.0 / (5.0 * PI)).abs() < 1e-12);
        assert!((h.density.expectation(|x, _| x * x) - 0.625).abs() < 1e-4);

        let m = model(0.5, 0.5);
        let grid = Grid2D::new(
            Grid1D::covering(0.0, 1.0, 65).unwrap(),
            Grid1D::covering(0.0, 1.0, 65).unwrap(),
        );
        let h = husimi_gaussian_closed_form(&m.noise, 0.5, 0.0, 0.0, &grid).unwrap();
        assert!((h.density.values()[[32, 32]] - 1.0 / (2.0 * PI)).abs() < 1e-12);
    }

    #[test]
    fn displacement_covariance() {
        let m = model(0.5, 8.0);
        let g = Grid1D::new(0.0, 14.0, 1024).unwrap();
        let psi = random_state(5, 4, 0.3, g).unwrap();
        let moved = displace(&psi, 1.25, -0.75).unwrap();
        let rho = PureEnsemble::from(psi);
        let grid = outcome_grid(&m, &rho, 96).unwrap();
        let a = husimi(&m, &rho, &grid).unwrap();
        let b = husimi(&m, &PureEnsemble::from(moved), &grid.shifted(1.25, -0.75)).unwrap();
        let diff = a
            .density
            .values()
            .iter()
            .zip(b.density.values())
            .map(|(u, v)| (u - v).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-8, "{diff}");
    }

    #[test]
    fn sup_bound_and_moment_identities() {
        let m = model(1.0, 1.0);
        let g = fock_grid(0.0, 7, 0.5, 512).unwrap();
        for seed in 0..5 {
            let rho = PureEnsemble::from(random_state(seed, 8, 0.5, g).unwrap());
            let grid = outcome_grid(&m, &rho, 128).unwrap();
            let h = husimi(&m, &rho, &grid).unwrap();
            assert!(h.density.max_value() <= m.top_weight() / (2.0 * PI) + 1e-9);
            let mom = rho.second_moments();
            assert!((h.density.mass() - 1.0).abs() < 1e-5);
            let x2 = h.density.expectation(|x, _| x * x);
            let y2 = h.density.expectation(|_, y| y * y);
            assert!(((x2 - mom.q2 - 1.0) / (mom.q2 + 1.0)).abs() < 1e-4);
            assert!(((y2 - mom.p2 - 1.0) / (mom.p2 + 1.0)).abs() < 1e-4);
        }
    }

    #[test]
    fn wehrl_entropy_of_minimizers() {
        let m = model(0.5, 0.5);
        let rho = PureEnsemble::from(
            squeezed_coherent(0.5, 0.3, -0.2, fock_grid(0.3, 0, 0.5, 512).unwrap()).unwrap(),
        );
        let grid = outcome_grid(&m, &rho, 128).unwrap();
        assert!((wehrl_entropy(&m, &rho, &grid).unwrap() - min_wehrl_bound(&m.noise)).abs() < 1e-3);

        let m = model(0.5, 8.0);
        let rho = PureEnsemble::from(
            squeezed_coherent(0.125, 0.0, 0.0, fock_grid(0.0, 0, 0.125, 512).unwrap()).unwrap(),
        );
        let grid = outcome_grid(&m, &rho, 128).unwrap();
        let h = wehrl_entropy(&m, &rho, &grid).unwrap();
        assert!((h - (5.0 * PI * std::f64::consts::E).ln()).abs() < 1e-3);

        let rho = PureEnsemble::from(
            squeezed_fock(1, 0.125, fock_grid(0.0, 1, 0.125, 512).unwrap()).unwrap(),
        );
        let grid = outcome_grid(&m, &rho, 128).unwrap();
        let h1 = wehrl_entropy(&m, &rho, &grid).unwrap();
        assert!(h1 - min_wehrl_bound(&m.noise) > 0.05, "{h1}");
    }

    #[test]
    fn cross_entropy_identities() {
        let m = model(0.5, 0.5);
        let g = fock_grid(0.0, 5, 0.5, 512).unwrap();
        let psi = random_state(2, 6, 0.5, g).unwrap();
        let rho = PureEnsemble::from(random_state(3, 3, 0.5, g).unwrap());
        let pure = PureEnsemble::from(psi.clone());
        let grid = outcome_grid_for(&m, &[&pure, &rho], 128).unwrap();
        let h = wehrl_entropy(&m, &pure, &grid).unwrap();
        assert!((cross_entropy(&m, &psi, &pure, &grid).unwrap() - h).abs() < 1e-8);
        let kl = kl_divergence(
            &husimi(&m, &pure, &grid).unwrap().density,
            &husimi(&m, &rho, &grid).unwrap().density,
        )
        .unwrap();
        let ce = cross_entropy(&m, &psi, &rho, &grid).unwrap();
        assert!((ce - h - kl).abs() < 1e-8);
        assert!(ce >= h - 1e-8);
    }
}
