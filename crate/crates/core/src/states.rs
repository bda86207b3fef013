//! Single-mode pure states sampled on a position grid.
//!
//! Units have ħ = 1, so `[q, p] = i` and `p = -i d/dq`. The squeeze
//! parameter `delta` is always the position variance of the squeezed
//! vacuum `|0⟩_δ`, whose momentum variance is `1/(4δ)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::numerics::{spectral, Grid1D};

/// Highest Fock index accepted by the constructors.
pub const DEFAULT_FOCK_CUTOFF: usize = 64;

/// Default number of position nodes.
pub const DEFAULT_WAVE_POINTS: usize = 1024;

/// Largest `|ψ|²` tolerated at either end of the grid.
pub const BOUNDARY_DECAY_TOL: f64 = 1e-10;

/// Tolerance on `‖ψ‖² = 1`.
pub const NORM_TOL: f64 = 1e-8;

/// Extra room, in units of the ground-state length `√(2δ)`, beyond the
/// outermost classical turning point of a Fock mode.
const TAIL_ROOM: f64 = 6.0;

/// A pure state `ψ(q)` sampled on a uniform position grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    grid: Grid1D,
    amps: Vec<Complex64>,
}

impl WaveFunction {
    pub fn new(grid: Grid1D, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} amplitudes on a {}-point grid",
                amps.len(),
                grid.len()
            )));
        }
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::InvalidParameter("non-finite amplitude".into()));
        }
        Ok(Self { grid, amps })
    }

    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        let amps = grid.coords().into_iter().map(f).collect();
        Self::new(grid, amps)
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn amps(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.grid.step()
    }

    pub fn normalized(mut self) -> Result<Self> {
        let n = self.norm_sqr();
        if n.is_nan() || n <= 0.0 {
            return Err(Error::InvalidParameter(
                "cannot normalise the zero vector".into(),
            ));
        }
        let s = 1.0 / n.sqrt();
        self.amps.iter_mut().for_each(|a| *a *= s);
        Ok(self)
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &WaveFunction) -> Result<Complex64> {
        if !self.grid.same_nodes(&other.grid) {
            return Err(Error::GridMismatch(
                "inner product of states on different grids".into(),
            ));
        }
        let s: Complex64 = self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum();
        Ok(s * self.grid.step())
    }

    /// `|⟨self|other⟩|²`.
    pub fn fidelity(&self, other: &WaveFunction) -> Result<f64> {
        self.inner(other).map(|z| z.norm_sqr())
    }

    pub fn boundary_density(&self) -> f64 {
        let n = self.amps.len();
        self.amps[0].norm_sqr().max(self.amps[n - 1].norm_sqr())
    }

    pub fn check_decay(&self) -> Result<()> {
        let density = self.boundary_density();
        if density < BOUNDARY_DECAY_TOL {
            Ok(())
        } else {
            Err(Error::BoundaryDecay { density })
        }
    }

    pub fn scaled(&self, factor: Complex64) -> WaveFunction {
        Self {
            grid: self.grid,
            amps: self.amps.iter().map(|a| a * factor).collect(),
        }
    }

    /// Pointwise linear combination `self + factor * other` on a shared grid.
    pub fn add_scaled(&self, factor: Complex64, other: &WaveFunction) -> Result<WaveFunction> {
        if !self.grid.same_nodes(&other.grid) {
            return Err(Error::GridMismatch(
                "sum of states on different grids".into(),
            ));
        }
        let amps = self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a + factor * b)
            .collect();
        Ok(Self {
            grid: self.grid,
            amps,
        })
    }

    /// Fourth-order central difference `ψ'`; samples beyond the grid count as zero.
    pub fn derivative(&self) -> Vec<Complex64> {
        let h = self.grid.step();
        let a = |i: isize| self.sample(i);
        (0..self.amps.len() as isize)
            .map(|i| (-a(i + 2) + 8.0 * a(i + 1) - 8.0 * a(i - 1) + a(i - 2)) / (12.0 * h))
            .collect()
    }

    /// Fourth-order central difference `ψ''`.
    pub fn second_derivative(&self) -> Vec<Complex64> {
        let h = self.grid.step();
        let a = |i: isize| self.sample(i);
        (0..self.amps.len() as isize)
            .map(|i| {
                (-a(i + 2) + 16.0 * a(i + 1) - 30.0 * a(i) + 16.0 * a(i - 1) - a(i - 2))
                    / (12.0 * h * h)
            })
            .collect()
    }

    fn sample(&self, i: isize) -> Complex64 {
        if i < 0 || i as usize >= self.amps.len() {
            Complex64::new(0.0, 0.0)
        } else {
            self.amps[i as usize]
        }
    }

    /// `(⟨q⟩, ⟨p⟩)`.
    pub fn means(&self) -> (f64, f64) {
        let h = self.grid.step();
        let q = self
            .grid
            .coords()
            .iter()
            .zip(&self.amps)
            .map(|(q, a)| q * a.norm_sqr())
            .sum::<f64>()
            * h;
        let d = self.derivative();
        let p = self
            .amps
            .iter()
            .zip(&d)
            .map(|(a, da)| (a.conj() * da).im)
            .sum::<f64>()
            * h;
        (q, p)
    }
}

/// Raw second moments `⟨q²⟩` and `⟨p²⟩` (not centred).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondMoments {
    pub q2: f64,
    pub p2: f64,
}

/// `q2 = ∫ q² |ψ|²` and `p2 = ∫ |ψ'|²`, the latter by fourth-order differences.
pub fn second_moments(psi: &WaveFunction) -> SecondMoments {
    let h = psi.grid.step();
    let q2 = psi
        .grid
        .coords()
        .iter()
        .zip(&psi.amps)
        .map(|(q, a)| q * q * a.norm_sqr())
        .sum::<f64>()
        * h;
    let p2 = psi.derivative().iter().map(|d| d.norm_sqr()).sum::<f64>() * h;
    SecondMoments { q2, p2 }
}

/// `∫ |ψ'|²` from the Fourier spectrum; independent of the finite-difference path.
pub fn momentum_second_moment_spectral(psi: &WaveFunction) -> f64 {
    spectral::gradient_energy(&psi.amps, psi.grid.step())
}

/// Normalised Hermite functions `h_0(u) .. h_nmax(u)` by the three-term recurrence.
pub fn hermite_functions(nmax: usize, u: f64, out: &mut Vec<f64>) {
    out.clear();
    let h0 = PI.powf(-0.25) * (-0.5 * u * u).exp();
    out.push(h0);
    if nmax == 0 {
        return;
    }
    out.push(2f64.sqrt() * u * h0);
    for n in 1..nmax {
        let nf = n as f64;
        let next = (2.0 / (nf + 1.0)).sqrt() * u * out[n] - (nf / (nf + 1.0)).sqrt() * out[n - 1];
        out.push(next);
    }
}

/// Real amplitude of the squeezed vacuum `|0⟩_δ` at `q`.
pub fn squeezed_vacuum_amplitude(delta: f64, q: f64) -> f64 {
    (2.0 * PI * delta).powf(-0.25) * (-q * q / (4.0 * delta)).exp()
}

/// Position grid centred on `center` wide enough for Fock modes `0..=nmax` of squeeze `delta`.
pub fn fock_grid(center: f64, nmax: usize, delta: f64, points: usize) -> Result<Grid1D> {
    ensure_positive("delta", delta)?;
    let half = (2.0 * delta).sqrt() * ((2.0 * nmax as f64 + 1.0).sqrt() + TAIL_ROOM);
    Grid1D::new(center, half, points)
}

fn check_fock_index(n: usize) -> Result<()> {
    if n > DEFAULT_FOCK_CUTOFF {
        return Err(Error::InvalidParameter(format!(
            "Fock index {n} exceeds cutoff {DEFAULT_FOCK_CUTOFF}"
        )));
    }
    Ok(())
}

/// `|x, y⟩_δ = D(x, y)|0⟩_δ`, evaluated in closed form.
pub fn squeezed_coherent(delta: f64, x: f64, y: f64, grid: Grid1D) -> Result<WaveFunction> {
    ensure_positive("delta", delta)?;
    ensure_finite("x", x)?;
    ensure_finite("y", y)?;
    let psi = WaveFunction::from_fn(grid, |q| {
        Complex64::from_polar(squeezed_vacuum_amplitude(delta, q - x), y * (q - 0.5 * x))
    })?;
    psi.check_decay()?;
    Ok(psi)
}

/// Squeezed Fock modes `0..=nmax`: `χ_n(q) = (2δ)^{-1/4} h_n(q / √(2δ))`.
pub fn squeezed_fock_family(nmax: usize, delta: f64, grid: Grid1D) -> Result<Vec<WaveFunction>> {
    ensure_positive("delta", delta)?;
    check_fock_index(nmax)?;
    let scale = (2.0 * delta).powf(-0.25);
    let inv_len = 1.0 / (2.0 * delta).sqrt();
    let mut columns = vec![Vec::with_capacity(grid.len()); nmax + 1];
    let mut h = Vec::with_capacity(nmax + 1);
    for q in grid.coords() {
        hermite_functions(nmax, q * inv_len, &mut h);
        for (col, v) in columns.iter_mut().zip(&h) {
            col.push(Complex64::new(scale * v, 0.0));
        }
    }
    columns
        .into_iter()
        .map(|amps| {
            let psi = WaveFunction::new(grid, amps)?;
            psi.check_decay()?;
            Ok(psi)
        })
        .collect()
}

/// The `n`-th squeezed Fock mode with ground-state position variance `delta`.
pub fn squeezed_fock(n: usize, delta: f64, grid: Grid1D) -> Result<WaveFunction> {
    let mut family = squeezed_fock_family(n, delta, grid)?;
    Ok(family.pop().expect("family has n + 1 members"))
}

/// `(D(x, y)ψ)(q) = exp(i y (q - x/2)) ψ(q - x)`, shifting spectrally.
pub fn displace(psi: &WaveFunction, x: f64, y: f64) -> Result<WaveFunction> {
    ensure_finite("x", x)?;
    ensure_finite("y", y)?;
    let grid = psi.grid;
    let shifted = if x == 0.0 {
        psi.amps.clone()
    } else {
        spectral::translate(&psi.amps, grid.step(), x)
    };
    let amps = grid
        .coords()
        .iter()
        .zip(shifted)
        .map(|(q, a)| a * Complex64::from_polar(1.0, y * (q - 0.5 * x)))
        .collect();
    let out = WaveFunction::new(grid, amps)?;
    out.check_decay()?;
    Ok(out)
}

/// Normalised random superposition of squeezed Fock modes `0..dim` with
/// i.i.d. complex Gaussian coefficients drawn from a seeded ChaCha stream.
pub fn random_state(seed: u64, dim: usize, delta: f64, grid: Grid1D) -> Result<WaveFunction> {
    if dim == 0 || dim > DEFAULT_FOCK_CUTOFF + 1 {
        return Err(Error::InvalidParameter(format!(
            "random state dimension {dim} out of range"
        )));
    }
    let family = squeezed_fock_family(dim - 1, delta, grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<Complex64> = (0..dim)
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re, im)
        })
        .collect();
    let mut amps = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (c, mode) in coeffs.iter().zip(&family) {
        for (a, m) in amps.iter_mut().zip(mode.amps()) {
            *a += c * m;
        }
    }
    WaveFunction::new(grid, amps)?.normalized()
}

/// A density operator realised as a finite mixture of pure states.
#[derive(Debug, Clone, PartialEq)]
pub struct PureEnsemble {
    members: Vec<(f64, WaveFunction)>,
}

impl PureEnsemble {
    pub fn new(members: Vec<(f64, WaveFunction)>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::InvalidParameter("empty ensemble".into()));
        }
        let total: f64 = members.iter().map(|(w, _)| w).sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidParameter(format!(
                "ensemble weights sum to {total}"
            )));
        }
        for (w, psi) in &members {
            ensure_positive("ensemble weight", *w)?;
            let n = psi.norm_sqr();
            if (n - 1.0).abs() > NORM_TOL {
                return Err(Error::InvalidParameter(format!(
                    "ensemble member has norm² {n}"
                )));
            }
        }
        Ok(Self { members })
    }

    pub fn pure(psi: WaveFunction) -> Result<Self> {
        Self::new(vec![(1.0, psi)])
    }

    pub fn members(&self) -> &[(f64, WaveFunction)] {
        &self.members
    }

    pub fn second_moments(&self) -> SecondMoments {
        self.members
            .iter()
            .fold(SecondMoments { q2: 0.0, p2: 0.0 }, |acc, (w, psi)| {
                let m = second_moments(psi);
                SecondMoments {
                    q2: acc.q2 + w * m.q2,
                    p2: acc.p2 + w * m.p2,
                }
            })
    }

    pub fn means(&self) -> (f64, f64) {
        self.members.iter().fold((0.0, 0.0), |acc, (w, psi)| {
            let (q, p) = psi.means();
            (acc.0 + w * q, acc.1 + w * p)
        })
    }
}

impl From<WaveFunction> for PureEnsemble {
    fn from(psi: WaveFunction) -> Self {
        Self {
            members: vec![(1.0, psi)],
        }
    }
}
