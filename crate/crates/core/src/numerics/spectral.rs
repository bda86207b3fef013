//! FFT helpers for uniformly sampled, rapidly decaying functions.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::{Array2, Axis};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plans(n: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        (p.plan_fft_forward(n), p.plan_fft_inverse(n))
    })
}

/// Angular frequency of FFT bin `m` for `n` samples spaced by `step`.
/// The Nyquist bin is reported as `None`.
fn angular_frequency(m: usize, n: usize, step: f64) -> Option<f64> {
    let signed = if m < n / 2 {
        m as f64
    } else if n.is_multiple_of(2) && m == n / 2 {
        return None;
    } else {
        m as f64 - n as f64
    };
    Some(2.0 * PI * signed / (n as f64 * step))
}

/// Multiplies the spectrum by `symbol(k)`; `nyquist` is used for the unpaired bin.
fn filter(
    values: &[Complex64],
    step: f64,
    symbol: impl Fn(f64) -> Complex64,
    nyquist: Complex64,
) -> Vec<Complex64> {
    let n = values.len();
    let (fwd, inv) = plans(n);
    let mut buf = values.to_vec();
    fwd.process(&mut buf);
    for (m, b) in buf.iter_mut().enumerate() {
        let factor = match angular_frequency(m, n, step) {
            Some(k) => symbol(k),
            None => nyquist,
        };
        *b *= factor / n as f64;
    }
    inv.process(&mut buf);
    buf
}

/// Spectral first derivative.
pub fn derivative(values: &[Complex64], step: f64) -> Vec<Complex64> {
    filter(
        values,
        step,
        |k| Complex64::new(0.0, k),
        Complex64::new(0.0, 0.0),
    )
}

/// Spectral second derivative.
pub fn second_derivative(values: &[Complex64], step: f64) -> Vec<Complex64> {
    let n = values.len();
    let k_nyq = PI / step;
    let nyq = if n.is_multiple_of(2) {
        Complex64::new(-k_nyq * k_nyq, 0.0)
    } else {
        Complex64::new(0.0, 0.0)
    };
    filter(values, step, |k| Complex64::new(-k * k, 0.0), nyq)
}

/// `f(q) -> f(q - shift)`; exact cyclic shift when `shift` is a multiple of `step`.
pub fn translate(values: &[Complex64], step: f64, shift: f64) -> Vec<Complex64> {
    let k_nyq = PI / step;
    filter(
        values,
        step,
        |k| Complex64::from_polar(1.0, -k * shift),
        Complex64::new((k_nyq * shift).cos(), 0.0),
    )
}

/// `∫ |f'|²` from the spectrum (Parseval), for samples spaced by `step`.
pub fn gradient_energy(values: &[Complex64], step: f64) -> f64 {
    let n = values.len();
    let (fwd, _) = plans(n);
    let mut buf = values.to_vec();
    fwd.process(&mut buf);
    let mut total = 0.0;
    for (m, b) in buf.iter().enumerate() {
        if let Some(k) = angular_frequency(m, n, step) {
            total += k * k * b.norm_sqr();
        }
    }
    total * step / n as f64
}

/// Convolves every lane along `axis` with a centred Gaussian of the given
/// variance, by zero-padded FFT multiplication with `exp(-variance k² / 2)`.
pub fn gaussian_blur(data: &mut Array2<f64>, axis: usize, variance: f64, step: f64) {
    if variance <= 0.0 {
        return;
    }
    let len = data.len_of(Axis(axis));
    let pad = (8.0 * variance.sqrt() / step).ceil() as usize + 1;
    let n = (len + 2 * pad).next_power_of_two();
    let (fwd, inv) = plans(n);
    let symbol: Vec<f64> = (0..n)
        .map(|m| {
            let k = angular_frequency(m, n, step).unwrap_or(PI / step);
            (-0.5 * variance * k * k).exp() / n as f64
        })
        .collect();
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for mut lane in data.lanes_mut(Axis(axis)) {
        buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
        for (b, v) in buf.iter_mut().zip(lane.iter()) {
            *b = Complex64::new(*v, 0.0);
        }
        fwd.process(&mut buf);
        for (b, s) in buf.iter_mut().zip(&symbol) {
            *b *= *s;
        }
        inv.process(&mut buf);
        for (v, b) in lane.iter_mut().zip(buf.iter()) {
            *v = b.re;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(n: usize, step: f64, mean: f64, var: f64) -> Vec<Complex64> {
        let lo = -(n as f64 - 1.0) * step / 2.0;
        (0..n)
            .map(|i| {
                let q = lo + i as f64 * step;
                Complex64::new((-(q - mean).powi(2) / (2.0 * var)).exp(), 0.0)
            })
            .collect()
    }

    #[test]
    fn translate_matches_analytic_shift() {
        let step = 0.05;
        let f = gaussian(512, step, 0.0, 1.0);
        let shifted = translate(&f, step, 0.731);
        let exact = gaussian(512, step, 0.731, 1.0);
        let err = shifted
            .iter()
            .zip(&exact)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn derivatives_of_gaussian() {
        let step = 0.05;
        let n = 512;
        let f = gaussian(n, step, 0.0, 1.0);
        let d1 = derivative(&f, step);
        let d2 = second_derivative(&f, step);
        let lo = -(n as f64 - 1.0) * step / 2.0;
        for i in (0..n).step_by(37) {
            let q = lo + i as f64 * step;
            let g = (-q * q / 2.0).exp();
            assert!((d1[i].re + q * g).abs() < 1e-10);
            assert!((d2[i].re - (q * q - 1.0) * g).abs() < 1e-10);
        }
        // ∫ (q e^{-q²/2})² dq = √π / 2
        assert!((gradient_energy(&f, step) - PI.sqrt() / 2.0).abs() < 1e-10);
    }

    #[test]
    fn blur_adds_variance() {
        let step = 0.05;
        let n = 400;
        let f = gaussian(n, step, 0.0, 0.5);
        let mut data = Array2::from_shape_fn((1, n), |(_, j)| f[j].re);
        gaussian_blur(&mut data, 1, 0.25, step);
        let exact = gaussian(n, step, 0.0, 0.75);
        let scale = (0.5f64 / 0.75).sqrt();
        for j in 0..n {
            assert!((data[[0, j]] - scale * exact[j].re).abs() < 1e-12);
        }
    }
}
