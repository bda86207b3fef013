//! Grids, trapezoid quadrature, Gaussian smoothing, and classical
//! information functionals on two-dimensional densities.
//!
//! All logarithms are natural, so every entropy here is in nats.

mod density;
mod grid;
mod smoothing;
pub mod spectral;

pub use density::{
    cross_entropy_diagnostics, differential_entropy, integrate_2d, kl_divergence,
    kl_divergence_diagnostics, Density2D, KlDiagnostics, DEFAULT_MASS_TOL, LOG_FLOOR,
    SUPPORT_MASS_LIMIT,
};
pub use grid::{Grid1D, Grid2D, COVERAGE_SIGMAS, DEFAULT_DENSITY_POINTS, MIN_GRID_POINTS};
pub use smoothing::smooth_y;
