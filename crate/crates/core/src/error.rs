use thiserror::Error;

/// Errors raised by the capacity, measurement, and verification routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("noise covariance violates beta_q * beta_p >= 1/4: ({beta_q}, {beta_p})")]
    UncertaintyViolation { beta_q: f64, beta_p: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("wavefunction does not decay at the grid boundary (|psi|^2 = {density:.3e})")]
    BoundaryDecay { density: f64 },

    #[error("probability mass {mass:.9} deviates from 1 by more than {tolerance:.1e}")]
    MassDeficit { mass: f64, tolerance: f64 },

    #[error("support condition violated: p-mass {mass:.3e} sits where q is below the floor")]
    SupportViolation { mass: f64 },

    #[error("derivative cross-check failed: relative mismatch {mismatch:.3e}")]
    Resolution { mismatch: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("optimizer bracket failure: {0}")]
    Bracket(String),

    #[error("outcome grid does not cover the letters: row mass {mass:.9}")]
    Coverage { mass: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be positive and finite, got {value}"
        )))
    }
}

pub(crate) fn ensure_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be finite, got {value}"
        )))
    }
}
