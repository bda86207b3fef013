//! Classical capacity of noisy heterodyne measurement channels under an
//! oscillator energy constraint.
//!
//! The crate computes closed-form capacities and the optimal Gaussian
//! encodings on both sides of the energy threshold, evaluates generalized
//! Husimi densities and Wehrl entropies of arbitrary pure-state mixtures,
//! and certifies the entropy inequalities behind optimality numerically.
//! A Blahut–Arimoto and Monte Carlo oracle cross-checks the closed forms
//! without reusing them. All information quantities are in nats.

pub mod capacity;
pub mod error;
pub mod measurement;
pub mod numerics;
pub mod oracle;
pub mod states;
pub mod verify;

pub use error::{Error, Result};
