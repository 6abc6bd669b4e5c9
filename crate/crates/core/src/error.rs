//! Error types shared across the crate.

use thiserror::Error;

use crate::beamsplitter::Outcome;

#[derive(Debug, Error)]
pub enum Error {
    /// A shape's grid window captures too little of its norm to be trusted.
    #[error("grid coverage too low: captured norm {captured:.6} < {required}")]
    Coverage { captured: f64, required: f64 },

    /// The requested outcome has (numerically) zero probability, so its
    /// normalized joint amplitude is undefined.
    #[error("outcome {outcome} has vanishing probability ({probability:.3e})")]
    DegenerateOutcome { outcome: Outcome, probability: f64 },

    /// No photon can be detected at the requested time.
    #[error("herald at t_dec = {t_dec} is impossible (weight {weight:.3e})")]
    ImpossibleHerald { t_dec: f64, weight: f64 },

    /// Schmidt coefficients do not square-sum to one.
    #[error("coefficients are not normalized: sum of squares = {sum_sq}")]
    Normalization { sum_sq: f64 },

    /// Every optimizer starting point failed to produce a heraldable state.
    #[error("no feasible starting point for the shaping optimization")]
    NoFeasibleStart,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A numerical routine (e.g. the SVD) failed to converge.
    #[error("computation failed: {0}")]
    Computation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
