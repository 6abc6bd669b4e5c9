//! Two-photon wavepacket interference through a lossless beam splitter:
//! outcome probabilities, temporal entanglement of every output component,
//! and heralded single-photon temporal shaping.
//!
//! The building blocks follow the physics pipeline:
//!
//! * [`waveforms`] — normalized single-photon temporal shapes and their
//!   overlap (indistinguishability) integral;
//! * [`beamsplitter`] — outcome probabilities and normalized joint
//!   temporal amplitudes after the splitter;
//! * [`entanglement`] — Schmidt coefficients (closed form and numerical
//!   SVD) and Von Neumann entropy of each output component;
//! * [`shaping`] — conditional single-photon shapes from time-resolved
//!   detection, shaping fidelity, finite detector resolution, and
//!   derivative-free fidelity optimization;
//! * [`optim`] — the bounded simplex machinery behind the optimizer.
//!
//! Everything is pure and thread-safe; all quantities are dimensionless
//! with times measured in reciprocal linewidths.

pub mod beamsplitter;
pub mod entanglement;
pub mod error;
pub mod grid;
pub mod optim;
pub mod shaping;
pub mod waveforms;

pub use beamsplitter::{
    joint_amplitude, outcome_probabilities, BeamSplitter, Outcome, OutcomeProbabilities,
    TwoPhotonAmplitude,
};
pub use entanglement::{
    entropy_surface, mode_overlap_matrix, schmidt_analytic, schmidt_numeric, von_neumann_entropy,
    EntanglementReport, SchmidtDecomposition, SurfaceCell,
};
pub use error::{Error, Result};
pub use grid::TimeGrid;
pub use num_complex::Complex64;
pub use shaping::{
    ed_to_edsine_closed_form, herald_shape, herald_windowed, optimize_shaping, shaping_fidelity,
    HeraldComponent, HeraldResult, HeraldSpec, InputFamily, OptimizeOutcome, OptimizerConfig,
    ShapingCandidate, ShapingProblem,
};
pub use waveforms::{overlap_j, SampledShape, TemporalShape};
