//! Lossless beam-splitter scattering of a two-photon input state.
//!
//! The splitter is the real orthogonal matrix [[t, r], [-r, t]] with
//! `t^2 + r^2 = 1`. Sending one photon of shape f1 into port 1 and one of
//! shape f2 into port 2 produces the three outcomes |2,0>, |1,1> and |0,2>
//! with probabilities
//!
//! ```text
//! P20 = P02 = t^2 r^2 (1 + |J|^2),    P11 = t^4 + r^4 - 2 t^2 r^2 |J|^2,
//! ```
//!
//! where J is the overlap of the input shapes. Each outcome carries a
//! normalized joint temporal amplitude F(tau1, tau2) built from the
//! coherent superposition of products of the input shapes.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::waveforms::{SampledShape, TemporalShape};

/// Outcome probabilities below this are treated as degenerate: normalizing
/// the joint amplitude there only amplifies quadrature noise.
pub const DEGENERATE_PROB_EPS: f64 = 1e-12;

/// A lossless two-port beam splitter with real transmission `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamSplitter {
    t: f64,
}

impl BeamSplitter {
    pub fn new(t: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&t) || !t.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "transmission coefficient must lie in [0, 1], got {t}"
            )));
        }
        Ok(Self { t })
    }

    /// Build from the transmission probability `t^2`.
    pub fn from_t_sq(t_sq: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&t_sq) || !t_sq.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "transmission t^2 must lie in [0, 1], got {t_sq}"
            )));
        }
        Ok(Self { t: t_sq.sqrt() })
    }

    pub fn transmission(&self) -> f64 {
        self.t
    }

    /// Reflection coefficient, derived so that `t^2 + r^2 = 1` exactly.
    pub fn reflection(&self) -> f64 {
        (1.0 - self.t * self.t).sqrt()
    }

    pub fn t_sq(&self) -> f64 {
        self.t * self.t
    }

    pub fn r_sq(&self) -> f64 {
        1.0 - self.t * self.t
    }

    /// Pathway indistinguishability `P = t^2 - r^2`: 0 for a balanced
    /// splitter (fully indistinguishable two-photon pathways), +-1 for a
    /// fully transmitting/reflecting one.
    pub fn path_indistinguishability(&self) -> f64 {
        self.t_sq() - self.r_sq()
    }
}

/// Post-splitter photon-number outcome |m, 2-m> (m photons in port 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    #[serde(rename = "20")]
    Out20,
    #[serde(rename = "11")]
    Out11,
    #[serde(rename = "02")]
    Out02,
}

impl Outcome {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "20" | "2,0" => Ok(Self::Out20),
            "11" | "1,1" => Ok(Self::Out11),
            "02" | "0,2" => Ok(Self::Out02),
            other => Err(Error::InvalidParameter(format!(
                "unknown outcome {other:?}; expected one of 20, 11, 02"
            ))),
        }
    }
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Out20 => write!(f, "|2,0>"),
            Self::Out11 => write!(f, "|1,1>"),
            Self::Out02 => write!(f, "|0,2>"),
        }
    }
}

/// The three outcome probabilities; they close to 1 and `p20 == p02`
/// exactly by construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeProbabilities {
    pub p20: f64,
    pub p11: f64,
    pub p02: f64,
}

impl OutcomeProbabilities {
    /// Probabilities from the overlap magnitude `|J|` and the splitter.
    pub fn from_overlap(j_abs: f64, bs: &BeamSplitter) -> Self {
        let (t2, r2) = (bs.t_sq(), bs.r_sq());
        let j2 = j_abs * j_abs;
        let p20 = t2 * r2 * (1.0 + j2);
        Self { p20, p11: t2 * t2 + r2 * r2 - 2.0 * t2 * r2 * j2, p02: p20 }
    }

    pub fn get(&self, outcome: Outcome) -> f64 {
        match outcome {
            Outcome::Out20 => self.p20,
            Outcome::Out11 => self.p11,
            Outcome::Out02 => self.p02,
        }
    }

    pub fn sum(&self) -> f64 {
        self.p20 + self.p11 + self.p02
    }
}

/// Compute `|J|` on the grid and apply the outcome-probability formulas.
pub fn outcome_probabilities(
    f1: &TemporalShape,
    f2: &TemporalShape,
    bs: &BeamSplitter,
    grid: &TimeGrid,
) -> Result<OutcomeProbabilities> {
    let j = crate::waveforms::overlap_j(f1, f2, grid)?;
    Ok(OutcomeProbabilities::from_overlap(j.norm(), bs))
}

/// Normalized two-photon joint temporal amplitude of one outcome,
/// discretized as `values[[i, j]] = F(tau_i, tau_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPhotonAmplitude {
    pub outcome: Outcome,
    pub grid: TimeGrid,
    pub values: Array2<C64>,
}

impl TwoPhotonAmplitude {
    /// Double trapezoid quadrature of `|F|^2`; 1 for a valid amplitude.
    pub fn quad_norm_sq(&self) -> f64 {
        let w = self.grid.trapezoid_weights();
        let n = self.grid.n_points();
        let mut acc = 0.0;
        for i in 0..n {
            let mut row = 0.0;
            for j in 0..n {
                row += self.values[[i, j]].norm_sqr() * w[j];
            }
            acc += row * w[i];
        }
        acc
    }
}

// Per-outcome coefficients (c1, c2) of the unnormalized numerator
// c1 f1(t1) f2(t2) + c2 f2(t1) f1(t2), chosen so its squared quadrature
// norm equals the outcome probability. For the same-port outcomes this
// includes the 1/sqrt(2) bosonic double-counting factor, which also makes
// the normalized |F| unit-norm on the full (tau1, tau2) plane.
fn numerator_coefficients(bs: &BeamSplitter, outcome: Outcome) -> (f64, f64) {
    let rt = bs.reflection() * bs.transmission();
    let c = rt / std::f64::consts::SQRT_2;
    match outcome {
        Outcome::Out20 => (c, c),
        Outcome::Out11 => (bs.t_sq(), -bs.r_sq()),
        Outcome::Out02 => (-c, -c),
    }
}

/// Normalized joint amplitude of `outcome` on `grid`.
///
/// Errors with [`Error::DegenerateOutcome`] when the outcome probability is
/// numerically zero (e.g. |1,1> for identical photons on a balanced
/// splitter).
pub fn joint_amplitude(
    f1: &TemporalShape,
    f2: &TemporalShape,
    bs: &BeamSplitter,
    outcome: Outcome,
    grid: &TimeGrid,
) -> Result<TwoPhotonAmplitude> {
    let s1 = f1.sample(grid)?;
    let s2 = f2.sample(grid)?;
    let j = crate::grid::quad_inner(grid, s1.values(), s2.values());
    let p = OutcomeProbabilities::from_overlap(j.norm(), bs).get(outcome);
    if p <= DEGENERATE_PROB_EPS {
        return Err(Error::DegenerateOutcome { outcome, probability: p });
    }
    let inv = 1.0 / p.sqrt();
    let (c1, c2) = numerator_coefficients(bs, outcome);
    let values = joint_matrix(&s1, &s2, c1 * inv, c2 * inv);
    Ok(TwoPhotonAmplitude { outcome, grid: *grid, values })
}

/// Dense matrix `c1 f1(t_i) f2(t_j) + c2 f2(t_i) f1(t_j)`, rows built in
/// parallel.
pub(crate) fn joint_matrix(s1: &SampledShape, s2: &SampledShape, c1: f64, c2: f64) -> Array2<C64> {
    use rayon::prelude::*;
    let n = s1.grid().n_points();
    let (a, b) = (s1.values(), s2.values());
    let mut values = Array2::from_elem((n, n), C64::new(0.0, 0.0));
    values
        .outer_iter_mut()
        .into_par_iter()
        .enumerate()
        .for_each(|(i, mut row)| {
            let (ai, bi) = (a[i], b[i]);
            for j in 0..n {
                row[j] = c1 * ai * b[j] + c2 * bi * a[j];
            }
        });
    values
}
