//! Single-photon temporal wavepackets.
//!
//! A shape is a normalized complex amplitude f(tau) with
//! `integral |f(tau)|^2 dtau = 1`. Three analytic families are provided,
//! all normalized by construction:
//!
//! * exponential decay (ED):
//!   `f(tau) = sqrt(G) exp(-i (D - iG) tau / 2)` for `tau >= start`, 0 before,
//!   with linewidth `G` and detuning `D`;
//! * exponentially damped sine (ED sine):
//!   `f(tau) = sqrt(G (4 w^2 + G^2) / (2 w^2)) exp(-G tau / 2) sin(w tau)`
//!   for `tau >= start`, 0 before;
//! * Gaussian: `f(tau) = sqrt(G / sqrt(pi)) exp(-(tau - tau0)^2 G^2 / 2)`.
//!
//! The `start` parameter shifts the emission origin: the displayed formulas
//! apply with `tau` replaced by `tau - start`, which keeps every member of
//! the family unit-norm. Sampled shapes hold explicit values on a
//! [`TimeGrid`] and are renormalized under trapezoid quadrature when built.

use num_complex::Complex64 as C64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::grid::{quad_inner, quad_norm_sq, TimeGrid};

/// Sampling aborts when the grid captures less than this fraction of the
/// shape's norm; silently truncated tails would corrupt every downstream
/// probability.
pub const COVERAGE_HARD_LIMIT: f64 = 0.99;

/// Captured norm below `1 - COVERAGE_WARN_DEFICIT` logs a warning.
pub const COVERAGE_WARN_DEFICIT: f64 = 1e-6;

/// A single-photon temporal shape, analytic or sampled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TemporalShape {
    ExpDecay {
        gamma: f64,
        detuning: f64,
        #[serde(default)]
        start: f64,
    },
    ExpDecaySine {
        gamma: f64,
        omega: f64,
        #[serde(default)]
        start: f64,
    },
    Gaussian {
        gamma: f64,
        #[serde(default)]
        tau0: f64,
    },
    Sampled(SampledShape),
}

impl TemporalShape {
    /// Exponentially decaying wavepacket with linewidth `gamma`, detuning
    /// `detuning` and emission origin `start`.
    pub fn exp_decay(gamma: f64, detuning: f64, start: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "exp_decay linewidth must be positive, got {gamma}"
            )));
        }
        if !detuning.is_finite() || !start.is_finite() {
            return Err(Error::InvalidParameter("exp_decay parameters must be finite".into()));
        }
        Ok(Self::ExpDecay { gamma, detuning, start })
    }

    /// Exponentially damped sine with linewidth `gamma` and oscillation
    /// frequency `omega` (nonzero; the sign only flips the global sign).
    pub fn exp_decay_sine(gamma: f64, omega: f64, start: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "exp_decay_sine linewidth must be positive, got {gamma}"
            )));
        }
        if omega == 0.0 || !omega.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "exp_decay_sine frequency must be nonzero, got {omega}"
            )));
        }
        if !start.is_finite() {
            return Err(Error::InvalidParameter("exp_decay_sine start must be finite".into()));
        }
        Ok(Self::ExpDecaySine { gamma, omega, start })
    }

    /// Gaussian wavepacket with spectral width `gamma` centered at `tau0`.
    pub fn gaussian(gamma: f64, tau0: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "gaussian width must be positive, got {gamma}"
            )));
        }
        if !tau0.is_finite() {
            return Err(Error::InvalidParameter("gaussian delay must be finite".into()));
        }
        Ok(Self::Gaussian { gamma, tau0 })
    }

    /// Evaluate the amplitude at time `tau`. Pre-origin regions return 0;
    /// sampled shapes interpolate linearly inside their grid and return 0
    /// outside it.
    pub fn eval(&self, tau: f64) -> C64 {
        match *self {
            Self::ExpDecay { gamma, detuning, start } => {
                let dt = tau - start;
                if dt < 0.0 {
                    C64::new(0.0, 0.0)
                } else {
                    // -i (detuning - i gamma) dt / 2 = -gamma dt/2 - i detuning dt/2
                    gamma.sqrt() * C64::new(-0.5 * gamma * dt, -0.5 * detuning * dt).exp()
                }
            }
            Self::ExpDecaySine { gamma, omega, start } => {
                let dt = tau - start;
                if dt < 0.0 {
                    C64::new(0.0, 0.0)
                } else {
                    let amp =
                        (gamma * (4.0 * omega * omega + gamma * gamma) / (2.0 * omega * omega))
                            .sqrt();
                    C64::new(amp * (-0.5 * gamma * dt).exp() * (omega * dt).sin(), 0.0)
                }
            }
            Self::Gaussian { gamma, tau0 } => {
                let d = tau - tau0;
                let amp = (gamma / std::f64::consts::PI.sqrt()).sqrt();
                C64::new(amp * (-0.5 * d * d * gamma * gamma).exp(), 0.0)
            }
            Self::Sampled(ref s) => s.eval(tau),
        }
    }

    /// Sample onto `grid` and renormalize so the trapezoid-quadrature norm
    /// is exactly 1.
    ///
    /// Fails with [`Error::Coverage`] when the window captures less than
    /// [`COVERAGE_HARD_LIMIT`] of the shape's norm; captures below
    /// `1 - 1e-6` only log a warning.
    pub fn sample(&self, grid: &TimeGrid) -> Result<SampledShape> {
        self.sample_with_captured(grid).map(|(s, _)| s)
    }

    /// Like [`sample`](Self::sample), also returning the captured norm
    /// before renormalization. Scalar amplitudes evaluated off-grid must be
    /// divided by `captured.sqrt()` to stay consistent with the renormalized
    /// samples.
    pub fn sample_with_captured(&self, grid: &TimeGrid) -> Result<(SampledShape, f64)> {
        let values: Vec<C64> = grid.points().iter().map(|&t| self.eval(t)).collect();
        let captured = quad_norm_sq(grid, &values);
        if captured < COVERAGE_HARD_LIMIT {
            return Err(Error::Coverage { captured, required: COVERAGE_HARD_LIMIT });
        }
        if captured < 1.0 - COVERAGE_WARN_DEFICIT {
            log::warn!(
                "grid [{}, {}] x {} captures only {:.9} of the shape norm",
                grid.t_min(),
                grid.t_max(),
                grid.n_points(),
                captured
            );
        }
        Ok((SampledShape::new(*grid, values)?, captured))
    }

    /// Parse a shape specification from JSON, e.g.
    /// `{"kind": "exp_decay", "gamma": 1.0, "detuning": 8.0}`.
    pub fn from_json(s: &str) -> Result<Self> {
        let shape: Self = serde_json::from_str(s)
            .map_err(|e| Error::InvalidParameter(format!("bad shape JSON: {e}")))?;
        shape.validate()?;
        Ok(shape)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("shape serialization cannot fail")
    }

    /// Re-check the constructor invariants (used after deserialization).
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::ExpDecay { gamma, detuning, start } => {
                Self::exp_decay(gamma, detuning, start).map(|_| ())
            }
            Self::ExpDecaySine { gamma, omega, start } => {
                Self::exp_decay_sine(gamma, omega, start).map(|_| ())
            }
            Self::Gaussian { gamma, tau0 } => Self::gaussian(gamma, tau0).map(|_| ()),
            Self::Sampled(_) => Ok(()), // normalized on construction
        }
    }
}

impl From<SampledShape> for TemporalShape {
    fn from(s: SampledShape) -> Self {
        Self::Sampled(s)
    }
}

/// A shape given by explicit complex values on a grid, renormalized on
/// construction so the trapezoid-quadrature norm is exactly 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledShape {
    grid: TimeGrid,
    values: Vec<C64>,
}

impl SampledShape {
    pub fn new(grid: TimeGrid, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::InvalidParameter(format!(
                "sampled shape has {} values for a {}-point grid",
                values.len(),
                grid.n_points()
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::InvalidParameter("sampled values must be finite".into()));
        }
        let norm_sq = quad_norm_sq(&grid, &values);
        if norm_sq <= 0.0 {
            return Err(Error::InvalidParameter(
                "sampled shape has zero norm and cannot be normalized".into(),
            ));
        }
        // skip the no-op rescale so already-normalized values (e.g. from a
        // serialization round trip) survive bit-exactly
        let values = if (norm_sq - 1.0).abs() > 4.0 * f64::EPSILON {
            let scale = 1.0 / norm_sq.sqrt();
            values.into_iter().map(|v| v * scale).collect()
        } else {
            values
        };
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    /// Linear interpolation inside the grid window, 0 outside.
    pub fn eval(&self, tau: f64) -> C64 {
        if !self.grid.contains(tau) {
            return C64::new(0.0, 0.0);
        }
        let x = (tau - self.grid.t_min()) / self.grid.spacing();
        let i = (x.floor() as usize).min(self.grid.n_points() - 2);
        let frac = x - i as f64;
        self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
    }

    pub fn quad_norm_sq(&self) -> f64 {
        quad_norm_sq(&self.grid, &self.values)
    }
}

// Serialized as {"grid": {...}, "values": [[re, im], ...]}; deserialization
// goes through `new` so stored values are always normalized.
impl Serialize for SampledShape {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Raw<'a> {
            grid: &'a TimeGrid,
            values: Vec<[f64; 2]>,
        }
        Raw {
            grid: &self.grid,
            values: self.values.iter().map(|v| [v.re, v.im]).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SampledShape {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            grid: TimeGrid,
            values: Vec<[f64; 2]>,
        }
        let raw = Raw::deserialize(deserializer)?;
        let grid = TimeGrid::new(raw.grid.t_min(), raw.grid.t_max(), raw.grid.n_points())
            .map_err(D::Error::custom)?;
        let values = raw.values.iter().map(|&[re, im]| C64::new(re, im)).collect();
        Self::new(grid, values).map_err(D::Error::custom)
    }
}

/// Temporal indistinguishability factor `J = integral f1(tau) f2*(tau) dtau`
/// evaluated by trapezoid quadrature on `grid`.
///
/// `|J| = 1` means identical photons, `|J| = 0` fully distinguishable ones.
pub fn overlap_j(f1: &TemporalShape, f2: &TemporalShape, grid: &TimeGrid) -> Result<C64> {
    let s1 = f1.sample(grid)?;
    let s2 = f2.sample(grid)?;
    Ok(quad_inner(grid, s1.values(), s2.values()))
}
