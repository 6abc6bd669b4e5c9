//! Uniform time grids and trapezoid quadrature.
//!
//! All integrals in this crate are evaluated with the composite trapezoid
//! rule on a uniform grid. Times are dimensionless (reciprocal linewidth
//! units), so a grid is fully described by its window and point count.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform discretization of a finite time window.
///
/// Invariants: `t_max > t_min` and `n_points >= 2`, so the spacing
/// `(t_max - t_min) / (n_points - 1)` is positive and constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t_min: f64,
    t_max: f64,
    n_points: usize,
}

impl TimeGrid {
    pub fn new(t_min: f64, t_max: f64, n_points: usize) -> Result<Self> {
        if !t_min.is_finite() || !t_max.is_finite() || t_max <= t_min {
            return Err(Error::InvalidParameter(format!(
                "time window [{t_min}, {t_max}] must be finite with t_max > t_min"
            )));
        }
        if n_points < 2 {
            return Err(Error::InvalidParameter(format!(
                "grid needs at least 2 points, got {n_points}"
            )));
        }
        Ok(Self { t_min, t_max, n_points })
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    /// Constant spacing between neighboring grid points.
    pub fn spacing(&self) -> f64 {
        (self.t_max - self.t_min) / (self.n_points - 1) as f64
    }

    /// The i-th grid point, `t_min + i * spacing`.
    pub fn point(&self, i: usize) -> f64 {
        debug_assert!(i < self.n_points);
        self.t_min + i as f64 * self.spacing()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.point(i)).collect()
    }

    /// Composite trapezoid weights: `spacing` everywhere except the two
    /// endpoints, which carry half weight.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let h = self.spacing();
        let mut w = vec![h; self.n_points];
        w[0] = 0.5 * h;
        w[self.n_points - 1] = 0.5 * h;
        w
    }

    /// A grid over the same window with the spacing halved (points nested).
    pub fn refined(&self) -> Self {
        Self {
            t_min: self.t_min,
            t_max: self.t_max,
            n_points: 2 * self.n_points - 1,
        }
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t_min && t <= self.t_max
    }

    /// Parse from JSON of the form `{"t_min": ..., "t_max": ..., "n_points": ...}`.
    pub fn from_json(s: &str) -> Result<Self> {
        let raw: Self = serde_json::from_str(s)
            .map_err(|e| Error::InvalidParameter(format!("bad grid JSON: {e}")))?;
        Self::new(raw.t_min, raw.t_max, raw.n_points)
    }
}

/// Trapezoid quadrature of `sum_i w_i a_i conj(b_i)`, the discrete inner
/// product matching the overlap convention `integral a(t) b*(t) dt`.
pub fn quad_inner(grid: &TimeGrid, a: &[C64], b: &[C64]) -> C64 {
    debug_assert_eq!(a.len(), grid.n_points());
    debug_assert_eq!(b.len(), grid.n_points());
    let w = grid.trapezoid_weights();
    a.iter()
        .zip(b)
        .zip(&w)
        .map(|((&ai, &bi), &wi)| ai * bi.conj() * wi)
        .sum()
}

/// Trapezoid quadrature of `sum_i w_i |a_i|^2`.
pub fn quad_norm_sq(grid: &TimeGrid, a: &[C64]) -> f64 {
    debug_assert_eq!(a.len(), grid.n_points());
    let w = grid.trapezoid_weights();
    a.iter().zip(&w).map(|(&ai, &wi)| ai.norm_sqr() * wi).sum()
}
