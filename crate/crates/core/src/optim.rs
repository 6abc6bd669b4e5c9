//! Bounded derivative-free maximization: Nelder-Mead simplex behind a
//! smooth bounds transform, plus Halton starting points.
//!
//! Box constraints are enforced by optimizing in an unconstrained space z
//! with `x = lo + (hi - lo) (sin z + 1) / 2` per coordinate, so the simplex
//! never needs clamping and the objective stays smooth at the box faces.

use crate::error::{Error, Result};

/// Smooth bijection-ish map between a box and unconstrained coordinates.
#[derive(Debug, Clone)]
pub struct BoundsTransform {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoundsTransform {
    pub fn new(bounds: &[(f64, f64)]) -> Result<Self> {
        for &(lo, hi) in bounds {
            if !lo.is_finite() || !hi.is_finite() || hi <= lo {
                return Err(Error::InvalidParameter(format!(
                    "bound ({lo}, {hi}) must be finite with hi > lo"
                )));
            }
        }
        Ok(Self {
            lo: bounds.iter().map(|b| b.0).collect(),
            hi: bounds.iter().map(|b| b.1).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn to_x(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(&zi, (&lo, &hi))| lo + (hi - lo) * (zi.sin() + 1.0) / 2.0)
            .collect()
    }

    pub fn to_z(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(&xi, (&lo, &hi))| (2.0 * (xi - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0).asin())
            .collect()
    }

    pub fn span(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(&lo, &hi)| hi - lo).collect()
    }
}

/// Result of one simplex run: best point (in z coordinates), its value, and
/// the number of objective evaluations used.
pub struct SimplexRun {
    pub z_best: Vec<f64>,
    pub f_best: f64,
    pub evaluations: usize,
}

/// Nelder-Mead minimization of `f` from `z0`, with the dimension-adaptive
/// expansion/contraction coefficients and a fixed evaluation cap.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    z0: &[f64],
    step: f64,
    max_eval: usize,
    ftol: f64,
    xtol: f64,
) -> SimplexRun {
    let n = z0.len();
    let nf = n as f64;
    let (alpha, gamma, rho, sigma) =
        (1.0, 1.0 + 2.0 / nf, 0.75 - 1.0 / (2.0 * nf), 1.0 - 1.0 / nf);

    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    pts.push(z0.to_vec());
    for i in 0..n {
        let mut zi = z0.to_vec();
        zi[i] += step;
        pts.push(zi);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| f(p)).collect();
    let mut evals = n + 1;

    while evals < max_eval {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();

        let spread = (vals[n] - vals[0]).abs();
        let width = (0..n)
            .map(|d| (pts[n][d] - pts[0][d]).abs())
            .fold(0.0f64, f64::max);
        if spread < ftol && width < xtol {
            break;
        }

        let mut centroid = vec![0.0; n];
        for p in pts.iter().take(n) {
            for d in 0..n {
                centroid[d] += p[d] / nf;
            }
        }
        let lerp = |from: &[f64], scale: f64| -> Vec<f64> {
            (0..n).map(|d| centroid[d] + scale * (from[d] - centroid[d])).collect()
        };

        let reflected = lerp(&pts[n], -alpha);
        let fr = f(&reflected);
        evals += 1;
        if vals[0] <= fr && fr < vals[n - 1] {
            pts[n] = reflected;
            vals[n] = fr;
        } else if fr < vals[0] {
            let expanded = lerp(&reflected, gamma);
            let fe = f(&expanded);
            evals += 1;
            if fe < fr {
                pts[n] = expanded;
                vals[n] = fe;
            } else {
                pts[n] = reflected;
                vals[n] = fr;
            }
        } else {
            let contracted = lerp(&pts[n], rho);
            let fc = f(&contracted);
            evals += 1;
            if fc < vals[n] {
                pts[n] = contracted;
                vals[n] = fc;
            } else {
                for i in 1..=n {
                    for d in 0..n {
                        pts[i][d] = pts[0][d] + sigma * (pts[i][d] - pts[0][d]);
                    }
                    vals[i] = f(&pts[i]);
                    evals += 1;
                }
            }
        }
    }

    let best = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    SimplexRun { z_best: pts[best].clone(), f_best: vals[best], evaluations: evals }
}

/// i-th element (1-based) of the van der Corput sequence in base `base`.
fn van_der_corput(mut i: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

const HALTON_BASES: [usize; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

/// `index`-th Halton point in `dim` dimensions (unit cube), shifted by
/// `shift` modulo 1 (a Cranley-Patterson rotation; the shift carries the
/// seed dependence).
pub fn halton_point(index: usize, dim: usize, shift: &[f64]) -> Vec<f64> {
    assert!(dim <= HALTON_BASES.len(), "halton sequence limited to {} dims", HALTON_BASES.len());
    (0..dim)
        .map(|d| (van_der_corput(index, HALTON_BASES[d]) + shift[d]).fract())
        .collect()
}
