//! Temporal entanglement of the output components.
//!
//! Every joint amplitude produced by the splitter is a sum of two product
//! terms, so its Schmidt rank is at most 2 and the Von Neumann entropy
//! `S = -sum lambda^2 log2 lambda^2` lies in [0, 1]. Closed forms for the
//! squared Schmidt coefficients:
//!
//! ```text
//! |l1_pm|^2 = [D pm P sqrt(|J|^2 Jc^2 (P-1)^2 + (P - Jc^2 (P-1))^2)] / (2 D),
//!             D = P^2 + Jc^2 (1 - P^2) / 2,   (outcome |1,1>)
//! |l2_pm|^2 = (1 pm |J|)^2 / (2 (1 + |J|^2)),  (outcomes |2,0>, |0,2>)
//! ```
//!
//! with `Jc = sqrt(1 - |J|^2)` and pathway indistinguishability
//! `P = t^2 - r^2`. On a balanced splitter the |1,1> component is always a
//! Bell state (entropy 1) regardless of the input shapes, while the
//! same-port components depend on |J| alone. [`schmidt_numeric`] provides
//! the independent check: an SVD of the discretized amplitude.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::beamsplitter::{
    BeamSplitter, Outcome, OutcomeProbabilities, TwoPhotonAmplitude, DEGENERATE_PROB_EPS,
};
use crate::error::{Error, Result};
use crate::grid::{quad_inner, TimeGrid};
use crate::waveforms::{SampledShape, TemporalShape};

/// Schmidt coefficients below this are quadrature noise (the rank is
/// analytically at most 2) and are dropped.
pub const SCHMIDT_TRUNCATION: f64 = 1e-8;

// Subspace size for the randomized range finder; anything well above the
// analytic rank bound of 2 recovers the spectrum to machine precision.
const RANGE_PROBE_COLUMNS: usize = 16;

/// Analytic entanglement summary of one outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntanglementReport {
    pub outcome: Outcome,
    /// Von Neumann entropy in bits.
    pub entropy: f64,
    pub lambda_sq_plus: f64,
    pub lambda_sq_minus: f64,
    pub j_abs: f64,
    pub t_sq: f64,
}

/// Schmidt decomposition of a discretized joint amplitude:
/// `F(t1, t2) = sum_k coefficients[k] modes_a[k](t1) modes_b[k](t2)`.
///
/// Coefficients are in descending order; both mode families are
/// orthonormal under grid quadrature.
#[derive(Debug, Clone)]
pub struct SchmidtDecomposition {
    pub coefficients: Vec<f64>,
    pub modes_a: Vec<SampledShape>,
    pub modes_b: Vec<SampledShape>,
    pub grid: TimeGrid,
}

impl SchmidtDecomposition {
    /// Squared coefficients normalized to unit sum.
    pub fn lambda_sq(&self) -> Vec<f64> {
        let total: f64 = self.coefficients.iter().map(|l| l * l).sum();
        self.coefficients.iter().map(|l| l * l / total).collect()
    }

    /// Von Neumann entropy (bits) of the decomposition.
    pub fn entropy(&self) -> f64 {
        entropy_from_lambda_sq(&self.lambda_sq())
    }
}

fn entropy_from_lambda_sq(lambda_sq: &[f64]) -> f64 {
    -lambda_sq
        .iter()
        .filter(|&&l| l > 0.0)
        .map(|&l| l * l.log2())
        .sum::<f64>()
}

/// Von Neumann entropy in bits of a Schmidt spectrum, given the
/// coefficients themselves (not squared). `0 log 0` is taken as 0.
pub fn von_neumann_entropy(coefficients: &[f64]) -> Result<f64> {
    if coefficients.iter().any(|&l| l < 0.0 || !l.is_finite()) {
        return Err(Error::InvalidParameter(
            "Schmidt coefficients must be finite and nonnegative".into(),
        ));
    }
    let sum_sq: f64 = coefficients.iter().map(|l| l * l).sum();
    if (sum_sq - 1.0).abs() > 1e-6 {
        return Err(Error::Normalization { sum_sq });
    }
    let lambda_sq: Vec<f64> = coefficients.iter().map(|l| l * l).collect();
    Ok(entropy_from_lambda_sq(&lambda_sq))
}

/// Closed-form Schmidt coefficients and entropy for one outcome, given the
/// overlap magnitude `|J|` and the splitter.
///
/// The single excluded point is |1,1> with `|J| = 1` on a balanced
/// splitter, where the outcome probability vanishes.
pub fn schmidt_analytic(
    j_abs: f64,
    bs: &BeamSplitter,
    outcome: Outcome,
) -> Result<EntanglementReport> {
    if !(0.0..=1.0 + 1e-9).contains(&j_abs) || !j_abs.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "|J| must lie in [0, 1], got {j_abs}"
        )));
    }
    let j = j_abs.min(1.0);
    let (lambda_sq_plus, lambda_sq_minus) = match outcome {
        Outcome::Out11 => {
            let p11 = OutcomeProbabilities::from_overlap(j, bs).p11;
            if p11 <= DEGENERATE_PROB_EPS {
                return Err(Error::DegenerateOutcome { outcome, probability: p11 });
            }
            let p = bs.path_indistinguishability();
            let jc_sq = 1.0 - j * j;
            let d = p * p + 0.5 * jc_sq * (1.0 - p * p);
            let root = (j * j * jc_sq * (p - 1.0) * (p - 1.0)
                + (p - jc_sq * (p - 1.0)) * (p - jc_sq * (p - 1.0)))
                .sqrt();
            ((d + p * root) / (2.0 * d), (d - p * root) / (2.0 * d))
        }
        Outcome::Out20 | Outcome::Out02 => {
            let denom = 2.0 * (1.0 + j * j);
            ((1.0 + j) * (1.0 + j) / denom, (1.0 - j) * (1.0 - j) / denom)
        }
    };
    let lambda_sq_plus = lambda_sq_plus.clamp(0.0, 1.0);
    let lambda_sq_minus = lambda_sq_minus.clamp(0.0, 1.0);
    Ok(EntanglementReport {
        outcome,
        entropy: entropy_from_lambda_sq(&[lambda_sq_plus, lambda_sq_minus]),
        lambda_sq_plus,
        lambda_sq_minus,
        j_abs: j,
        t_sq: bs.t_sq(),
    })
}

/// Numerical Schmidt decomposition of a discretized joint amplitude.
///
/// The sample matrix is scaled by the trapezoid weights
/// (`A = diag(sqrt(w)) F diag(sqrt(w))`) so singular values are the
/// continuum Schmidt coefficients and modes come out unit-norm under grid
/// quadrature. The SVD itself is a randomized range-finder (fixed internal
/// seed, one power iteration) followed by a dense SVD of the projected
/// matrix; for these rank-2 kernels this is exact to machine precision.
/// Coefficients below [`SCHMIDT_TRUNCATION`] are dropped. Each pair of
/// modes is re-phased so the largest-magnitude entry of the port-1 mode is
/// real positive, keeping the reconstruction
/// `sum_k lambda_k a_k(t1) b_k(t2) = F(t1, t2)` intact.
pub fn schmidt_numeric(amp: &TwoPhotonAmplitude) -> Result<SchmidtDecomposition> {
    let n = amp.grid.n_points();
    let w = amp.grid.trapezoid_weights();
    let sw: Vec<f64> = w.iter().map(|&x| x.sqrt()).collect();
    let a = DMatrix::from_fn(n, n, |i, j| amp.values[[i, j]] * (sw[i] * sw[j]));

    let k = RANGE_PROBE_COLUMNS.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_b1f0);
    let omega = DMatrix::from_fn(n, k, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });

    let q = (&a * &omega).qr().q();
    let q = a.ad_mul(&q).qr().q(); // one power iteration sharpens the range
    let q = (&a * &q).qr().q();
    let b = q.ad_mul(&a).adjoint(); // (Q^H A)^H, n x k

    let svd = nalgebra::linalg::SVD::try_new(b.adjoint(), true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::Computation("SVD of the projected amplitude failed".into()))?;
    let u_small = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let u = &q * u_small; // n x k, left singular vectors of A

    let mut triples: Vec<(f64, Vec<C64>, Vec<C64>)> = (0..k)
        .map(|m| {
            let sigma = svd.singular_values[m];
            let col: Vec<C64> = (0..n).map(|i| u[(i, m)] / sw[i]).collect();
            let row: Vec<C64> = (0..n).map(|j| v_t[(m, j)] / sw[j]).collect();
            (sigma, col, row)
        })
        .filter(|(sigma, _, _)| *sigma > SCHMIDT_TRUNCATION)
        .collect();
    triples.sort_by(|x, y| y.0.total_cmp(&x.0));

    let mut coefficients = Vec::with_capacity(triples.len());
    let mut modes_a = Vec::with_capacity(triples.len());
    let mut modes_b = Vec::with_capacity(triples.len());
    for (sigma, mut col, mut row) in triples {
        // phase freedom: make the dominant entry of the port-1 mode real
        // positive and rotate the paired mode oppositely
        let lead = col
            .iter()
            .copied()
            .max_by(|x, y| x.norm_sqr().total_cmp(&y.norm_sqr()))
            .unwrap_or(C64::new(1.0, 0.0));
        if lead.norm() > 0.0 {
            let phase = lead / lead.norm();
            let inv = phase.conj();
            col.iter_mut().for_each(|v| *v *= inv);
            row.iter_mut().for_each(|v| *v *= phase);
        }
        coefficients.push(sigma);
        modes_a.push(SampledShape::new(amp.grid, col)?);
        modes_b.push(SampledShape::new(amp.grid, row)?);
    }
    Ok(SchmidtDecomposition { coefficients, modes_a, modes_b, grid: amp.grid })
}

/// Overlap matrix `M[k][i] = integral mode_k(t) shape_i*(t) dt` between
/// Schmidt modes and a set of reference shapes. Near `J = 0` the same-port
/// entanglement depends on the mode basis; this matrix makes the relation
/// between the Schmidt basis and the original inputs explicit.
pub fn mode_overlap_matrix(
    modes: &[SampledShape],
    shapes: &[TemporalShape],
    grid: &TimeGrid,
) -> Result<ndarray::Array2<C64>> {
    let sampled: Vec<SampledShape> =
        shapes.iter().map(|s| s.sample(grid)).collect::<Result<_>>()?;
    let mut m = ndarray::Array2::from_elem((modes.len(), shapes.len()), C64::new(0.0, 0.0));
    for (k, mode) in modes.iter().enumerate() {
        for (i, shape) in sampled.iter().enumerate() {
            m[[k, i]] = quad_inner(grid, mode.values(), shape.values());
        }
    }
    Ok(m)
}

/// One cell of the entropy surface; `entropy` is `None` at the degenerate
/// |1,1> point (`|J| = 1` on a balanced splitter).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceCell {
    pub j_abs: f64,
    pub t_sq: f64,
    pub outcome: Outcome,
    pub entropy: Option<f64>,
}

/// Dense table of the analytic entropy over `|J|` and `t^2` ranges,
/// `j_points x t_points` cells with inclusive endpoints, `|J|` varying
/// slowest.
pub fn entropy_surface(
    j_range: (f64, f64),
    t_sq_range: (f64, f64),
    outcome: Outcome,
    j_points: usize,
    t_points: usize,
) -> Result<Vec<SurfaceCell>> {
    for (lo, hi, name) in [(j_range.0, j_range.1, "|J|"), (t_sq_range.0, t_sq_range.1, "t^2")] {
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || hi < lo {
            return Err(Error::InvalidParameter(format!(
                "{name} range [{lo}, {hi}] must satisfy 0 <= lo <= hi <= 1"
            )));
        }
    }
    if j_points == 0 || t_points == 0 {
        return Err(Error::InvalidParameter("surface resolution must be positive".into()));
    }
    let lin = |(lo, hi): (f64, f64), n: usize, i: usize| {
        if n == 1 { lo } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }
    };
    let mut cells = Vec::with_capacity(j_points * t_points);
    for ji in 0..j_points {
        let j_abs = lin(j_range, j_points, ji);
        for ti in 0..t_points {
            let t_sq = lin(t_sq_range, t_points, ti);
            let bs = BeamSplitter::from_t_sq(t_sq)?;
            let entropy = match schmidt_analytic(j_abs, &bs, outcome) {
                Ok(report) => Some(report.entropy),
                Err(Error::DegenerateOutcome { .. }) => None,
                Err(e) => return Err(e),
            };
            cells.push(SurfaceCell { j_abs, t_sq, outcome, entropy });
        }
    }
    Ok(cells)
}
