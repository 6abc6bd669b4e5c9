//! Heralded single-photon temporal shaping.
//!
//! Detecting exactly one photon of the |1,1> component at time `t_dec` in
//! port 1 projects the port-2 photon onto
//!
//! ```text
//! shape(tau) ~ t^2 f1(t_dec) f2(tau) - r^2 f2(t_dec) f1(tau),
//! ```
//!
//! normalized by `nor = integral |.|^2 dtau`; the success density at
//! `t_dec` is exactly `nor` of the unnormalized expression. The same-port
//! |2,0> outcome heralds `f1(t_dec) f2(tau) + f2(t_dec) f1(tau)` with a
//! factor-2 success density because either photon can trigger the
//! detector. A detector with finite resolution `t_R` yields an incoherent
//! mixture over detection sub-times inside
//! `(t_dec - t_R/2, t_dec + t_R/2)`.
//!
//! Shaping quality against a target g is the squared overlap
//! `F = |integral g*(tau) shape(tau) dtau|^2`, and [`optimize_shaping`]
//! maximizes it over the full parameter vector of an input family with a
//! screened multi-restart simplex search.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::beamsplitter::{BeamSplitter, Outcome};
use crate::error::{Error, Result};
use crate::grid::{quad_inner, quad_norm_sq, TimeGrid};
use crate::optim::{halton_point, nelder_mead, BoundsTransform};
use crate::waveforms::{SampledShape, TemporalShape};

/// Herald attempts whose unnormalized norm falls below this are impossible
/// (e.g. detection before either wavepacket has been emitted).
pub const HERALD_EPS: f64 = 1e-12;

/// A time-resolved detection event on output port 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeraldSpec {
    /// Which outcome the detection selects; only |1,1> and |2,0> leave a
    /// photon to shape.
    pub outcome: Outcome,
    pub t_dec: f64,
    /// Detector time resolution `t_R >= 0`; 0 means ideal point detection.
    pub resolution: f64,
}

impl HeraldSpec {
    pub fn new(outcome: Outcome, t_dec: f64, resolution: f64) -> Result<Self> {
        if outcome == Outcome::Out02 {
            return Err(Error::InvalidParameter(
                "heralding detects port 1; use outcome 11 or 20".into(),
            ));
        }
        if !t_dec.is_finite() || !resolution.is_finite() || resolution < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "herald needs finite t_dec and resolution >= 0, got ({t_dec}, {resolution})"
            )));
        }
        Ok(Self { outcome, t_dec, resolution })
    }

    pub fn ideal(outcome: Outcome, t_dec: f64) -> Result<Self> {
        Self::new(outcome, t_dec, 0.0)
    }
}

/// One member of a windowed-detection ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct HeraldComponent {
    pub t_dec: f64,
    /// Normalized ensemble weight; weights sum to 1.
    pub weight: f64,
    pub shape: SampledShape,
}

/// Outcome of a heralding measurement: a pure conditional state for an
/// ideal detector, or a classical mixture for a finite-resolution window.
#[derive(Debug, Clone, PartialEq)]
pub enum HeraldResult {
    Pure {
        shape: SampledShape,
        /// Probability density of the heralding click at `t_dec`; its
        /// integral over all detection times recovers the branch
        /// probability.
        success_density: f64,
        fidelity: Option<f64>,
    },
    Windowed {
        ensemble: Vec<HeraldComponent>,
        success_probability: f64,
        /// Mixed-state fidelity: the weight-averaged pure fidelities.
        fidelity: Option<f64>,
    },
}

impl HeraldResult {
    pub fn fidelity(&self) -> Option<f64> {
        match self {
            Self::Pure { fidelity, .. } | Self::Windowed { fidelity, .. } => *fidelity,
        }
    }
}

// Unnormalized heralded amplitude at one detection time plus its success
// density. Scalars evaluated off-grid are divided by the captured norm so
// they stay consistent with the renormalized samples.
struct HeraldCore {
    unnormalized: Vec<num_complex::Complex64>,
    nor: f64,
    density: f64,
}

fn herald_core(
    f1: &TemporalShape,
    s1: &SampledShape,
    captured1: f64,
    f2: &TemporalShape,
    s2: &SampledShape,
    captured2: f64,
    bs: &BeamSplitter,
    outcome: Outcome,
    t_dec: f64,
    grid: &TimeGrid,
) -> HeraldCore {
    let a = f1.eval(t_dec) / captured1.sqrt();
    let b = f2.eval(t_dec) / captured2.sqrt();
    let (c1, c2, density_factor) = match outcome {
        Outcome::Out11 => (bs.t_sq(), -bs.r_sq(), 1.0),
        Outcome::Out20 => {
            let c = bs.reflection() * bs.transmission() / std::f64::consts::SQRT_2;
            (c, c, 2.0)
        }
        Outcome::Out02 => unreachable!("rejected by HeraldSpec"),
    };
    let unnormalized: Vec<_> = s2
        .values()
        .iter()
        .zip(s1.values())
        .map(|(&v2, &v1)| c1 * a * v2 + c2 * b * v1)
        .collect();
    let nor = quad_norm_sq(grid, &unnormalized);
    HeraldCore { unnormalized, nor, density: density_factor * nor }
}

/// Heralded shape for an ideal (point) detection at `spec.t_dec`.
///
/// Errors with [`Error::ImpossibleHerald`] when no photon can be detected
/// there, e.g. before both wavepacket origins.
pub fn herald_shape(
    f1: &TemporalShape,
    f2: &TemporalShape,
    bs: &BeamSplitter,
    spec: &HeraldSpec,
    target: Option<&TemporalShape>,
    grid: &TimeGrid,
) -> Result<HeraldResult> {
    if spec.resolution != 0.0 {
        return Err(Error::InvalidParameter(
            "herald_shape handles ideal detection; use herald_windowed for t_R > 0".into(),
        ));
    }
    let (s1, c1) = f1.sample_with_captured(grid)?;
    let (s2, c2) = f2.sample_with_captured(grid)?;
    let core = herald_core(f1, &s1, c1, f2, &s2, c2, bs, spec.outcome, spec.t_dec, grid);
    if core.nor <= HERALD_EPS {
        return Err(Error::ImpossibleHerald { t_dec: spec.t_dec, weight: core.nor });
    }
    let shape = SampledShape::new(*grid, core.unnormalized)?;
    let fidelity = match target {
        Some(t) => Some(fidelity_of_sampled(&shape, t, grid)?),
        None => None,
    };
    Ok(HeraldResult::Pure { shape, success_density: core.density, fidelity })
}

/// Heralded ensemble for a detector window of width `spec.resolution`
/// centered on `spec.t_dec`.
///
/// The window is discretized into the grid points it contains (falling
/// back to `t_dec` itself when it is narrower than one grid spacing); each
/// sub-time contributes an incoherent component weighted by its detection
/// probability `density x dt`.
pub fn herald_windowed(
    f1: &TemporalShape,
    f2: &TemporalShape,
    bs: &BeamSplitter,
    spec: &HeraldSpec,
    target: Option<&TemporalShape>,
    grid: &TimeGrid,
) -> Result<HeraldResult> {
    if spec.resolution <= 0.0 {
        return Err(Error::InvalidParameter(
            "herald_windowed needs t_R > 0; use herald_shape for ideal detection".into(),
        ));
    }
    let (s1, c1) = f1.sample_with_captured(grid)?;
    let (s2, c2) = f2.sample_with_captured(grid)?;

    let (lo, hi) = (spec.t_dec - spec.resolution / 2.0, spec.t_dec + spec.resolution / 2.0);
    let mut sub_times: Vec<(f64, f64)> = grid
        .points()
        .into_iter()
        .filter(|&t| t > lo && t < hi)
        .map(|t| (t, grid.spacing()))
        .collect();
    if sub_times.is_empty() {
        sub_times.push((spec.t_dec, spec.resolution));
    }

    let mut raw: Vec<(f64, f64, SampledShape)> = Vec::with_capacity(sub_times.len());
    let mut total_weight = 0.0;
    for (t_k, dt) in sub_times {
        let core = herald_core(f1, &s1, c1, f2, &s2, c2, bs, spec.outcome, t_k, grid);
        if core.nor <= HERALD_EPS {
            continue; // zero-probability sub-time contributes nothing
        }
        let weight = core.density * dt;
        total_weight += weight;
        raw.push((t_k, weight, SampledShape::new(*grid, core.unnormalized)?));
    }
    if total_weight <= HERALD_EPS {
        return Err(Error::ImpossibleHerald { t_dec: spec.t_dec, weight: total_weight });
    }

    let mut fidelity = None;
    if let Some(t) = target {
        let mut acc = 0.0;
        for (_, weight, shape) in &raw {
            acc += weight / total_weight * fidelity_of_sampled(shape, t, grid)?;
        }
        fidelity = Some(acc);
    }
    let ensemble = raw
        .into_iter()
        .map(|(t_dec, weight, shape)| HeraldComponent {
            t_dec,
            weight: weight / total_weight,
            shape,
        })
        .collect();
    Ok(HeraldResult::Windowed { ensemble, success_probability: total_weight, fidelity })
}

/// Shaping fidelity `|integral target*(tau) shape(tau) dtau|^2` on the
/// grid; both shapes are sampled (hence unit-normalized) first.
pub fn shaping_fidelity(
    shape: &TemporalShape,
    target: &TemporalShape,
    grid: &TimeGrid,
) -> Result<f64> {
    let s = shape.sample(grid)?;
    fidelity_of_sampled(&s, target, grid)
}

fn fidelity_of_sampled(
    shape: &SampledShape,
    target: &TemporalShape,
    grid: &TimeGrid,
) -> Result<f64> {
    let t = target.sample(grid)?;
    Ok(quad_inner(grid, shape.values(), t.values()).norm_sqr())
}

/// Closed form of the shape heralded from two ED inputs with linewidth
/// `gamma` and relative detuning `detuning` on a balanced splitter at
/// `t_dec = 0`: an ED sine with the same linewidth and frequency
/// `detuning / 2`.
pub fn ed_to_edsine_closed_form(gamma: f64, detuning: f64) -> Result<TemporalShape> {
    if detuning == 0.0 {
        return Err(Error::InvalidParameter(
            "the closed form needs a nonzero relative detuning".into(),
        ));
    }
    TemporalShape::exp_decay_sine(gamma, detuning / 2.0, 0.0)
}

/// Everything needed to evaluate one shaping candidate.
#[derive(Debug, Clone)]
pub struct ShapingCandidate {
    pub f1: TemporalShape,
    pub f2: TemporalShape,
    pub bs: BeamSplitter,
    pub t_dec: f64,
    pub target: TemporalShape,
}

/// Maps a parameter vector to a shaping candidate.
#[derive(Clone)]
pub enum InputFamily {
    /// Two ED-sine inputs and a Gaussian target of fixed width:
    /// `x = [gamma1, gamma2, omega1, omega2, t, tau0, t_dec]`. Frequencies
    /// inside (-`min_abs_omega`, `min_abs_omega`) are clamped to the nearer
    /// edge (the ED-sine formula degenerates at omega = 0).
    EdSinePair { target_gamma: f64, min_abs_omega: f64 },
    /// Arbitrary constructor for other parameterizations.
    Custom(Arc<dyn Fn(&[f64]) -> Result<ShapingCandidate> + Send + Sync>),
}

impl std::fmt::Debug for InputFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::EdSinePair { target_gamma, min_abs_omega } => f
                .debug_struct("EdSinePair")
                .field("target_gamma", target_gamma)
                .field("min_abs_omega", min_abs_omega)
                .finish(),
            Self::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl InputFamily {
    fn build(&self, x: &[f64]) -> Result<ShapingCandidate> {
        match self {
            Self::EdSinePair { target_gamma, min_abs_omega } => {
                if x.len() != 7 {
                    return Err(Error::InvalidParameter(format!(
                        "the ED-sine family takes 7 parameters, got {}",
                        x.len()
                    )));
                }
                let clamp = |w: f64| {
                    if w.abs() >= *min_abs_omega {
                        w
                    } else if w < 0.0 {
                        -*min_abs_omega
                    } else {
                        *min_abs_omega
                    }
                };
                Ok(ShapingCandidate {
                    f1: TemporalShape::exp_decay_sine(x[0], clamp(x[2]), 0.0)?,
                    f2: TemporalShape::exp_decay_sine(x[1], clamp(x[3]), 0.0)?,
                    bs: BeamSplitter::new(x[4])?,
                    t_dec: x[6],
                    target: TemporalShape::gaussian(*target_gamma, x[5])?,
                })
            }
            Self::Custom(build) => build(x),
        }
    }
}

/// A shaping-fidelity maximization problem over a bounded parameter box.
#[derive(Debug, Clone)]
pub struct ShapingProblem {
    pub family: InputFamily,
    pub bounds: Vec<(f64, f64)>,
    pub outcome: Outcome,
    pub grid: TimeGrid,
}

impl ShapingProblem {
    /// The ED-sine-to-Gaussian problem with its default parameter box:
    /// linewidths in (0.05, 20), frequencies in (-20, 20) with the
    /// degenerate band around 0 clamped away, transmission in
    /// (0.05, 0.95), target delay in (-10, 10) and the detection time
    /// anywhere in the grid window.
    pub fn ed_sine_to_gaussian(target_gamma: f64, grid: TimeGrid) -> Result<Self> {
        if !(target_gamma > 0.0) || !target_gamma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "target width must be positive, got {target_gamma}"
            )));
        }
        Ok(Self {
            family: InputFamily::EdSinePair { target_gamma, min_abs_omega: 0.05 },
            bounds: vec![
                (0.05, 20.0),
                (0.05, 20.0),
                (-20.0, 20.0),
                (-20.0, 20.0),
                (0.05, 0.95),
                (-10.0, 10.0),
                (grid.t_min(), grid.t_max()),
            ],
            outcome: Outcome::Out11,
            grid,
        })
    }

    pub fn candidate(&self, x: &[f64]) -> Result<ShapingCandidate> {
        self.family.build(x)
    }

    /// Shaping fidelity of the candidate at `x` (the optimization
    /// objective).
    pub fn objective(&self, x: &[f64]) -> Result<f64> {
        let cand = self.candidate(x)?;
        let spec = HeraldSpec::ideal(self.outcome, cand.t_dec)?;
        let result =
            herald_shape(&cand.f1, &cand.f2, &cand.bs, &spec, Some(&cand.target), &self.grid)?;
        Ok(result.fidelity().expect("target was provided"))
    }
}

/// Restart/budget/seed knobs for [`optimize_shaping`]. `budget` is the
/// objective-evaluation cap per restart (screening is charged against it
/// pro rata).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub budget: usize,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { restarts: 8, budget: 5000, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizeOutcome {
    pub x_best: Vec<f64>,
    pub fidelity: f64,
    pub evaluations: usize,
    pub herald: HeraldResult,
}

// Search-strategy constants. Screening takes 3/40 of the total budget
// (3000 points at the default 8 x 5000); restarts launch from the top
// screened candidates kept at least DIVERSITY_RADIUS apart in normalized
// coordinates, and each restart spends NM_FRACTION of its budget on a
// coarse simplex before basin-hopping perturbations of alternating size.
const SCREEN_NUM: usize = 4;
const SCREEN_DEN: usize = 40;
const DIVERSITY_RADIUS: f64 = 0.25;
const NM_FRACTION: f64 = 0.45;
const NM_STEP: f64 = 0.3;
const HOP_NM_STEP: f64 = 0.1;
const HOP_EVALS: usize = 800;
const HOP_SIGMAS: [f64; 2] = [0.15, 0.40];
const FTOL: f64 = 1e-12;
const XTOL: f64 = 1e-10;

/// Maximize the shaping fidelity with a screened multi-restart bounded
/// simplex search.
///
/// Quasi-random (shifted Halton) candidates are screened first; the
/// restarts then refine the best mutually-distant candidates, each
/// finishing with seeded perturbation hops to escape shallow basins.
/// Candidates that cannot be heralded score zero, and the whole run fails
/// with [`Error::NoFeasibleStart`] only if every screened candidate is
/// infeasible. Results are deterministic for a given seed and
/// configuration; restarts run in parallel and ties prefer the
/// lowest-index restart.
pub fn optimize_shaping(
    problem: &ShapingProblem,
    config: &OptimizerConfig,
) -> Result<OptimizeOutcome> {
    let dim = problem.bounds.len();
    if dim == 0 || config.restarts == 0 || config.budget < 10 * (dim + 1) {
        return Err(Error::InvalidParameter(
            "optimizer needs nonempty bounds, restarts >= 1 and budget >= 10 (dim + 1)".into(),
        ));
    }
    let transform = BoundsTransform::new(&problem.bounds)?;
    let span = transform.span();
    let lo: Vec<f64> = problem.bounds.iter().map(|b| b.0).collect();

    let total_budget = config.restarts * config.budget;
    let n_screen = (total_budget * SCREEN_NUM / SCREEN_DEN)
        .clamp(config.restarts, total_budget / 2);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let shift: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();

    // screening: quasi-random sweep of the box
    let mut feasible = 0usize;
    let mut candidates: Vec<(f64, Vec<f64>)> = Vec::with_capacity(n_screen);
    for m in 1..=n_screen {
        let u = halton_point(m, dim, &shift);
        let x: Vec<f64> = (0..dim).map(|d| lo[d] + span[d] * u[d]).collect();
        let fid = match problem.objective(&x) {
            Ok(f) => {
                feasible += 1;
                f
            }
            Err(_) => 0.0,
        };
        candidates.push((fid, x));
    }
    if feasible == 0 {
        return Err(Error::NoFeasibleStart);
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0));

    // keep the best candidates, forced apart in normalized coordinates
    let normalized_dist = |a: &[f64], b: &[f64]| -> f64 {
        (0..dim)
            .map(|d| ((a[d] - b[d]) / span[d]).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let mut starts: Vec<Vec<f64>> = Vec::with_capacity(config.restarts);
    for (_, x) in &candidates {
        if starts.len() == config.restarts {
            break;
        }
        if starts.iter().all(|s| normalized_dist(s, x) > DIVERSITY_RADIUS) {
            starts.push(x.clone());
        }
    }
    for (_, x) in &candidates {
        if starts.len() == config.restarts {
            break;
        }
        if !starts.iter().any(|s| s == x) {
            starts.push(x.clone());
        }
    }

    let local_budget = (config.budget - n_screen / config.restarts).max(10 * (dim + 1));
    let runs: Vec<(f64, Vec<f64>, usize)> = starts
        .par_iter()
        .enumerate()
        .map(|(k, x0)| {
            let mut hop_rng = ChaCha8Rng::seed_from_u64(config.seed);
            hop_rng.set_stream(k as u64 + 1);
            run_restart(problem, &transform, x0, local_budget, &mut hop_rng)
        })
        .collect();

    let mut evaluations = n_screen;
    let mut best: Option<(f64, Vec<f64>)> = None;
    for (fid, z, used) in runs {
        evaluations += used;
        let better = match &best {
            // strict comparison keeps the lowest restart index on ties
            Some((bf, _)) => fid > *bf,
            None => true,
        };
        if better {
            best = Some((fid, z));
        }
    }
    let (fidelity, z_best) = best.expect("at least one restart ran");
    let x_best = transform.to_x(&z_best);

    let cand = problem.candidate(&x_best)?;
    let spec = HeraldSpec::ideal(problem.outcome, cand.t_dec)?;
    let herald =
        herald_shape(&cand.f1, &cand.f2, &cand.bs, &spec, Some(&cand.target), &problem.grid)?;
    Ok(OptimizeOutcome { x_best, fidelity, evaluations, herald })
}

// One restart: coarse simplex from the screened start, then perturbation
// hops with the remaining budget. Returns (best fidelity, best z, evals).
fn run_restart(
    problem: &ShapingProblem,
    transform: &BoundsTransform,
    x0: &[f64],
    budget: usize,
    hop_rng: &mut ChaCha8Rng,
) -> (f64, Vec<f64>, usize) {
    let used = std::cell::Cell::new(0usize);
    let objective = |z: &[f64]| {
        used.set(used.get() + 1);
        let x = transform.to_x(z);
        -problem.objective(&x).unwrap_or(0.0)
    };

    let z0 = transform.to_z(x0);
    let nm_budget = (budget as f64 * NM_FRACTION) as usize;
    let first = nelder_mead(&objective, &z0, NM_STEP, nm_budget, FTOL, XTOL);
    let mut z_best = first.z_best;
    let mut f_best = first.f_best;

    let mut hop = 0usize;
    while used.get() + HOP_EVALS + 50 < budget {
        let sigma = HOP_SIGMAS[hop % HOP_SIGMAS.len()];
        let z_start: Vec<f64> = z_best
            .iter()
            .map(|&z| z + sigma * hop_rng.sample::<f64, _>(StandardNormal))
            .collect();
        let cap = HOP_EVALS.min(budget - used.get());
        let run = nelder_mead(&objective, &z_start, HOP_NM_STEP, cap, FTOL, XTOL);
        if run.f_best < f_best {
            z_best = run.z_best;
            f_best = run.f_best;
        }
        hop += 1;
    }
    (-f_best, z_best, used.get())
}
