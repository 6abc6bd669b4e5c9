//! Library side of the `biphoton` command-line tool.
//!
//! Every command is described by a fully-resolved [`RunConfig`] (defaults
//! filled in, file references expanded) and executed by [`run`], which
//! renders the output bytes without touching the filesystem. The config is
//! echoed into every output — as a `"config"` field in JSON payloads and a
//! leading `# config: ...` comment line in CSV payloads — so any run can be
//! reproduced byte-for-byte from its own output. Output paths are delivery
//! details and deliberately not part of the config.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use biphoton::{
    entropy_surface, herald_shape, herald_windowed, joint_amplitude, optimize_shaping,
    outcome_probabilities, overlap_j, BeamSplitter, HeraldResult, HeraldSpec,
    Outcome, OptimizerConfig, ShapingProblem, TemporalShape, TimeGrid,
};

/// Exit-code carrying error: 64 usage, 65 data, 74 I/O.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] biphoton::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 64,
            Self::Data(_) => 65,
            Self::Io(_) => 74,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Usage(_) => "usage",
            Self::Data(_) => "data",
            Self::Io(_) => "io",
        }
    }

    /// Machine-parseable error object for stderr.
    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": { "kind": self.kind(), "message": self.to_string() } })
            .to_string()
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
}

/// Named parameter box of the ED-sine-to-Gaussian optimization problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizeBounds {
    pub gamma1: [f64; 2],
    pub gamma2: [f64; 2],
    pub omega1: [f64; 2],
    pub omega2: [f64; 2],
    pub t: [f64; 2],
    pub tau0: [f64; 2],
    pub t_dec: [f64; 2],
}

impl OptimizeBounds {
    /// The default box for a given grid window.
    pub fn defaults(grid: &TimeGrid) -> Self {
        Self {
            gamma1: [0.05, 20.0],
            gamma2: [0.05, 20.0],
            omega1: [-20.0, 20.0],
            omega2: [-20.0, 20.0],
            t: [0.05, 0.95],
            tau0: [-10.0, 10.0],
            t_dec: [grid.t_min(), grid.t_max()],
        }
    }

    fn as_vec(&self) -> Vec<(f64, f64)> {
        [self.gamma1, self.gamma2, self.omega1, self.omega2, self.t, self.tau0, self.t_dec]
            .iter()
            .map(|b| (b[0], b[1]))
            .collect()
    }
}

/// A fully-resolved, reproducible description of one command invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum RunConfig {
    Probs {
        shape1: TemporalShape,
        shape2: TemporalShape,
        t_sq: f64,
        grid: TimeGrid,
        format: OutputFormat,
    },
    EntropySurface {
        outcome: Outcome,
        j_min: f64,
        j_max: f64,
        j_points: usize,
        t_sq_min: f64,
        t_sq_max: f64,
        t_sq_points: usize,
    },
    Joint {
        shape1: TemporalShape,
        shape2: TemporalShape,
        t_sq: f64,
        outcome: Outcome,
        grid: TimeGrid,
    },
    Herald {
        shape1: TemporalShape,
        shape2: TemporalShape,
        t_sq: f64,
        outcome: Outcome,
        t_dec: f64,
        t_r: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target: Option<TemporalShape>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        t_r_sweep: Option<Vec<f64>>,
        grid: TimeGrid,
        format: OutputFormat,
    },
    Optimize {
        target_gamma: f64,
        bounds: OptimizeBounds,
        grid: TimeGrid,
        seed: u64,
        budget: usize,
        restarts: usize,
    },
}

impl RunConfig {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serialization cannot fail")
    }

    pub fn from_json(s: &str) -> CliResult<Self> {
        serde_json::from_str(s).map_err(|e| CliError::Usage(format!("bad run config: {e}")))
    }
}

/// Rendered output of a run: what goes to stdout (or `--out`) and, for the
/// file-pair command, the secondary payload.
#[derive(Debug, Clone, PartialEq)]
pub enum Rendered {
    /// Single payload (probs, herald, optimize).
    Text(Vec<u8>),
    /// Single CSV file payload (entropy-surface).
    Csv(Vec<u8>),
    /// Metadata JSON plus matrix CSV (joint).
    Pair { meta: Vec<u8>, csv: Vec<u8> },
}

/// 17-significant-digit float formatting: round-trip exact for f64.
fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

fn outcome_code(outcome: Outcome) -> &'static str {
    match outcome {
        Outcome::Out20 => "20",
        Outcome::Out11 => "11",
        Outcome::Out02 => "02",
    }
}

fn json_payload(config: &RunConfig, data: serde_json::Value) -> Vec<u8> {
    let mut out = serde_json::json!({ "config": config, "data": data }).to_string();
    out.push('\n');
    out.into_bytes()
}

fn csv_payload(config: &RunConfig, header: &str, rows: &[String]) -> Vec<u8> {
    let mut out = format!("# config: {}\n{header}\n", config.to_json());
    for row in rows {
        out.push_str(row);
        out.push('\n');
    }
    out.into_bytes()
}

/// Execute a config and render its output bytes. Pure: no filesystem or
/// environment access, so identical configs produce identical bytes.
pub fn run(config: &RunConfig) -> CliResult<Rendered> {
    match config {
        RunConfig::Probs { shape1, shape2, t_sq, grid, format } => {
            let bs = BeamSplitter::from_t_sq(*t_sq)?;
            let j = overlap_j(shape1, shape2, grid)?;
            let p = outcome_probabilities(shape1, shape2, &bs, grid)?;
            match format {
                OutputFormat::Json => Ok(Rendered::Text(json_payload(
                    config,
                    serde_json::json!({
                        "J_abs": j.norm(), "P20": p.p20, "P11": p.p11, "P02": p.p02
                    }),
                ))),
                OutputFormat::Csv => {
                    let row = [j.norm(), p.p20, p.p11, p.p02]
                        .map(fmt_f)
                        .join(",");
                    Ok(Rendered::Text(csv_payload(config, "J_abs,P20,P11,P02", &[row])))
                }
            }
        }

        RunConfig::EntropySurface {
            outcome,
            j_min,
            j_max,
            j_points,
            t_sq_min,
            t_sq_max,
            t_sq_points,
        } => {
            let cells = entropy_surface(
                (*j_min, *j_max),
                (*t_sq_min, *t_sq_max),
                *outcome,
                *j_points,
                *t_sq_points,
            )?;
            let rows: Vec<String> = cells
                .iter()
                .map(|c| {
                    let entropy = c.entropy.map(fmt_f).unwrap_or_default();
                    format!(
                        "{},{},{},{entropy}",
                        fmt_f(c.j_abs),
                        fmt_f(c.t_sq),
                        outcome_code(c.outcome)
                    )
                })
                .collect();
            Ok(Rendered::Csv(csv_payload(config, "J_abs,t_sq,outcome,entropy", &rows)))
        }

        RunConfig::Joint { shape1, shape2, t_sq, outcome, grid } => {
            let bs = BeamSplitter::from_t_sq(*t_sq)?;
            let j = overlap_j(shape1, shape2, grid)?;
            let p = outcome_probabilities(shape1, shape2, &bs, grid)?;
            let amp = joint_amplitude(shape1, shape2, &bs, *outcome, grid)?;
            let n = grid.n_points();
            let mut csv = String::with_capacity(n * n * 48);
            csv.push_str("i,j,re,im\n");
            for i in 0..n {
                for k in 0..n {
                    let v = amp.values[[i, k]];
                    csv.push_str(&format!("{i},{k},{},{}\n", fmt_f(v.re), fmt_f(v.im)));
                }
            }
            let meta = json_payload(
                config,
                serde_json::json!({
                    "outcome": outcome_code(*outcome),
                    "grid": grid,
                    "J_abs": j.norm(),
                    "probability": p.get(*outcome),
                    "rows": n * n,
                }),
            );
            Ok(Rendered::Pair { meta, csv: csv.into_bytes() })
        }

        RunConfig::Herald {
            shape1,
            shape2,
            t_sq,
            outcome,
            t_dec,
            t_r,
            target,
            t_r_sweep,
            grid,
            format,
        } => {
            let bs = BeamSplitter::from_t_sq(*t_sq)?;
            if let Some(sweep) = t_r_sweep {
                return render_sweep(
                    config, shape1, shape2, &bs, *outcome, *t_dec, sweep, target.as_ref(), grid,
                    *format,
                );
            }
            let spec = HeraldSpec::new(*outcome, *t_dec, *t_r)?;
            let result = if *t_r == 0.0 {
                herald_shape(shape1, shape2, &bs, &spec, target.as_ref(), grid)?
            } else {
                herald_windowed(shape1, shape2, &bs, &spec, target.as_ref(), grid)?
            };
            render_herald(config, &result, *format)
        }

        RunConfig::Optimize { target_gamma, bounds, grid, seed, budget, restarts } => {
            let mut problem = ShapingProblem::ed_sine_to_gaussian(*target_gamma, *grid)?;
            problem.bounds = bounds.as_vec();
            let opt = OptimizerConfig { restarts: *restarts, budget: *budget, seed: *seed };
            let result = optimize_shaping(&problem, &opt)?;
            let x = &result.x_best;
            Ok(Rendered::Text(json_payload(
                config,
                serde_json::json!({
                    "x_best": {
                        "gamma1": x[0], "gamma2": x[1], "omega1": x[2], "omega2": x[3],
                        "t": x[4], "tau0": x[5], "t_dec": x[6],
                    },
                    "fidelity": result.fidelity,
                    "evaluations": result.evaluations,
                }),
            )))
        }
    }
}

fn render_herald(
    config: &RunConfig,
    result: &HeraldResult,
    format: OutputFormat,
) -> CliResult<Rendered> {
    match result {
        HeraldResult::Pure { shape, success_density, fidelity } => match format {
            OutputFormat::Json => Ok(Rendered::Text(json_payload(
                config,
                serde_json::json!({
                    "success_density": success_density,
                    "fidelity": fidelity,
                    "shape": shape,
                }),
            ))),
            OutputFormat::Csv => {
                let grid = shape.grid();
                let rows: Vec<String> = shape
                    .values()
                    .iter()
                    .enumerate()
                    .map(|(i, v)| {
                        format!("{},{},{}", fmt_f(grid.point(i)), fmt_f(v.re), fmt_f(v.im))
                    })
                    .collect();
                Ok(Rendered::Text(csv_payload(config, "tau,re,im", &rows)))
            }
        },
        HeraldResult::Windowed { ensemble, success_probability, fidelity } => match format {
            OutputFormat::Json => {
                let components: Vec<serde_json::Value> = ensemble
                    .iter()
                    .map(|c| serde_json::json!({ "t_dec": c.t_dec, "weight": c.weight }))
                    .collect();
                Ok(Rendered::Text(json_payload(
                    config,
                    serde_json::json!({
                        "success_probability": success_probability,
                        "fidelity": fidelity,
                        "components": components,
                    }),
                )))
            }
            OutputFormat::Csv => {
                let rows: Vec<String> = ensemble
                    .iter()
                    .map(|c| format!("{},{}", fmt_f(c.t_dec), fmt_f(c.weight)))
                    .collect();
                Ok(Rendered::Text(csv_payload(config, "t_dec,weight", &rows)))
            }
        },
    }
}

#[allow(clippy::too_many_arguments)]
fn render_sweep(
    config: &RunConfig,
    shape1: &TemporalShape,
    shape2: &TemporalShape,
    bs: &BeamSplitter,
    outcome: Outcome,
    t_dec: f64,
    sweep: &[f64],
    target: Option<&TemporalShape>,
    grid: &TimeGrid,
    format: OutputFormat,
) -> CliResult<Rendered> {
    let mut points = Vec::with_capacity(sweep.len());
    for &t_r in sweep {
        let spec = HeraldSpec::new(outcome, t_dec, t_r)?;
        let result = herald_windowed(shape1, shape2, bs, &spec, target, grid)?;
        let HeraldResult::Windowed { success_probability, fidelity, .. } = result else {
            unreachable!("windowed herald returns a windowed result");
        };
        points.push((t_r, success_probability, fidelity));
    }
    match format {
        OutputFormat::Json => {
            let sweep_json: Vec<serde_json::Value> = points
                .iter()
                .map(|&(t_r, s, f)| {
                    serde_json::json!({ "t_r": t_r, "success_probability": s, "fidelity": f })
                })
                .collect();
            Ok(Rendered::Text(json_payload(config, serde_json::json!({ "sweep": sweep_json }))))
        }
        OutputFormat::Csv => {
            let rows: Vec<String> = points
                .iter()
                .map(|&(t_r, s, f)| {
                    format!(
                        "{},{},{}",
                        fmt_f(t_r),
                        fmt_f(s),
                        f.map(fmt_f).unwrap_or_default()
                    )
                })
                .collect();
            Ok(Rendered::Text(csv_payload(
                config,
                "t_R,success_probability,fidelity",
                &rows,
            )))
        }
    }
}

/// Extract the `data` part of an output produced by [`run`]: the `"data"`
/// JSON value, or for CSV everything after the `# config:` line. This is
/// the byte region the reproducibility guarantee covers.
pub fn data_section(bytes: &[u8]) -> CliResult<Vec<u8>> {
    let text = std::str::from_utf8(bytes)
        .map_err(|_| CliError::Usage("output is not UTF-8".into()))?;
    if let Some(rest) = text.strip_prefix("# config: ") {
        let data = rest.split_once('\n').map(|(_, d)| d).unwrap_or_default();
        return Ok(data.as_bytes().to_vec());
    }
    let value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| CliError::Usage(format!("output is neither CSV nor JSON: {e}")))?;
    let data = value
        .get("data")
        .ok_or_else(|| CliError::Usage("output has no data section".into()))?;
    Ok(data.to_string().into_bytes())
}

/// Extract and parse the echoed config from an output produced by [`run`].
pub fn config_of(bytes: &[u8]) -> CliResult<RunConfig> {
    let text = std::str::from_utf8(bytes)
        .map_err(|_| CliError::Usage("output is not UTF-8".into()))?;
    if let Some(rest) = text.strip_prefix("# config: ") {
        let line = rest.split_once('\n').map(|(l, _)| l).unwrap_or(rest);
        return RunConfig::from_json(line);
    }
    let value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| CliError::Usage(format!("output is neither CSV nor JSON: {e}")))?;
    let config = value
        .get("config")
        .ok_or_else(|| CliError::Usage("output has no config echo".into()))?;
    RunConfig::from_json(&config.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ed(det: f64) -> TemporalShape {
        TemporalShape::exp_decay(1.0, det, 0.0).unwrap()
    }

    fn default_grid() -> TimeGrid {
        TimeGrid::new(-10.0, 30.0, 2001).unwrap()
    }

    #[test]
    fn probs_payload_round_trips() {
        let config = RunConfig::Probs {
            shape1: ed(0.0),
            shape2: ed(0.0),
            t_sq: 0.5,
            grid: default_grid(),
            format: OutputFormat::Json,
        };
        let Rendered::Text(bytes) = run(&config).unwrap() else { panic!() };
        let echoed = config_of(&bytes).unwrap();
        assert_eq!(echoed, config);
        let value: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
        assert!((value["data"]["J_abs"].as_f64().unwrap() - 1.0).abs() < 1e-9);
        assert!(value["data"]["P11"].as_f64().unwrap().abs() < 1e-12);

        // identical configs render identical bytes
        let Rendered::Text(again) = run(&echoed).unwrap() else { panic!() };
        assert_eq!(bytes, again);
    }

    #[test]
    fn surface_csv_has_config_line_and_rows() {
        let config = RunConfig::EntropySurface {
            outcome: Outcome::Out11,
            j_min: 0.0,
            j_max: 1.0,
            j_points: 5,
            t_sq_min: 0.0,
            t_sq_max: 1.0,
            t_sq_points: 5,
        };
        let Rendered::Csv(bytes) = run(&config).unwrap() else { panic!() };
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with("# config: "));
        let mut lines = text.lines();
        lines.next();
        assert_eq!(lines.next().unwrap(), "J_abs,t_sq,outcome,entropy");
        assert_eq!(lines.count(), 25);
        assert_eq!(config_of(&bytes).unwrap(), config);
        // the degenerate |1,1> cell is an empty field, not an error
        assert!(text.lines().any(|l| l.ends_with(",11,")));
    }

    #[test]
    fn herald_sweep_is_monotone_in_success() {
        let config = RunConfig::Herald {
            shape1: ed(8.0),
            shape2: ed(-8.0),
            t_sq: 0.5,
            outcome: Outcome::Out11,
            t_dec: 0.5,
            t_r: 0.0,
            target: None,
            t_r_sweep: Some(vec![0.05, 0.1, 0.2, 0.4]),
            grid: default_grid(),
            format: OutputFormat::Json,
        };
        let Rendered::Text(bytes) = run(&config).unwrap() else { panic!() };
        let value: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
        let sweep = value["data"]["sweep"].as_array().unwrap();
        assert_eq!(sweep.len(), 4);
        let successes: Vec<f64> = sweep
            .iter()
            .map(|p| p["success_probability"].as_f64().unwrap())
            .collect();
        assert!(successes.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn data_section_extraction() {
        let json = br#"{"config":{"x":1},"data":{"y":2}}"#;
        assert_eq!(data_section(json).unwrap(), br#"{"y":2}"#.to_vec());
        let csv = b"# config: {\"x\":1}\nh1,h2\n1,2\n";
        assert_eq!(data_section(csv).unwrap(), b"h1,h2\n1,2\n".to_vec());
        assert!(data_section(b"plain text").is_err());
    }

    #[test]
    fn joint_pair_metadata_matches_probability() {
        let config = RunConfig::Joint {
            shape1: ed(8.0),
            shape2: ed(-8.0),
            t_sq: 0.5,
            outcome: Outcome::Out20,
            grid: TimeGrid::new(0.0, 20.0, 41).unwrap(),
        };
        let Rendered::Pair { meta, csv } = run(&config).unwrap() else { panic!() };
        let value: serde_json::Value = serde_json::from_slice(&meta).unwrap();
        assert_eq!(value["data"]["outcome"], "20");
        assert_eq!(value["data"]["rows"], 41 * 41);
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().count(), 41 * 41 + 1);
        assert!(text.starts_with("i,j,re,im\n"));
    }

    #[test]
    fn errors_carry_exit_codes() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), 64);
        assert_eq!(
            CliError::Data(biphoton::Error::NoFeasibleStart).exit_code(),
            65
        );
        assert_eq!(
            CliError::Io(std::io::Error::other("x")).exit_code(),
            74
        );
        let parsed: serde_json::Value =
            serde_json::from_str(&CliError::Usage("bad flag".into()).to_json()).unwrap();
        assert_eq!(parsed["error"]["kind"], "usage");
    }
}
