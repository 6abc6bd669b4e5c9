use std::io::Write;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use biphoton::{Outcome, TemporalShape, TimeGrid};
use biphoton_cli::{
    run, CliError, CliResult, OptimizeBounds, OutputFormat, Rendered, RunConfig,
};

/// Two-photon interference at a beam splitter: outcome probabilities,
/// temporal entanglement, and heralded single-photon shaping.
///
/// Shape specs are JSON, inline or as @file references, e.g.
/// '{"kind":"exp_decay","gamma":1.0,"detuning":8.0}'. Every command echoes
/// its fully-resolved configuration into the output so runs can be
/// reproduced exactly. Set BIPHOTON_THREADS to cap internal parallelism.
#[derive(Parser)]
#[command(name = "biphoton", version, about, verbatim_doc_comment)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Outcome probabilities and |J| for a shape pair (JSON to stdout)
    Probs(ProbsArgs),
    /// Von Neumann entropy over |J| and t^2 ranges (CSV to --out)
    EntropySurface(SurfaceArgs),
    /// Joint temporal amplitude of one outcome (metadata JSON + matrix CSV)
    Joint(JointArgs),
    /// Heralded single-photon shape from time-resolved detection
    Herald(HeraldArgs),
    /// Maximize the Gaussian shaping fidelity over the input parameters
    Optimize(OptimizeArgs),
}

#[derive(Args)]
struct GridArgs {
    /// Lower edge of the time window
    #[arg(long, default_value_t = -10.0)]
    grid_min: f64,
    /// Upper edge of the time window
    #[arg(long, default_value_t = 30.0)]
    grid_max: f64,
    /// Number of grid points
    #[arg(long, default_value_t = 2001)]
    grid_points: usize,
}

impl GridArgs {
    fn build(&self) -> CliResult<TimeGrid> {
        TimeGrid::new(self.grid_min, self.grid_max, self.grid_points)
            .map_err(|e| CliError::Usage(e.to_string()))
    }
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct ProbsArgs {
    /// Shape spec for input port 1 (JSON or @file)
    #[arg(long)]
    shape1: String,
    /// Shape spec for input port 2 (JSON or @file)
    #[arg(long)]
    shape2: String,
    /// Beam-splitter transmission t^2 in [0, 1]
    #[arg(long)]
    t_sq: f64,
    #[command(flatten)]
    grid: GridArgs,
    /// Output format: json or csv
    #[arg(long, default_value = "json")]
    format: String,
    /// Write output here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct SurfaceArgs {
    /// Outcome to tabulate: 11, 20 or 02
    #[arg(long)]
    outcome: String,
    #[arg(long, default_value_t = 0.0)]
    j_min: f64,
    #[arg(long, default_value_t = 1.0)]
    j_max: f64,
    #[arg(long, default_value_t = 101)]
    j_points: usize,
    #[arg(long, default_value_t = 0.0)]
    t_sq_min: f64,
    #[arg(long, default_value_t = 1.0)]
    t_sq_max: f64,
    #[arg(long, default_value_t = 101)]
    t_sq_points: usize,
    /// CSV output path (required)
    #[arg(long)]
    out: PathBuf,
    /// Output format (csv only)
    #[arg(long, default_value = "csv")]
    format: String,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct JointArgs {
    #[arg(long)]
    shape1: String,
    #[arg(long)]
    shape2: String,
    #[arg(long)]
    t_sq: f64,
    /// Outcome: 11, 20 or 02
    #[arg(long)]
    outcome: String,
    #[command(flatten)]
    grid: GridArgs,
    /// Matrix CSV path; metadata JSON lands next to it as .json (required)
    #[arg(long)]
    out: PathBuf,
    /// Output format (csv only)
    #[arg(long, default_value = "csv")]
    format: String,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct HeraldArgs {
    #[arg(long)]
    shape1: String,
    #[arg(long)]
    shape2: String,
    #[arg(long)]
    t_sq: f64,
    /// Heralding outcome: 11 or 20
    #[arg(long, default_value = "11")]
    outcome: String,
    /// Detection time
    #[arg(long)]
    t_dec: f64,
    /// Detector time resolution t_R (0 = ideal point detection)
    #[arg(long, default_value_t = 0.0)]
    t_r: f64,
    /// Target shape spec to score the fidelity against (JSON or @file)
    #[arg(long)]
    target: Option<String>,
    /// Sweep t_R over "start:stop:count" (all positive) instead of a
    /// single herald
    #[arg(long)]
    t_r_sweep: Option<String>,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value = "json")]
    format: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct OptimizeArgs {
    /// Problem spec (JSON or @file): {"target": {...}, "bounds": {...}, ...}
    #[arg(long)]
    problem: String,
    /// Objective-evaluation budget per restart (overrides the problem file)
    #[arg(long)]
    budget: Option<usize>,
    /// Number of restarts (overrides the problem file)
    #[arg(long)]
    restarts: Option<usize>,
    /// Random seed (overrides the problem file)
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Optimization problem file format.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemSpec {
    target: TemporalShape,
    #[serde(default)]
    bounds: Option<PartialBounds>,
    #[serde(default)]
    grid: Option<TimeGrid>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    budget: Option<usize>,
    #[serde(default)]
    restarts: Option<usize>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct PartialBounds {
    gamma1: Option<[f64; 2]>,
    gamma2: Option<[f64; 2]>,
    omega1: Option<[f64; 2]>,
    omega2: Option<[f64; 2]>,
    t: Option<[f64; 2]>,
    tau0: Option<[f64; 2]>,
    t_dec: Option<[f64; 2]>,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Ok(threads) = std::env::var("BIPHOTON_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => log::warn!("ignoring unparseable BIPHOTON_THREADS={threads:?}"),
        }
    }

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                std::process::exit(0);
            }
            let err = CliError::Usage(e.to_string());
            eprintln!("{}", err.to_json());
            std::process::exit(err.exit_code());
        }
    };

    if let Err(err) = execute(cli) {
        eprintln!("{}", err.to_json());
        std::process::exit(err.exit_code());
    }
}

fn execute(cli: Cli) -> CliResult<()> {
    let (config, out) = build_config(&cli.command)?;
    let rendered = run(&config)?;
    deliver(&cli.command, rendered, out)
}

/// Resolve CLI arguments into a reproducible config plus the output path.
/// All validation failures here are usage errors (exit 64).
fn build_config(command: &Command) -> CliResult<(RunConfig, Option<PathBuf>)> {
    match command {
        Command::Probs(a) => {
            let config = RunConfig::Probs {
                shape1: parse_shape(&a.shape1)?,
                shape2: parse_shape(&a.shape2)?,
                t_sq: parse_t_sq(a.t_sq)?,
                grid: a.grid.build()?,
                format: parse_format(&a.format, &[OutputFormat::Json, OutputFormat::Csv])?,
            };
            Ok((config, a.out.clone()))
        }
        Command::EntropySurface(a) => {
            parse_format(&a.format, &[OutputFormat::Csv])?;
            for (v, name) in [
                (a.j_min, "--j-min"),
                (a.j_max, "--j-max"),
                (a.t_sq_min, "--t-sq-min"),
                (a.t_sq_max, "--t-sq-max"),
            ] {
                if !(0.0..=1.0).contains(&v) {
                    return Err(CliError::Usage(format!("{name} must lie in [0, 1], got {v}")));
                }
            }
            let config = RunConfig::EntropySurface {
                outcome: parse_outcome(&a.outcome)?,
                j_min: a.j_min,
                j_max: a.j_max,
                j_points: a.j_points,
                t_sq_min: a.t_sq_min,
                t_sq_max: a.t_sq_max,
                t_sq_points: a.t_sq_points,
            };
            Ok((config, Some(a.out.clone())))
        }
        Command::Joint(a) => {
            parse_format(&a.format, &[OutputFormat::Csv])?;
            let config = RunConfig::Joint {
                shape1: parse_shape(&a.shape1)?,
                shape2: parse_shape(&a.shape2)?,
                t_sq: parse_t_sq(a.t_sq)?,
                outcome: parse_outcome(&a.outcome)?,
                grid: a.grid.build()?,
            };
            Ok((config, Some(a.out.clone())))
        }
        Command::Herald(a) => {
            let outcome = parse_outcome(&a.outcome)?;
            if outcome == Outcome::Out02 {
                return Err(CliError::Usage(
                    "herald detects port 1; --outcome must be 11 or 20".into(),
                ));
            }
            let t_r_sweep = a.t_r_sweep.as_deref().map(parse_sweep).transpose()?;
            let config = RunConfig::Herald {
                shape1: parse_shape(&a.shape1)?,
                shape2: parse_shape(&a.shape2)?,
                t_sq: parse_t_sq(a.t_sq)?,
                outcome,
                t_dec: a.t_dec,
                t_r: a.t_r,
                target: a.target.as_deref().map(parse_shape_str).transpose()?,
                t_r_sweep,
                grid: a.grid.build()?,
                format: parse_format(&a.format, &[OutputFormat::Json, OutputFormat::Csv])?,
            };
            Ok((config, a.out.clone()))
        }
        Command::Optimize(a) => {
            let text = resolve_at_file(&a.problem)?;
            let spec: ProblemSpec = serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("bad problem spec: {e}")))?;
            let TemporalShape::Gaussian { gamma, .. } = spec.target else {
                return Err(CliError::Usage(
                    "the optimize command shapes toward a Gaussian target; \
                     \"target\" must have kind \"gaussian\""
                        .into(),
                ));
            };
            let grid = spec.grid.unwrap_or(TimeGrid::new(-10.0, 30.0, 2001).expect("valid"));
            TimeGrid::new(grid.t_min(), grid.t_max(), grid.n_points())
                .map_err(|e| CliError::Usage(e.to_string()))?;
            let mut bounds = OptimizeBounds::defaults(&grid);
            if let Some(p) = spec.bounds {
                for (slot, given) in [
                    (&mut bounds.gamma1, p.gamma1),
                    (&mut bounds.gamma2, p.gamma2),
                    (&mut bounds.omega1, p.omega1),
                    (&mut bounds.omega2, p.omega2),
                    (&mut bounds.t, p.t),
                    (&mut bounds.tau0, p.tau0),
                    (&mut bounds.t_dec, p.t_dec),
                ] {
                    if let Some(b) = given {
                        if !(b[0].is_finite() && b[1].is_finite() && b[0] < b[1]) {
                            return Err(CliError::Usage(format!(
                                "bound [{}, {}] must be finite with lo < hi",
                                b[0], b[1]
                            )));
                        }
                        *slot = b;
                    }
                }
            }
            let config = RunConfig::Optimize {
                target_gamma: gamma,
                bounds,
                grid,
                seed: a.seed.or(spec.seed).unwrap_or(0),
                budget: a.budget.or(spec.budget).unwrap_or(5000),
                restarts: a.restarts.or(spec.restarts).unwrap_or(8),
            };
            Ok((config, a.out.clone()))
        }
    }
}

fn deliver(command: &Command, rendered: Rendered, out: Option<PathBuf>) -> CliResult<()> {
    match rendered {
        Rendered::Text(bytes) => match out {
            Some(path) => write_file(&path, &bytes),
            None => {
                std::io::stdout().write_all(&bytes)?;
                Ok(())
            }
        },
        Rendered::Csv(bytes) => {
            let path = out.expect("entropy-surface requires --out");
            write_file(&path, &bytes)?;
            let rows = bytes.iter().filter(|&&b| b == b'\n').count().saturating_sub(2);
            println!(
                "{}",
                serde_json::json!({ "out": path, "rows": rows })
            );
            Ok(())
        }
        Rendered::Pair { meta, csv } => {
            let Command::Joint(_) = command else { unreachable!() };
            let csv_path = out.expect("joint requires --out");
            let meta_path = csv_path.with_extension("json");
            write_file(&csv_path, &csv)?;
            write_file(&meta_path, &meta)?;
            println!(
                "{}",
                serde_json::json!({ "out": csv_path, "metadata": meta_path })
            );
            Ok(())
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    std::fs::write(path, bytes).map_err(CliError::Io)
}

/// Inline JSON, or the contents of a file when the argument starts with @.
fn resolve_at_file(arg: &str) -> CliResult<String> {
    if let Some(path) = arg.strip_prefix('@') {
        std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {path}: {e}")))
    } else {
        Ok(arg.to_string())
    }
}

fn parse_shape(arg: &str) -> CliResult<TemporalShape> {
    parse_shape_str(arg)
}

fn parse_shape_str(arg: &str) -> CliResult<TemporalShape> {
    let text = resolve_at_file(arg)?;
    TemporalShape::from_json(&text).map_err(|e| CliError::Usage(e.to_string()))
}

fn parse_t_sq(t_sq: f64) -> CliResult<f64> {
    if !(0.0..=1.0).contains(&t_sq) {
        return Err(CliError::Usage(format!("--t-sq must lie in [0, 1], got {t_sq}")));
    }
    Ok(t_sq)
}

fn parse_outcome(s: &str) -> CliResult<Outcome> {
    Outcome::parse(s).map_err(|e| CliError::Usage(e.to_string()))
}

fn parse_format(s: &str, allowed: &[OutputFormat]) -> CliResult<OutputFormat> {
    let format = match s {
        "json" => OutputFormat::Json,
        "csv" => OutputFormat::Csv,
        other => return Err(CliError::Usage(format!("unknown format {other:?}"))),
    };
    if !allowed.contains(&format) {
        return Err(CliError::Usage(format!(
            "format {s:?} is not supported by this command"
        )));
    }
    Ok(format)
}

/// "start:stop:count" with every value positive.
fn parse_sweep(s: &str) -> CliResult<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let [start, stop, count] = parts.as_slice() else {
        return Err(CliError::Usage(format!(
            "--t-r-sweep expects start:stop:count, got {s:?}"
        )));
    };
    let start: f64 = start
        .parse()
        .map_err(|_| CliError::Usage(format!("bad sweep start {start:?}")))?;
    let stop: f64 = stop
        .parse()
        .map_err(|_| CliError::Usage(format!("bad sweep stop {stop:?}")))?;
    let count: usize = count
        .parse()
        .map_err(|_| CliError::Usage(format!("bad sweep count {count:?}")))?;
    if !(start > 0.0) || stop < start || count == 0 {
        return Err(CliError::Usage(
            "sweep needs 0 < start <= stop and count >= 1".into(),
        ));
    }
    Ok((0..count)
        .map(|i| {
            if count == 1 {
                start
            } else {
                start + (stop - start) * i as f64 / (count - 1) as f64
            }
        })
        .collect())
}
