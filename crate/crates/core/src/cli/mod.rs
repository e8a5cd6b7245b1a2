//! The `rdl` command-line front end.
//!
//! Exit codes: 0 success, 2 invalid input, 3 infeasible request, 4 I/O failure.

pub mod config;
pub mod format;
pub mod sweep;

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use self::config::{check_range, DistortionSpec, RunConfigFile, SweepTarget};
use self::format::sig;
use crate::error::RdlError;
use crate::model::{derive, DerivedQuantities, SystemParams};
use crate::sim::{self, Directions, SimConfig};
use crate::tradeoff::{tradeoff_with, DistortionRequest};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_IO: i32 = 4;

pub const DEFAULT_SAMPLES: usize = 100_000;
pub const DEFAULT_POINTS: usize = 101;
pub const SEED_ENV: &str = "RDL_SEED";

#[derive(Debug, Parser)]
#[command(name = "rdl", version, about = "Rate-distortion-leakage tradeoff between two measurement areas")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the feasible distortion and leakage ranges.
    Bounds {
        #[command(flatten)]
        system: SystemArgs,
        /// `json` for machine-readable output; plain text otherwise.
        #[arg(long)]
        format: Option<OutputFormat>,
    },
    /// Evaluate rates and leakages for one distortion pair (JSON).
    Tradeoff {
        #[command(flatten)]
        system: SystemArgs,
        #[command(flatten)]
        request: RequestArgs,
    },
    /// Sweep one distortion across its feasible interval.
    Sweep {
        #[command(flatten)]
        system: SystemArgs,
        #[arg(long, value_enum)]
        target: Option<SweepTarget>,
        #[arg(long)]
        points: Option<usize>,
        /// Fractions of the feasible interval, e.g. `0.1,0.9`.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        range: Option<Vec<f64>>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        format: Option<OutputFormat>,
    },
    /// Monte Carlo run of the exchange (JSON report).
    Simulate {
        #[command(flatten)]
        system: SystemArgs,
        #[command(flatten)]
        request: RequestArgs,
        #[arg(long, visible_alias = "samples")]
        n: Option<usize>,
        /// Falls back to the config file, then `RDL_SEED`, then 0.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        directions: Option<String>,
        /// Worker threads for sampling; output does not depend on it.
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct SystemArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    #[arg(long = "sigma1-sq", allow_hyphen_values = true)]
    pub sigma1_sq: Option<f64>,
    #[arg(long = "sigma2-sq", allow_hyphen_values = true)]
    pub sigma2_sq: Option<f64>,
    /// TOML or JSON run configuration; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct RequestArgs {
    /// Number, `min`, `max` or `frac:t`.
    #[arg(long, allow_hyphen_values = true)]
    pub d1: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub d2: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Text,
    Csv,
    Json,
}

/// A command failure carrying its exit code.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Infeasible(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Infeasible(_) => EXIT_INFEASIBLE,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::Infeasible(m) => write!(f, "infeasible: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<RdlError> for CliError {
    fn from(e: RdlError) -> Self {
        match e {
            RdlError::InfeasibleDistortion { .. } => CliError::Infeasible(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

fn io_err(path: Option<&Path>) -> impl Fn(io::Error) -> CliError + '_ {
    move |e| match path {
        Some(p) => CliError::Io(format!("{}: {e}", p.display())),
        None => CliError::Io(e.to_string()),
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn main_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = write!(sink, "{}", e.render());
            return e.exit_code();
        }
    };
    match execute(cli.command, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "rdl: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command, stdout: &mut dyn Write) -> Result<i32, CliError> {
    match command {
        Command::Bounds { system, format } => {
            let file = load_config(&system)?;
            let params = resolve_params(&system, &file)?;
            cmd_bounds(&params, format.unwrap_or(OutputFormat::Text), stdout)
        }
        Command::Tradeoff { system, request } => {
            let file = load_config(&system)?;
            let params = resolve_params(&system, &file)?;
            let (d1, d2) = resolve_request_specs(&request, &file)?;
            cmd_tradeoff(&params, d1, d2, stdout)
        }
        Command::Sweep {
            system,
            target,
            points,
            range,
            out,
            format,
        } => {
            let file = load_config(&system)?;
            let params = resolve_params(&system, &file)?;
            let target = target.or(file.sweep.target).unwrap_or_default();
            let points = points.or(file.sweep.points).unwrap_or(DEFAULT_POINTS);
            let range = match range {
                Some(v) => match v[..] {
                    [lo, hi] => [lo, hi],
                    _ => return Err(CliError::Validation(format!("--range takes two values lo,hi, got {}", v.len()))),
                },
                None => file.sweep.range.unwrap_or([0.0, 1.0]),
            };
            check_range(range).map_err(CliError::Validation)?;
            let format = format.unwrap_or(OutputFormat::Csv);
            cmd_sweep(&params, target, points, range, format, out.as_deref(), stdout)
        }
        Command::Simulate {
            system,
            request,
            n,
            seed,
            directions,
            threads,
            out,
        } => {
            let file = load_config(&system)?;
            let params = resolve_params(&system, &file)?;
            let (d1, d2) = resolve_request_specs(&request, &file)?;
            let q = derive(&params)?;
            let request = resolve_request(&q, d1, d2)?;
            let directions = match directions {
                Some(s) => s.parse::<Directions>()?,
                None => file.sim.directions.unwrap_or_default(),
            };
            let seed = match seed.or(file.sim.seed) {
                Some(s) => s,
                None => env_seed()?.unwrap_or(0),
            };
            let config = SimConfig {
                params,
                request,
                n: n.or(file.sim.n).unwrap_or(DEFAULT_SAMPLES),
                seed,
                directions,
            };
            cmd_simulate(&config, threads, out.as_deref(), stdout)
        }
    }
}

fn env_seed() -> Result<Option<u64>, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Validation(format!("{SEED_ENV} must be an unsigned integer, got {s:?}"))),
        Err(_) => Ok(None),
    }
}

fn load_config(system: &SystemArgs) -> Result<RunConfigFile, CliError> {
    match &system.config {
        Some(path) => RunConfigFile::load(path).map_err(CliError::Validation),
        None => Ok(RunConfigFile::default()),
    }
}

pub fn resolve_params(system: &SystemArgs, file: &RunConfigFile) -> Result<SystemParams, CliError> {
    let pick = |flag: Option<f64>, from_file: Option<f64>, name: &str| {
        flag.or(from_file).ok_or_else(|| {
            CliError::Validation(format!("missing `{name}` (pass --{} or set it in [system])", name.replace('_', "-")))
        })
    };
    let s = &file.system;
    let params = SystemParams {
        alpha: pick(system.alpha, s.alpha, "alpha")?,
        beta: pick(system.beta, s.beta, "beta")?,
        sigma1_sq: pick(system.sigma1_sq, s.sigma1_sq, "sigma1_sq")?,
        sigma2_sq: pick(system.sigma2_sq, s.sigma2_sq, "sigma2_sq")?,
    };
    params.validate()?;
    Ok(params)
}

fn resolve_request_specs(args: &RequestArgs, file: &RunConfigFile) -> Result<(DistortionSpec, DistortionSpec), CliError> {
    let parse = |flag: &Option<String>, from_file: Option<DistortionSpec>, name: &str| -> Result<DistortionSpec, CliError> {
        match flag {
            Some(s) => s.parse().map_err(|e| CliError::Validation(format!("--{name}: {e}"))),
            None => Ok(from_file.unwrap_or(DistortionSpec::Max)),
        }
    };
    Ok((
        parse(&args.d1, file.request.d1, "d1")?,
        parse(&args.d2, file.request.d2, "d2")?,
    ))
}

pub fn resolve_request(q: &DerivedQuantities, d1: DistortionSpec, d2: DistortionSpec) -> Result<DistortionRequest, CliError> {
    Ok(DistortionRequest::new(
        d1.resolve(q.d_min_1, q.d_max_1),
        d2.resolve(q.d_min_2, q.d_max_2),
    )?)
}

#[derive(Serialize)]
struct BoundsReport<'a> {
    params: &'a SystemParams,
    derived: &'a DerivedQuantities,
}

pub fn cmd_bounds(params: &SystemParams, format: OutputFormat, out: &mut dyn Write) -> Result<i32, CliError> {
    let q = derive(params)?;
    match format {
        OutputFormat::Json => emit_json(&BoundsReport { params, derived: &q }, out)?,
        OutputFormat::Text => {
            let text = format!(
                "alpha={} beta={} sigma1_sq={} sigma2_sq={}\n\
                 V1={} V2={} E={} det={}\n\
                 RTO 1: D1 in [{}, {}]  L1 in [{}, {}] bits\n\
                 RTO 2: D2 in [{}, {}]  L2 in [{}, {}] bits\n",
                sig(params.alpha),
                sig(params.beta),
                sig(params.sigma1_sq),
                sig(params.sigma2_sq),
                sig(q.v1),
                sig(q.v2),
                sig(q.e),
                sig(q.det),
                sig(q.d_min_1),
                sig(q.d_max_1),
                sig(q.l1_min),
                sig(q.l1_max),
                sig(q.d_min_2),
                sig(q.d_max_2),
                sig(q.l2_min),
                sig(q.l2_max),
            );
            out.write_all(text.as_bytes()).map_err(io_err(None))?;
        }
        OutputFormat::Csv => return Err(CliError::Validation("bounds supports --format text or json".into())),
    }
    Ok(EXIT_OK)
}

pub fn cmd_tradeoff(params: &SystemParams, d1: DistortionSpec, d2: DistortionSpec, out: &mut dyn Write) -> Result<i32, CliError> {
    let q = derive(params)?;
    let request = resolve_request(&q, d1, d2)?;
    let point = tradeoff_with(&q, params, &request)?;
    emit_json(&point, out)?;
    Ok(if point.any_infeasible() { EXIT_INFEASIBLE } else { EXIT_OK })
}

pub fn cmd_sweep(
    params: &SystemParams,
    target: SweepTarget,
    points: usize,
    range: [f64; 2],
    format: OutputFormat,
    path: Option<&Path>,
    stdout: &mut dyn Write,
) -> Result<i32, CliError> {
    let records = sweep::sweep(params, target, points, range)?;
    let mut buf = Vec::new();
    match format {
        OutputFormat::Csv => sweep::write_csv(&records, &mut buf).map_err(io_err(None))?,
        OutputFormat::Json => emit_json(&records, &mut buf)?,
        OutputFormat::Text => return Err(CliError::Validation("sweep supports --format csv or json".into())),
    }
    write_output(&buf, path, stdout)?;
    Ok(EXIT_OK)
}

pub fn cmd_simulate(config: &SimConfig, threads: Option<usize>, path: Option<&Path>, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let report = match threads {
        Some(0) => return Err(CliError::Validation("--threads must be at least 1".into())),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| CliError::Io(e.to_string()))?
            .install(|| sim::run(config))?,
        None => sim::run(config)?,
    };
    let mut buf = Vec::new();
    emit_json(&report, &mut buf)?;
    write_output(&buf, path, stdout)?;
    Ok(EXIT_OK)
}

fn emit_json<T: Serialize + ?Sized>(value: &T, out: &mut dyn Write) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    writeln!(out, "{text}").map_err(io_err(None))
}

fn write_output(bytes: &[u8], path: Option<&Path>, stdout: &mut dyn Write) -> Result<(), CliError> {
    match path {
        Some(p) => {
            let file = File::create(p).map_err(io_err(Some(p)))?;
            let mut w = BufWriter::new(file);
            w.write_all(bytes).map_err(io_err(Some(p)))?;
            w.flush().map_err(io_err(Some(p)))
        }
        None => stdout.write_all(bytes).map_err(io_err(None)),
    }
}
