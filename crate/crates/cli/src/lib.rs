//! The `spliceboot` command-line tool.
//!
//! Four subcommands: `simulate` writes a series from a known model, `fit`
//! reports least-squares estimates, `interval` builds prediction intervals
//! for the end of a series and `coverage` runs simulation studies. Every
//! machine-readable output carries the seed, a digest of the run's
//! configuration and the tool version.

mod input;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use spliceboot::backcast::{ts_predictive, BackcastConfig};
use spliceboot::ck::ck_intervals;
use spliceboot::coverage::{emit_csv, emit_table, CoverageReport, Method, Preset, ScenarioModel};
use spliceboot::splice::DEFAULT_BURN_IN;
use spliceboot::{
    fit, sb_predictive, simulate, summarize, ErrorClass, ModelSpec, NoiseKind, NoiseSpec, RandomStream, SpliceConfig,
};

pub use input::{parse_model, parse_series, read_series, sha256_hex, SimulationModel};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Lib(#[from] spliceboot::Error),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    /// 2 configuration, 3 data, 4 numerical failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Lib(e) => match e.class() {
                ErrorClass::Config => 2,
                ErrorClass::Data => 3,
                ErrorClass::Numerical => 4,
            },
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "spliceboot",
    version,
    about = "Conditional bootstrap prediction intervals for autoregressions"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a simulated series as CSV.
    Simulate(SimulateArgs),
    /// Fit a model to a series.
    Fit(FitArgs),
    /// Prediction intervals for the next K values of a series.
    Interval(IntervalArgs),
    /// Conditional coverage study.
    Coverage(CoverageArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum IntervalMethod {
    Sb,
    Backcast,
    Ck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StudyMethod {
    Sb,
    Backcast,
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// ar1-{normal,exp,mixture} or setar-{normal,exp,mixture}
    #[arg(long, conflicts_with = "model")]
    pub preset: Option<String>,
    /// JSON (inline or file) with `dynamics` and optional `noise`.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = DEFAULT_BURN_IN)]
    pub burn_in: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// ar<p>, setar, or a JSON model spec (inline or file).
    #[arg(long, default_value = "ar1")]
    pub model: String,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct IntervalArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "ar1")]
    pub model: String,
    #[arg(long, value_enum, default_value = "sb")]
    pub method: IntervalMethod,
    #[arg(long, default_value_t = spliceboot::splice::DEFAULT_REPLICATES)]
    pub b: usize,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = 0.9)]
    pub beta: f64,
    /// Noise law assumed by the ck oracle, scaled to the residual sd.
    #[arg(long, default_value = "normal")]
    pub noise: String,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct CoverageArgs {
    /// A preset name such as ar1_normal_100, `all`, or a preset JSON file.
    #[arg(long)]
    pub preset: String,
    #[arg(long, value_enum)]
    pub method: Option<StudyMethod>,
    #[arg(long)]
    pub b: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub reps: Option<usize>,
    /// True futures per replication.
    #[arg(long)]
    pub r: Option<usize>,
    #[command(flatten)]
    pub common: Common,
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let common = match &cli.command {
        Command::Simulate(a) => &a.common,
        Command::Fit(a) => &a.common,
        Command::Interval(a) => &a.common,
        Command::Coverage(a) => &a.common,
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = common.threads {
        if t == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Interval(a) => cmd_interval(a),
        Command::Coverage(a) => cmd_coverage(a),
    })
}

fn config_hash(config: &Value) -> String {
    sha256_hex(serde_json::to_string(config).expect("json value").as_bytes())
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Data(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable report");
    s.push('\n');
    s
}

fn csv_banner(command: &str, seed: Option<u64>, hash: &str) -> String {
    match seed {
        Some(s) => format!("# spliceboot {VERSION} {command} seed={s} config_hash={hash}\n"),
        None => format!("# spliceboot {VERSION} {command} config_hash={hash}\n"),
    }
}

/// Named simulation presets: the two reference models with each noise law.
pub fn simulation_preset(name: &str) -> Result<SimulationModel, CliError> {
    let unknown = || CliError::Config(format!("unknown preset {name:?}"));
    let (model, noise) = name.split_once('-').ok_or_else(unknown)?;
    let model = match model {
        "ar1" => ScenarioModel::Ar1,
        "setar" => ScenarioModel::Setar211,
        _ => return Err(unknown()),
    };
    let kind: NoiseKind = noise.parse().map_err(|_| unknown())?;
    Ok(SimulationModel {
        dynamics: model.dynamics(),
        noise: NoiseSpec::scaled(kind, model.noise_scale()),
    })
}

fn cmd_simulate(a: &SimulateArgs) -> Result<(), CliError> {
    let model = match (&a.preset, &a.model) {
        (Some(p), None) => simulation_preset(p)?,
        (None, Some(m)) => input::parse_simulation_model(m)?,
        _ => return Err(CliError::Config("simulate needs --preset or --model".into())),
    };
    let seed = a.common.seed.unwrap_or(1);
    let lag = model.dynamics.max_lag();
    let series = simulate(
        &model.dynamics,
        &model.noise,
        a.n,
        a.burn_in,
        &vec![0.0; lag],
        &mut RandomStream::new(seed, 0),
    )?;
    let hash = config_hash(&json!({
        "command": "simulate",
        "model": model,
        "n": a.n,
        "burn_in": a.burn_in,
        "seed": seed,
    }));
    let text = match a.common.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut out = csv_banner("simulate", Some(seed), &hash);
            out.push_str("value\n");
            for v in series.values() {
                let _ = writeln!(out, "{v}");
            }
            out
        }
        Format::Json => to_json(&json!({
            "version": VERSION,
            "seed": seed,
            "config_hash": hash,
            "model": model,
            "n": a.n,
            "values": series.values(),
        })),
    };
    write_output(a.common.output.as_deref(), &text)
}

fn cmd_fit(a: &FitArgs) -> Result<(), CliError> {
    let (series, digest) = read_series(&a.input)?;
    let spec = parse_model(&a.model)?;
    let model = fit(&series, &spec)?;
    let seed = a.common.seed.unwrap_or(1);
    let hash = config_hash(&json!({
        "command": "fit",
        "model": spec,
        "input_sha256": digest,
        "seed": seed,
    }));
    let res = &model.residuals;
    let res_summary = json!({
        "count": res.len(),
        "mean": res.iter().sum::<f64>() / res.len() as f64,
        "sd": summarize(res).map(|s| s.sd).ok(),
        "min": res.iter().copied().fold(f64::INFINITY, f64::min),
        "max": res.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    });
    let text = match a.common.format.unwrap_or(Format::Json) {
        Format::Json => to_json(&json!({
            "version": VERSION,
            "seed": seed,
            "config_hash": hash,
            "n": model.n,
            "spec": spec,
            "coefficients": model.dynamics,
            "threshold": model.threshold(),
            "sse": model.sse,
            "residuals": res_summary,
            "regime_counts": model.regime_counts,
        })),
        Format::Csv => {
            let mut out = csv_banner("fit", Some(seed), &hash);
            out.push_str("parameter,value\n");
            match &model.dynamics {
                spliceboot::Dynamics::Ar(r) => {
                    let _ = writeln!(out, "intercept,{}", r.intercept);
                    for (j, w) in r.lags.iter().enumerate() {
                        let _ = writeln!(out, "lag{},{w}", j + 1);
                    }
                }
                spliceboot::Dynamics::Setar {
                    delay,
                    threshold,
                    low,
                    high,
                } => {
                    let _ = writeln!(out, "delay,{delay}");
                    let _ = writeln!(out, "threshold,{threshold}");
                    for (name, r) in [("low", low), ("high", high)] {
                        let _ = writeln!(out, "{name}.intercept,{}", r.intercept);
                        for (j, w) in r.lags.iter().enumerate() {
                            let _ = writeln!(out, "{name}.lag{},{w}", j + 1);
                        }
                    }
                }
            }
            let _ = writeln!(out, "sse,{}", model.sse);
            let _ = writeln!(out, "n,{}", model.n);
            out
        }
    };
    write_output(a.common.output.as_deref(), &text)
}

#[derive(Serialize)]
struct IntervalRow {
    k: usize,
    point_forecast: f64,
    #[serde(rename = "L")]
    lower: f64,
    #[serde(rename = "U")]
    upper: f64,
    length: f64,
}

fn cmd_interval(a: &IntervalArgs) -> Result<(), CliError> {
    let (series, digest) = read_series(&a.input)?;
    let spec = parse_model(&a.model)?;
    let seed = a.common.seed.unwrap_or(1);
    let stream = RandomStream::new(seed, 0);
    let mut noise_used = None;
    let (last_p, point, intervals, rejections, rejection_rate) = match a.method {
        IntervalMethod::Sb => {
            let fan = sb_predictive(&series, &spec, &SpliceConfig::new(a.b, a.k), a.beta, &stream)?;
            (
                fan.last_p,
                fan.point_forecast,
                fan.intervals,
                fan.rejections,
                fan.rejection_rate,
            )
        }
        IntervalMethod::Backcast => {
            let ModelSpec::Ar { p, intercept: false } = spec else {
                return Err(spliceboot::Error::MethodMismatch(
                    "the backcast bootstrap needs an AR model without intercept".into(),
                )
                .into());
            };
            let cfg = BackcastConfig {
                replicates: a.b,
                horizon: a.k,
            };
            let fan = ts_predictive(&series, p, &cfg, a.beta, &stream)?;
            (
                fan.last_p,
                fan.point_forecast,
                fan.intervals,
                fan.rejections,
                fan.rejection_rate,
            )
        }
        IntervalMethod::Ck => {
            if spec.max_lag() != 1 {
                return Err(spliceboot::Error::MethodMismatch("the ck oracle handles lag-1 models only".into()).into());
            }
            let model = fit(&series, &spec)?;
            let kind = input::parse_noise(&a.noise)?;
            let sd = summarize(&model.residuals)?.sd;
            let noise = NoiseSpec::scaled(kind, sd / kind.sd());
            let last_p = series.tail(1).to_vec();
            let intervals = ck_intervals(&model.dynamics, &noise, last_p[0], a.k, a.beta)?;
            let point = model.plugin_forecast(&last_p, a.k)?;
            noise_used = Some(noise);
            (last_p, point, intervals, 0, 0.0)
        }
    };
    let replicates = (a.method != IntervalMethod::Ck).then_some(a.b);
    let hash = config_hash(&json!({
        "command": "interval",
        "method": a.method,
        "model": spec,
        "B": replicates,
        "k": a.k,
        "beta": a.beta,
        "noise": noise_used.map(|n| n.kind),
        "input_sha256": digest,
        "seed": seed,
    }));
    let rows: Vec<IntervalRow> = intervals
        .iter()
        .zip(&point)
        .map(|(pi, &f)| IntervalRow {
            k: pi.horizon,
            point_forecast: f,
            lower: pi.lower,
            upper: pi.upper,
            length: pi.length,
        })
        .collect();
    let text = match a.common.format.unwrap_or(Format::Json) {
        Format::Json => to_json(&json!({
            "version": VERSION,
            "seed": seed,
            "config_hash": hash,
            "method": a.method,
            "model": spec,
            "n": series.len(),
            "B": replicates,
            "beta": a.beta,
            "noise": noise_used,
            "last_p": last_p,
            "rejections": rejections,
            "rejection_rate": rejection_rate,
            "intervals": rows,
        })),
        Format::Csv => {
            let mut out = csv_banner("interval", Some(seed), &hash);
            out.push_str("k,point_forecast,L,U,length\n");
            for r in &rows {
                let _ = writeln!(out, "{},{},{},{},{}", r.k, r.point_forecast, r.lower, r.upper, r.length);
            }
            out
        }
    };
    write_output(a.common.output.as_deref(), &text)
}

fn load_presets(arg: &str) -> Result<Vec<Preset>, CliError> {
    if arg == "all" {
        return Ok(Preset::all());
    }
    if let Some(p) = Preset::builtin(arg) {
        return Ok(vec![p]);
    }
    let path = Path::new(arg);
    if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {arg}: {e}")))?;
        let preset: Preset =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("invalid preset {arg}: {e}")))?;
        return Ok(vec![preset]);
    }
    Err(CliError::Config(format!("unknown preset {arg:?}")))
}

#[derive(Serialize)]
struct Panel {
    name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<CoverageReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn cmd_coverage(a: &CoverageArgs) -> Result<(), CliError> {
    let mut presets = load_presets(&a.preset)?;
    for p in &mut presets {
        if let Some(m) = a.method {
            p.method = match m {
                StudyMethod::Sb => Method::Sb,
                StudyMethod::Backcast => Method::Backcast,
            };
        }
        let c = &mut p.config;
        c.b = a.b.unwrap_or(c.b);
        c.k = a.k.unwrap_or(c.k);
        c.beta = a.beta.unwrap_or(c.beta);
        c.reps = a.reps.unwrap_or(c.reps);
        c.r = a.r.unwrap_or(c.r);
        if let Some(seed) = a.common.seed {
            p.scenario.seed = seed;
        }
    }
    let hash = config_hash(&json!({ "command": "coverage", "presets": presets }));

    let mut panels = Vec::with_capacity(presets.len());
    let mut first_error = None;
    for p in &presets {
        match p.run() {
            Ok(report) => panels.push(Panel {
                name: p.name.clone(),
                report: Some(report),
                error: None,
            }),
            Err(e) => {
                panels.push(Panel {
                    name: p.name.clone(),
                    report: None,
                    error: Some(e.to_string()),
                });
                first_error.get_or_insert(e);
            }
        }
    }
    let reports: Vec<CoverageReport> = panels.iter().filter_map(|p| p.report.clone()).collect();
    let json_text = to_json(&json!({
        "version": VERSION,
        "seed": a.common.seed,
        "config_hash": hash,
        "panels": panels,
    }));
    let csv_text = csv_banner("coverage", a.common.seed, &hash) + &emit_csv(&reports);
    let table = emit_table(&reports);
    eprint!("{table}");
    let format = a.common.format.unwrap_or(Format::Json);
    let primary = match format {
        Format::Json => &json_text,
        Format::Csv => &csv_text,
    };
    write_output(a.common.output.as_deref(), primary)?;
    if let Some(out) = &a.common.output {
        let (other, ext) = match format {
            Format::Json => (&csv_text, "csv"),
            Format::Csv => (&json_text, "json"),
        };
        write_output(Some(&out.with_extension(ext)), other)?;
        write_output(Some(&out.with_extension("txt")), &table)?;
    }
    match first_error {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}
