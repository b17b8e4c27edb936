//! Monte Carlo study of conditional coverage.
//!
//! One replication simulates a realization from the true model, draws R
//! true futures from its own last p values, builds a bootstrap interval fan
//! from the realization and scores the fraction of futures inside each
//! horizon's interval. Reports average coverage and length over replications.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::armodels::{simulate, Dynamics, ModelSpec, Threshold};
use crate::backcast::{ts_predictive, BackcastConfig};
use crate::error::{Error, Result};
use crate::noise::{Innovation, NoiseKind, NoiseSpec, RandomStream};
use crate::series::{summarize, PredictionInterval};
use crate::splice::{sb_predictive_from, ForecastFan, ModelSource, SpliceConfig, DEFAULT_BURN_IN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioModel {
    /// y_t = -0.8 y_{t-1} + e_t
    Ar1,
    /// Two lag-1 regimes with slopes 0.7 (y_{t-1} ≤ 0) and 0.3.
    Setar211,
}

impl ScenarioModel {
    pub fn dynamics(self) -> Dynamics {
        match self {
            ScenarioModel::Ar1 => Dynamics::reference_ar1(),
            ScenarioModel::Setar211 => Dynamics::reference_setar(),
        }
    }

    /// Innovation scale used by the replication presets.
    pub fn noise_scale(self) -> f64 {
        match self {
            ScenarioModel::Ar1 => 1.0,
            ScenarioModel::Setar211 => 0.5,
        }
    }

    pub fn fit_spec(self, threshold: Threshold) -> ModelSpec {
        match self {
            ScenarioModel::Ar1 => ModelSpec::ar(1),
            ScenarioModel::Setar211 => ModelSpec::setar(1, 1, 1, threshold),
        }
    }

    pub fn preset_sizes(self) -> [usize; 3] {
        match self {
            ScenarioModel::Ar1 => [25, 50, 100],
            ScenarioModel::Setar211 => [100, 250, 500],
        }
    }

    fn short_name(self) -> &'static str {
        match self {
            ScenarioModel::Ar1 => "ar1",
            ScenarioModel::Setar211 => "setar",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Sb,
    Backcast,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Sb => "sb",
            Method::Backcast => "backcast",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub model: ScenarioModel,
    pub noise: NoiseKind,
    pub n: usize,
    pub seed: u64,
    /// Innovation scale; defaults to the model's preset scale.
    #[serde(default)]
    pub noise_scale: Option<f64>,
}

impl Scenario {
    pub fn new(model: ScenarioModel, noise: NoiseKind, n: usize, seed: u64) -> Self {
        Self {
            model,
            noise,
            n,
            seed,
            noise_scale: None,
        }
    }

    pub fn noise_spec(&self) -> NoiseSpec {
        NoiseSpec::scaled(self.noise, self.noise_scale.unwrap_or(self.model.noise_scale()))
    }

    /// Preset-style name, e.g. `ar1_normal_100`.
    pub fn name(&self) -> String {
        format!("{}_{}_{}", self.model.short_name(), self.noise.name(), self.n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageConfig {
    /// Bootstrap replicates B per interval.
    pub b: usize,
    /// Horizon K.
    pub k: usize,
    /// True futures R per replication.
    pub r: usize,
    pub reps: usize,
    pub beta: f64,
    #[serde(default = "estimate")]
    pub threshold: Threshold,
    /// Use the true coefficients instead of fitting (splice bootstrap only).
    #[serde(default)]
    pub rigged: bool,
    #[serde(default = "yes")]
    pub random_start: bool,
    #[serde(default = "yes")]
    pub center_pools: bool,
    /// Fresh-seed retries allowed per replication after a bootstrap failure.
    #[serde(default = "default_retries")]
    pub retries: usize,
}

fn estimate() -> Threshold {
    Threshold::Estimate
}

fn yes() -> bool {
    true
}

fn default_retries() -> usize {
    5
}

impl Default for CoverageConfig {
    fn default() -> Self {
        Self {
            b: 999,
            k: 5,
            r: 100,
            reps: 100,
            beta: 0.9,
            threshold: Threshold::Estimate,
            rigged: false,
            random_start: true,
            center_pools: true,
            retries: default_retries(),
        }
    }
}

/// One row per horizon. Coverage is a fraction in [0, 1]; the `pct_*`
/// columns are the percentage-scale dispersions printed by [`emit_table`]
/// (100 × sd of coverage, and the length's coefficient of variation in %).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageRow {
    pub k: usize,
    pub mean_coverage: f64,
    pub se_coverage: f64,
    pub sd_coverage: f64,
    pub pct_se_coverage: f64,
    pub mean_length: f64,
    pub se_length: f64,
    pub sd_length: f64,
    pub pct_se_length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Replication {
    pub index: usize,
    /// Retries used before this replication produced a fan.
    pub retries: usize,
    pub last_p: Vec<f64>,
    pub coverage: Vec<f64>,
    pub intervals: Vec<PredictionInterval>,
    pub rejection_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub scenario: Scenario,
    pub method: Method,
    pub config: CoverageConfig,
    pub rows: Vec<CoverageRow>,
    pub failed_attempts: usize,
    pub mean_rejection_rate: f64,
    pub max_rejection_rate: f64,
    pub replications: Vec<Replication>,
}

/// R independent paths of the true recursion continuing from `last_p`.
pub fn true_future_draws(
    dynamics: &Dynamics,
    noise: &dyn Innovation,
    last_p: &[f64],
    horizon: usize,
    paths: usize,
    stream: &RandomStream,
) -> Vec<Vec<f64>> {
    let mut rng = stream.clone();
    (0..paths)
        .map(|_| dynamics.forecast_path(last_p, horizon, noise, &mut rng))
        .collect()
}

fn fan_for(
    sc: &Scenario,
    method: Method,
    cfg: &CoverageConfig,
    series: &crate::series::TimeSeries,
    stream: &RandomStream,
) -> Result<ForecastFan> {
    match method {
        Method::Sb => {
            let source = if cfg.rigged {
                ModelSource::Known(sc.model.dynamics())
            } else {
                ModelSource::Fit(sc.model.fit_spec(cfg.threshold))
            };
            let mut splice = SpliceConfig::new(cfg.b, cfg.k);
            splice.random_start = cfg.random_start;
            splice.center_pools = cfg.center_pools;
            sb_predictive_from(series, &source, &splice, cfg.beta, stream)
        }
        Method::Backcast => {
            let bc = BackcastConfig {
                replicates: cfg.b,
                horizon: cfg.k,
            };
            ts_predictive(series, 1, &bc, cfg.beta, stream)
        }
    }
}

fn check_applicable(sc: &Scenario, method: Method, cfg: &CoverageConfig) -> Result<()> {
    if method == Method::Backcast && sc.model != ScenarioModel::Ar1 {
        return Err(Error::MethodMismatch(
            "the backcast bootstrap applies to linear AR models only".into(),
        ));
    }
    if method == Method::Backcast && cfg.rigged {
        return Err(Error::MethodMismatch(
            "rigged runs are defined for the splice bootstrap only".into(),
        ));
    }
    if cfg.reps < 2 || cfg.r == 0 || cfg.k == 0 || cfg.b == 0 {
        return Err(Error::InvalidSpec(
            "coverage runs need reps >= 2 and positive B, K and R".into(),
        ));
    }
    if sc.n <= 2 {
        return Err(Error::SeriesTooShort { needed: 3, got: sc.n });
    }
    crate::series::check_level(cfg.beta)
}

fn replicate(sc: &Scenario, method: Method, cfg: &CoverageConfig, index: usize) -> Result<Replication> {
    let truth = sc.model.dynamics();
    let noise = sc.noise_spec();
    let p = truth.max_lag();
    let base = RandomStream::new(sc.seed, 0).derive(index as u64);
    let mut last_err = None;
    for attempt in 0..=cfg.retries {
        let stream = base.derive(attempt as u64);
        let series = simulate(
            &truth,
            &noise,
            sc.n,
            DEFAULT_BURN_IN,
            &vec![0.0; p],
            &mut stream.derive(0),
        )?;
        let last_p = series.tail(p).to_vec();
        let futures = true_future_draws(&truth, &noise, &last_p, cfg.k, cfg.r, &stream.derive(1));
        match fan_for(sc, method, cfg, &series, &stream.derive(2)) {
            Ok(fan) => {
                let coverage = fan
                    .intervals
                    .iter()
                    .enumerate()
                    .map(|(k, pi)| {
                        let hits = futures.iter().filter(|path| pi.contains(path[k])).count();
                        hits as f64 / cfg.r as f64
                    })
                    .collect();
                return Ok(Replication {
                    index,
                    retries: attempt,
                    last_p,
                    coverage,
                    intervals: fan.intervals,
                    rejection_rate: fan.rejection_rate,
                });
            }
            Err(e) if e.class() == crate::error::ErrorClass::Config => return Err(e),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.expect("at least one attempt"))
}

pub fn run_scenario(sc: &Scenario, method: Method, cfg: &CoverageConfig) -> Result<CoverageReport> {
    check_applicable(sc, method, cfg)?;
    let replications = (0..cfg.reps)
        .into_par_iter()
        .map(|j| replicate(sc, method, cfg, j))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    summarize_report(*sc, method, cfg.clone(), replications)
}

fn summarize_report(
    scenario: Scenario,
    method: Method,
    config: CoverageConfig,
    replications: Vec<Replication>,
) -> Result<CoverageReport> {
    let rows = (0..config.k)
        .map(|k| {
            let cov: Vec<f64> = replications.iter().map(|r| r.coverage[k]).collect();
            let len: Vec<f64> = replications.iter().map(|r| r.intervals[k].length).collect();
            let c = summarize(&cov)?;
            let l = summarize(&len)?;
            Ok(CoverageRow {
                k: k + 1,
                mean_coverage: c.mean,
                se_coverage: c.se,
                sd_coverage: c.sd,
                pct_se_coverage: 100.0 * c.sd,
                mean_length: l.mean,
                se_length: l.se,
                sd_length: l.sd,
                pct_se_length: if l.mean > 0.0 { 100.0 * l.sd / l.mean } else { 0.0 },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let rates: Vec<f64> = replications.iter().map(|r| r.rejection_rate).collect();
    Ok(CoverageReport {
        scenario,
        method,
        config,
        rows,
        failed_attempts: replications.iter().map(|r| r.retries).sum(),
        mean_rejection_rate: rates.iter().sum::<f64>() / rates.len().max(1) as f64,
        max_rejection_rate: rates.iter().copied().fold(0.0, f64::max),
        replications,
    })
}

/// A named scenario plus the study settings used to replicate it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub name: String,
    pub scenario: Scenario,
    pub method: Method,
    pub config: CoverageConfig,
}

impl Preset {
    /// The 18 replication presets: both models × three noise laws × three sizes.
    pub fn all() -> Vec<Preset> {
        let mut out = Vec::with_capacity(18);
        for model in [ScenarioModel::Ar1, ScenarioModel::Setar211] {
            for noise in NoiseKind::ALL {
                for n in model.preset_sizes() {
                    let seed = 20_060_000 + out.len() as u64;
                    let scenario = Scenario {
                        noise_scale: Some(model.noise_scale()),
                        ..Scenario::new(model, noise, n, seed)
                    };
                    out.push(Preset {
                        name: scenario.name(),
                        scenario,
                        method: Method::Sb,
                        config: CoverageConfig::default(),
                    });
                }
            }
        }
        out
    }

    pub fn builtin(name: &str) -> Option<Preset> {
        Self::all().into_iter().find(|p| p.name == name)
    }

    pub fn run(&self) -> Result<CoverageReport> {
        run_scenario(&self.scenario, self.method, &self.config)
    }
}

const TABLE_HEADER: &str = "  k   Mean β*   %SE(β*)   Mean Len   %SE(Len)";

/// Plain-text panels, one per report, stacked under a shared header.
/// Coverage is printed in percent.
pub fn emit_table(reports: &[CoverageReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{TABLE_HEADER}");
    for report in reports {
        let sc = &report.scenario;
        let _ = writeln!(
            out,
            "{} / {} / n={} / {} (B={}, R={}, reps={})",
            sc.model.short_name(),
            sc.noise.name(),
            sc.n,
            report.method.name(),
            report.config.b,
            report.config.r,
            report.config.reps
        );
        for row in &report.rows {
            let _ = writeln!(
                out,
                "{:>3}  {:>8.1}  {:>8.1}  {:>9.2}  {:>9.1}",
                row.k,
                100.0 * row.mean_coverage,
                row.pct_se_coverage,
                row.mean_length,
                row.pct_se_length
            );
        }
    }
    out
}

/// CSV rows: one line per (report, k).
pub fn emit_csv(reports: &[CoverageReport]) -> String {
    let mut out = String::from(
        "scenario,method,k,mean_coverage,se_coverage,pct_se_coverage,mean_length,se_length,pct_se_length\n",
    );
    for report in reports {
        for row in &report.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                report.scenario.name(),
                report.method.name(),
                row.k,
                row.mean_coverage,
                row.se_coverage,
                row.pct_se_coverage,
                row.mean_length,
                row.se_length,
                row.pct_se_length
            );
        }
    }
    out
}
