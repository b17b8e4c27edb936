//! Splice bootstrap prediction intervals.
//!
//! Each replicate simulates a long path from the fitted model, finds the
//! stretch that best matches the data's last p values, keeps the n - p
//! simulated values in front of it and appends the real last p values. The
//! model is refitted on that replicate and forecasts are driven from the
//! original last p values with the refit and its own residual pool.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::armodels::{fit, simulate, Dynamics, FittedModel, ModelSpec};
use crate::error::{Error, Result};
use crate::noise::{variance_correction, RandomStream, ResidualPool};
use crate::series::{check_level, PredictionInterval, TimeSeries};

pub const DEFAULT_REPLICATES: usize = 100;
pub const DEFAULT_BURN_IN: usize = 1000;
/// Rejected refits allowed per accepted replicate.
pub const REJECTIONS_PER_REPLICATE: usize = 50;

/// How the p deviations at a candidate splice point are aggregated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpliceNorm {
    #[default]
    Sum,
    Max,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpliceConfig {
    /// Accepted replicates B.
    pub replicates: usize,
    /// Burn-in m discarded from every long simulation.
    pub burn_in: usize,
    /// Post-burn-in length l; `None` means n + max(1000, 4n).
    pub long_length: Option<usize>,
    pub horizon: usize,
    /// Total refit rejections tolerated; `None` means 50 B.
    pub rejection_budget: Option<usize>,
    pub norm: SpliceNorm,
    /// Start each long simulation from a random stretch of the data rather
    /// than its first p values.
    pub random_start: bool,
    pub center_pools: bool,
}

impl SpliceConfig {
    pub fn new(replicates: usize, horizon: usize) -> Self {
        Self {
            replicates,
            burn_in: DEFAULT_BURN_IN,
            long_length: None,
            horizon,
            rejection_budget: None,
            norm: SpliceNorm::Sum,
            random_start: true,
            center_pools: true,
        }
    }

    pub fn long_length(&self, n: usize) -> usize {
        self.long_length.unwrap_or(n + 1000usize.max(4 * n))
    }

    pub fn rejection_budget(&self) -> usize {
        self.rejection_budget
            .unwrap_or(REJECTIONS_PER_REPLICATE * self.replicates)
    }
}

impl Default for SpliceConfig {
    fn default() -> Self {
        Self::new(DEFAULT_REPLICATES, 5)
    }
}

/// Where the model comes from: least squares on each series, or fixed
/// known coefficients evaluated without fitting.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSource {
    Fit(ModelSpec),
    Known(Dynamics),
}

impl ModelSource {
    pub fn spec(&self) -> ModelSpec {
        match self {
            ModelSource::Fit(spec) => *spec,
            ModelSource::Known(d) => d.spec(),
        }
    }

    pub fn estimate(&self, series: &TimeSeries) -> Result<FittedModel> {
        match self {
            ModelSource::Fit(spec) => fit(series, spec),
            ModelSource::Known(d) => FittedModel::from_known(d, series),
        }
    }

    /// Residual pool of a model produced by this source. Fitted residuals get
    /// the √((n-p)/(n-2p)) correction; residuals of known dynamics are not deflated.
    pub fn pool(&self, model: &FittedModel, center: bool) -> Result<ResidualPool> {
        let rescale = match self {
            ModelSource::Fit(_) => variance_correction(model.n, model.dynamics.max_lag())?,
            ModelSource::Known(_) => 1.0,
        };
        ResidualPool::new(&model.residuals, rescale, center)
    }
}

/// One accepted splice replicate.
#[derive(Debug, Clone)]
pub struct SpliceResult {
    pub replicate: TimeSeries,
    /// Position of the splice point within the post-burn-in simulation (0-based).
    pub splice_index: usize,
    pub discrepancy: f64,
    pub refit: FittedModel,
    pub forecast: Vec<f64>,
    /// Refits rejected before this replicate was accepted.
    pub rejections: usize,
}

/// B × K bootstrap draws of the future, conditional on the last p values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForecastFan {
    pub draws: Vec<Vec<f64>>,
    pub last_p: Vec<f64>,
    pub point_forecast: Vec<f64>,
    pub intervals: Vec<PredictionInterval>,
    pub rejections: usize,
    pub rejection_rate: f64,
    pub mean_discrepancy: f64,
}

impl ForecastFan {
    pub fn from_draws(draws: Vec<Vec<f64>>, last_p: Vec<f64>, point_forecast: Vec<f64>, level: f64) -> Result<Self> {
        let horizon = point_forecast.len();
        let intervals = (0..horizon)
            .map(|k| {
                let column: Vec<f64> = draws.iter().map(|row| row[k]).collect();
                PredictionInterval::from_sample(k + 1, &column, level)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            draws,
            last_p,
            point_forecast,
            intervals,
            rejections: 0,
            rejection_rate: 0.0,
            mean_discrepancy: 0.0,
        })
    }

    pub fn horizon(&self) -> usize {
        self.intervals.len()
    }
}

/// Scan every admissible splice point using the sum of absolute deviations.
pub fn find_splice_point(sim: &[f64], last_p: &[f64], min_history: usize) -> Result<(usize, f64)> {
    find_splice_point_with(sim, last_p, min_history, SpliceNorm::Sum)
}

/// Position r minimizing the mismatch between `sim[r..r + p]` and `last_p`.
///
/// Admissible positions have at least `min_history` values before them and
/// room for all p values; ties go to the smallest r.
pub fn find_splice_point_with(
    sim: &[f64],
    last_p: &[f64],
    min_history: usize,
    norm: SpliceNorm,
) -> Result<(usize, f64)> {
    let p = last_p.len();
    if p == 0 || sim.len() < min_history + p {
        return Err(Error::SpliceSearchTooShort);
    }
    let mut best = (min_history, f64::INFINITY);
    for r in min_history..=sim.len() - p {
        let window = &sim[r..r + p];
        let deviations = window.iter().zip(last_p).map(|(s, y)| (s - y).abs());
        let discrepancy = match norm {
            SpliceNorm::Sum => deviations.sum(),
            SpliceNorm::Max => deviations.fold(0.0, f64::max),
        };
        if discrepancy < best.1 {
            best = (r, discrepancy);
            if discrepancy == 0.0 {
                break;
            }
        }
    }
    Ok(best)
}

/// The n - p simulated values in front of `r`, followed by `last_p`.
pub fn make_replicate(sim: &[f64], r: usize, last_p: &[f64], n: usize) -> Result<TimeSeries> {
    let p = last_p.len();
    if n < p {
        return Err(Error::SeriesTooShort { needed: p, got: n });
    }
    let keep = n - p;
    if r < keep || r > sim.len() {
        return Err(Error::InsufficientHistory {
            needed: keep,
            have: r.min(sim.len()),
        });
    }
    let mut values = Vec::with_capacity(n);
    values.extend_from_slice(&sim[r - keep..r]);
    values.extend_from_slice(last_p);
    TimeSeries::new(values)
}

/// A refit is valid when it has the same form as the original model and,
/// for SETAR, both regimes are adequately populated. Coefficients are not inspected.
pub fn validate_refit(original: &FittedModel, refit: &FittedModel) -> bool {
    original.spec.same_form(&refit.spec) && refit.regimes_populated()
}

/// Everything a replicate worker needs, shared read-only.
struct SpliceContext<'a> {
    series: &'a TimeSeries,
    source: &'a ModelSource,
    original: FittedModel,
    pool: ResidualPool,
    cfg: &'a SpliceConfig,
}

impl<'a> SpliceContext<'a> {
    fn new(series: &'a TimeSeries, source: &'a ModelSource, cfg: &'a SpliceConfig) -> Result<Self> {
        source.spec().validate()?;
        let p = source.spec().max_lag();
        let n = series.len();
        if n <= 2 * p {
            return Err(Error::SeriesTooShort {
                needed: 2 * p + 1,
                got: n,
            });
        }
        let original = source.estimate(series)?;
        let pool = source.pool(&original, cfg.center_pools)?;
        Ok(Self {
            series,
            source,
            original,
            pool,
            cfg,
        })
    }

    fn replicate(&self, rng: &mut RandomStream) -> Result<SpliceResult> {
        let n = self.series.len();
        let p = self.original.dynamics.max_lag();
        let last_p = self.series.tail(p);
        let data = self.series.values();
        let budget = self.cfg.rejection_budget();
        let mut rejections = 0;
        loop {
            let start = if self.cfg.random_start { rng.index(n - p + 1) } else { 0 };
            let sim = simulate(
                &self.original.dynamics,
                &self.pool,
                self.cfg.long_length(n),
                self.cfg.burn_in,
                &data[start..start + p],
                rng,
            )?;
            let (r, discrepancy) = find_splice_point_with(sim.values(), last_p, n - p, self.cfg.norm)?;
            let replicate = make_replicate(sim.values(), r, last_p, n)?;
            let accepted = self
                .source
                .estimate(&replicate)
                .ok()
                .filter(|refit| validate_refit(&self.original, refit));
            let Some(refit) = accepted else {
                rejections += 1;
                if rejections > budget {
                    return Err(unstable(rejections, 0));
                }
                continue;
            };
            let pool = self.source.pool(&refit, self.cfg.center_pools)?;
            let forecast = refit.dynamics.forecast_path(last_p, self.cfg.horizon, &pool, rng);
            return Ok(SpliceResult {
                replicate,
                splice_index: r,
                discrepancy,
                refit,
                forecast,
                rejections,
            });
        }
    }
}

fn unstable(rejections: usize, accepted: usize) -> Error {
    Error::ModelFormUnstable {
        rejections,
        accepted,
        rate: rejections as f64 / (rejections + accepted).max(1) as f64,
    }
}

/// Build replicate `index` of a splice bootstrap run. Its random stream is
/// `stream.derive(index)`, the same one [`sb_predictive`] uses.
pub fn sb_replicate(
    series: &TimeSeries,
    source: &ModelSource,
    cfg: &SpliceConfig,
    stream: &RandomStream,
    index: u64,
) -> Result<SpliceResult> {
    let ctx = SpliceContext::new(series, source, cfg)?;
    ctx.replicate(&mut stream.derive(index))
}

/// Splice bootstrap forecast fan with a model fitted by least squares.
pub fn sb_predictive(
    series: &TimeSeries,
    spec: &ModelSpec,
    cfg: &SpliceConfig,
    level: f64,
    stream: &RandomStream,
) -> Result<ForecastFan> {
    sb_predictive_from(series, &ModelSource::Fit(*spec), cfg, level, stream)
}

pub fn sb_predictive_from(
    series: &TimeSeries,
    source: &ModelSource,
    cfg: &SpliceConfig,
    level: f64,
    stream: &RandomStream,
) -> Result<ForecastFan> {
    check_level(level)?;
    let ctx = SpliceContext::new(series, source, cfg)?;
    let outcomes: Vec<Result<SpliceResult>> = (0..cfg.replicates as u64)
        .into_par_iter()
        .map(|i| ctx.replicate(&mut stream.derive(i)))
        .collect();
    let mut rows = Vec::with_capacity(cfg.replicates);
    let mut rejections = 0;
    let mut discrepancy = 0.0;
    for outcome in outcomes {
        let result = outcome?;
        rejections += result.rejections;
        discrepancy += result.discrepancy;
        rows.push(result.forecast);
    }
    if rejections > cfg.rejection_budget() {
        return Err(unstable(rejections, rows.len()));
    }
    let p = ctx.original.dynamics.max_lag();
    let last_p = series.tail(p).to_vec();
    let point = ctx.original.plugin_forecast(&last_p, cfg.horizon)?;
    let accepted = rows.len();
    let mut fan = ForecastFan::from_draws(rows, last_p, point, level)?;
    fan.rejections = rejections;
    fan.rejection_rate = rejections as f64 / (rejections + accepted).max(1) as f64;
    fan.mean_discrepancy = discrepancy / accepted.max(1) as f64;
    Ok(fan)
}
