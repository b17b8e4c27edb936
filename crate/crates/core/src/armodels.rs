//! Linear AR(p) and two-regime SETAR models: specification, conditional
//! least-squares fitting, simulation and plug-in forecasting.
//!
//! All lag windows are passed oldest first. For a window `h` of length L the
//! lag-j value y_{t-j} is `h[L - j]`.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::Gram;
use crate::noise::{Innovation, RandomStream};
use crate::series::{quantile_sorted, TimeSeries};

/// Simulated values beyond this magnitude are treated as divergence.
pub const DIVERGENCE_BOUND: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    Fixed(f64),
    Estimate,
}

impl Serialize for Threshold {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Threshold::Fixed(r) => s.serialize_f64(*r),
            Threshold::Estimate => s.serialize_str("estimate"),
        }
    }
}

impl<'de> Deserialize<'de> for Threshold {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Value(f64),
            Word(String),
        }
        match Raw::deserialize(d)? {
            Raw::Value(r) if r.is_finite() => Ok(Threshold::Fixed(r)),
            Raw::Value(r) => Err(serde::de::Error::custom(format!("threshold must be finite, got {r}"))),
            Raw::Word(w) if w == "estimate" => Ok(Threshold::Estimate),
            Raw::Word(w) => Err(serde::de::Error::custom(format!(
                "threshold must be a number or \"estimate\", got {w:?}"
            ))),
        }
    }
}

/// Model structure, as read from a model config.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelSpec {
    Ar {
        p: usize,
        #[serde(default)]
        intercept: bool,
    },
    Setar {
        d: usize,
        p_low: usize,
        p_high: usize,
        threshold: Threshold,
        #[serde(default)]
        intercept: bool,
    },
}

impl ModelSpec {
    pub fn ar(p: usize) -> Self {
        ModelSpec::Ar { p, intercept: false }
    }

    pub fn setar(d: usize, p_low: usize, p_high: usize, threshold: Threshold) -> Self {
        ModelSpec::Setar {
            d,
            p_low,
            p_high,
            threshold,
            intercept: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ModelSpec::Ar { p: 0, .. } => Err(Error::InvalidSpec("AR order must be at least 1".into())),
            ModelSpec::Setar { d, p_low, p_high, .. } => {
                if p_low == 0 || p_high == 0 {
                    Err(Error::InvalidSpec("regime orders must be at least 1".into()))
                } else if d == 0 || d > p_low.max(p_high) {
                    Err(Error::InvalidSpec(format!(
                        "delay {d} must lie in 1..={}",
                        p_low.max(p_high)
                    )))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// Number of past values the conditional mean depends on.
    pub fn max_lag(&self) -> usize {
        match *self {
            ModelSpec::Ar { p, .. } => p,
            ModelSpec::Setar { p_low, p_high, .. } => p_low.max(p_high),
        }
    }

    pub fn intercept(&self) -> bool {
        match *self {
            ModelSpec::Ar { intercept, .. } | ModelSpec::Setar { intercept, .. } => intercept,
        }
    }

    pub fn is_setar(&self) -> bool {
        matches!(self, ModelSpec::Setar { .. })
    }

    /// Same kind, lag orders and intercept choice. Threshold handling is ignored.
    pub fn same_form(&self, other: &ModelSpec) -> bool {
        match (*self, *other) {
            (ModelSpec::Ar { p: a, intercept: i }, ModelSpec::Ar { p: b, intercept: j }) => a == b && i == j,
            (
                ModelSpec::Setar {
                    d,
                    p_low,
                    p_high,
                    intercept,
                    ..
                },
                ModelSpec::Setar {
                    d: d2,
                    p_low: l2,
                    p_high: h2,
                    intercept: i2,
                    ..
                },
            ) => d == d2 && p_low == l2 && p_high == h2 && intercept == i2,
            _ => false,
        }
    }
}

/// Smallest admissible regime: max(p + 2, ⌈0.1 n⌉).
pub fn min_regime_size(n: usize, p: usize) -> usize {
    (p + 2).max(n.div_ceil(10))
}

/// Intercept plus lag weights for one linear regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub intercept: f64,
    /// Weight on y_{t-1}, y_{t-2}, ...
    pub lags: Vec<f64>,
}

impl Regime {
    pub fn new(intercept: f64, lags: Vec<f64>) -> Self {
        Self { intercept, lags }
    }

    pub fn order(&self) -> usize {
        self.lags.len()
    }

    fn mean(&self, history: &[f64]) -> f64 {
        let n = history.len();
        self.lags
            .iter()
            .enumerate()
            .fold(self.intercept, |acc, (j, w)| acc + w * history[n - 1 - j])
    }
}

/// The conditional mean function f(y_{t-1}, ..., y_{t-p}) with known coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Dynamics {
    Ar(Regime),
    Setar {
        delay: usize,
        threshold: f64,
        low: Regime,
        high: Regime,
    },
}

impl Dynamics {
    pub fn ar(lags: Vec<f64>) -> Self {
        Dynamics::Ar(Regime::new(0.0, lags))
    }

    pub fn setar(delay: usize, threshold: f64, low: Vec<f64>, high: Vec<f64>) -> Self {
        Dynamics::Setar {
            delay,
            threshold,
            low: Regime::new(0.0, low),
            high: Regime::new(0.0, high),
        }
    }

    /// y_t = -0.8 y_{t-1} + e_t
    pub fn reference_ar1() -> Self {
        Self::ar(vec![-0.8])
    }

    /// y_t = 0.7 y_{t-1} + e_t if y_{t-1} ≤ 0, 0.3 y_{t-1} + e_t otherwise.
    pub fn reference_setar() -> Self {
        Self::setar(1, 0.0, vec![0.7], vec![0.3])
    }

    pub fn max_lag(&self) -> usize {
        match self {
            Dynamics::Ar(r) => r.order(),
            Dynamics::Setar { delay, low, high, .. } => low.order().max(high.order()).max(*delay),
        }
    }

    /// The structure this model instantiates, with its threshold fixed.
    pub fn spec(&self) -> ModelSpec {
        match self {
            Dynamics::Ar(r) => ModelSpec::Ar {
                p: r.order(),
                intercept: r.intercept != 0.0,
            },
            Dynamics::Setar {
                delay,
                threshold,
                low,
                high,
            } => ModelSpec::Setar {
                d: *delay,
                p_low: low.order(),
                p_high: high.order(),
                threshold: Threshold::Fixed(*threshold),
                intercept: low.intercept != 0.0 || high.intercept != 0.0,
            },
        }
    }

    /// 0 for the lower (or only) regime, 1 for the upper regime.
    pub fn regime(&self, history: &[f64]) -> usize {
        match self {
            Dynamics::Ar(_) => 0,
            Dynamics::Setar { delay, threshold, .. } => {
                if history[history.len() - delay] <= *threshold {
                    0
                } else {
                    1
                }
            }
        }
    }

    /// Conditional mean of the next value given a window ending at the latest value.
    /// The window must hold at least `max_lag()` values.
    pub fn next_mean(&self, history: &[f64]) -> f64 {
        match self {
            Dynamics::Ar(r) => r.mean(history),
            Dynamics::Setar { low, high, .. } => {
                if self.regime(history) == 0 {
                    low.mean(history)
                } else {
                    high.mean(history)
                }
            }
        }
    }

    /// f evaluated at exactly `max_lag()` lagged values.
    pub fn one_step_mean(&self, lags: &[f64]) -> Result<f64> {
        self.check_lags(lags)?;
        Ok(self.next_mean(lags))
    }

    /// Noise-free recursive forecast for steps 1..=horizon.
    pub fn plugin_forecast(&self, last: &[f64], horizon: usize) -> Result<Vec<f64>> {
        self.check_lags(last)?;
        let lag = last.len();
        let mut path = last.to_vec();
        for _ in 0..horizon {
            let next = self.next_mean(&path[path.len() - lag..]);
            path.push(next);
        }
        Ok(path.split_off(lag))
    }

    /// Draw a stochastic path of `horizon` values continuing from `last`.
    pub fn forecast_path(
        &self,
        last: &[f64],
        horizon: usize,
        noise: &dyn Innovation,
        rng: &mut RandomStream,
    ) -> Vec<f64> {
        let lag = self.max_lag();
        let mut path = last[last.len() - lag..].to_vec();
        for _ in 0..horizon {
            let next = self.next_mean(&path[path.len() - lag..]) + noise.draw(rng);
            path.push(next);
        }
        path.split_off(lag)
    }

    fn check_lags(&self, lags: &[f64]) -> Result<()> {
        if lags.len() != self.max_lag() {
            return Err(Error::LagCount {
                expected: self.max_lag(),
                got: lags.len(),
            });
        }
        Ok(())
    }
}

/// A model estimated from (or evaluated against) a particular series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FittedModel {
    pub spec: ModelSpec,
    pub dynamics: Dynamics,
    /// One-step residuals for t = max_lag + 1, ..., n in time order.
    pub residuals: Vec<f64>,
    /// Observations per regime (a single entry for AR).
    pub regime_counts: Vec<usize>,
    pub sse: f64,
    /// Length of the series the model was fitted on.
    pub n: usize,
}

impl FittedModel {
    /// Evaluate known dynamics on a series without estimating anything.
    pub fn from_known(dynamics: &Dynamics, series: &TimeSeries) -> Result<Self> {
        let lag = dynamics.max_lag();
        let y = series.values();
        if y.len() <= lag {
            return Err(Error::SeriesTooShort {
                needed: lag + 1,
                got: y.len(),
            });
        }
        let mut counts = match dynamics {
            Dynamics::Ar(_) => vec![0],
            Dynamics::Setar { .. } => vec![0, 0],
        };
        let residuals: Vec<f64> = (lag..y.len())
            .map(|t| {
                counts[dynamics.regime(&y[t - lag..t])] += 1;
                y[t] - dynamics.next_mean(&y[t - lag..t])
            })
            .collect();
        Ok(Self {
            spec: dynamics.spec(),
            dynamics: dynamics.clone(),
            sse: residuals.iter().map(|e| e * e).sum(),
            residuals,
            regime_counts: counts,
            n: y.len(),
        })
    }

    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    pub fn threshold(&self) -> Option<f64> {
        match self.dynamics {
            Dynamics::Setar { threshold, .. } => Some(threshold),
            Dynamics::Ar(_) => None,
        }
    }

    pub fn one_step_mean(&self, lags: &[f64]) -> Result<f64> {
        self.dynamics.one_step_mean(lags)
    }

    pub fn plugin_forecast(&self, last: &[f64], horizon: usize) -> Result<Vec<f64>> {
        self.dynamics.plugin_forecast(last, horizon)
    }

    /// True when every regime holds at least the minimum regime size.
    pub fn regimes_populated(&self) -> bool {
        match self.spec {
            ModelSpec::Ar { .. } => true,
            ModelSpec::Setar { p_low, p_high, .. } => {
                self.regime_counts.len() == 2
                    && self.regime_counts[0] >= min_regime_size(self.n, p_low)
                    && self.regime_counts[1] >= min_regime_size(self.n, p_high)
            }
        }
    }
}

pub fn fit(series: &TimeSeries, spec: &ModelSpec) -> Result<FittedModel> {
    match *spec {
        ModelSpec::Ar { p, intercept } => fit_ar(series, p, intercept),
        ModelSpec::Setar { .. } => fit_setar(series, spec),
    }
}

fn design_row(history: &[f64], order: usize, intercept: bool, row: &mut Vec<f64>) {
    row.clear();
    if intercept {
        row.push(1.0);
    }
    let n = history.len();
    row.extend((1..=order).map(|j| history[n - j]));
}

fn regime_from(beta: &[f64], intercept: bool) -> Regime {
    if intercept {
        Regime::new(beta[0], beta[1..].to_vec())
    } else {
        Regime::new(0.0, beta.to_vec())
    }
}

/// Conditional least squares of y_t on (1,) y_{t-1}, ..., y_{t-p}.
pub fn fit_ar(series: &TimeSeries, p: usize, intercept: bool) -> Result<FittedModel> {
    let spec = ModelSpec::Ar { p, intercept };
    spec.validate()?;
    let y = series.values();
    let needed = p + 2 + usize::from(intercept);
    if y.len() < needed {
        return Err(Error::SeriesTooShort { needed, got: y.len() });
    }
    let mut gram = Gram::new(p + usize::from(intercept));
    let mut row = Vec::with_capacity(p + 1);
    for t in p..y.len() {
        design_row(&y[t - p..t], p, intercept, &mut row);
        gram.add(&row, y[t]);
    }
    let beta = gram.solve().ok_or(Error::DegenerateDesign)?;
    let dynamics = Dynamics::Ar(regime_from(&beta, intercept));
    let mut fitted = FittedModel::from_known(&dynamics, series)?;
    fitted.spec = spec;
    Ok(fitted)
}

struct Observation {
    t: usize,
    z: f64,
}

/// Two-regime SETAR by conditional least squares.
///
/// With an estimated threshold the candidates are the distinct values of the
/// delay variable between its 10% and 90% empirical quantiles; the candidate
/// with the smallest total SSE wins and ties go to the smaller threshold.
pub fn fit_setar(series: &TimeSeries, spec: &ModelSpec) -> Result<FittedModel> {
    spec.validate()?;
    let ModelSpec::Setar {
        d,
        p_low,
        p_high,
        threshold,
        intercept,
    } = *spec
    else {
        return Err(Error::InvalidSpec("fit_setar needs a setar spec".into()));
    };
    let y = series.values();
    let n = y.len();
    let lag = spec.max_lag();
    let min_low = min_regime_size(n, p_low);
    let min_high = min_regime_size(n, p_high);
    if n < lag + min_low + min_high {
        return Err(Error::SeriesTooShort {
            needed: lag + min_low + min_high,
            got: n,
        });
    }
    let threshold = match threshold {
        Threshold::Fixed(r) => r,
        Threshold::Estimate => search_threshold(y, d, p_low, p_high, intercept, min_low, min_high)?,
    };

    let mut low = Gram::new(p_low + usize::from(intercept));
    let mut high = Gram::new(p_high + usize::from(intercept));
    let mut row = Vec::with_capacity(lag + 1);
    for t in lag..n {
        let h = &y[t - lag..t];
        if h[lag - d] <= threshold {
            design_row(h, p_low, intercept, &mut row);
            low.add(&row, y[t]);
        } else {
            design_row(h, p_high, intercept, &mut row);
            high.add(&row, y[t]);
        }
    }
    if low.count() < min_low || high.count() < min_high {
        return Err(Error::RegimeStarvation {
            min_size: min_low.max(min_high),
        });
    }
    let b_low = low.solve().ok_or(Error::DegenerateDesign)?;
    let b_high = high.solve().ok_or(Error::DegenerateDesign)?;
    let dynamics = Dynamics::Setar {
        delay: d,
        threshold,
        low: regime_from(&b_low, intercept),
        high: regime_from(&b_high, intercept),
    };
    let mut fitted = FittedModel::from_known(&dynamics, series)?;
    fitted.spec = *spec;
    Ok(fitted)
}

fn search_threshold(
    y: &[f64],
    d: usize,
    p_low: usize,
    p_high: usize,
    intercept: bool,
    min_low: usize,
    min_high: usize,
) -> Result<f64> {
    let lag = p_low.max(p_high);
    let mut obs: Vec<Observation> = (lag..y.len()).map(|t| Observation { t, z: y[t - d] }).collect();
    obs.sort_by(|a, b| a.z.total_cmp(&b.z).then(a.t.cmp(&b.t)));
    let sorted_z: Vec<f64> = obs.iter().map(|o| o.z).collect();
    let lo = quantile_sorted(&sorted_z, 0.1);
    let hi = quantile_sorted(&sorted_z, 0.9);
    let mut candidates: Vec<f64> = sorted_z.iter().copied().filter(|&z| z >= lo && z <= hi).collect();
    candidates.dedup();

    let dim_low = p_low + usize::from(intercept);
    let dim_high = p_high + usize::from(intercept);
    let mut row = Vec::with_capacity(lag + 1);
    let mut total_high = Gram::new(dim_high);
    for o in &obs {
        design_row(&y[o.t - lag..o.t], p_high, intercept, &mut row);
        total_high.add(&row, y[o.t]);
    }
    let mut prefix_low = Gram::new(dim_low);
    let mut prefix_high = Gram::new(dim_high);
    let mut next = 0;
    let mut best: Option<(f64, f64)> = None;
    for &c in &candidates {
        while next < obs.len() && obs[next].z <= c {
            let o = &obs[next];
            let h = &y[o.t - lag..o.t];
            design_row(h, p_low, intercept, &mut row);
            prefix_low.add(&row, y[o.t]);
            design_row(h, p_high, intercept, &mut row);
            prefix_high.add(&row, y[o.t]);
            next += 1;
        }
        let upper = total_high.minus(&prefix_high);
        if prefix_low.count() < min_low || upper.count() < min_high {
            continue;
        }
        let (Some(bl), Some(bh)) = (prefix_low.solve(), upper.solve()) else {
            continue;
        };
        let sse = prefix_low.sse_at(&bl) + upper.sse_at(&bh);
        if best.is_none_or(|(_, s)| sse < s) {
            best = Some((c, sse));
        }
    }
    best.map(|(c, _)| c).ok_or(Error::RegimeStarvation {
        min_size: min_low.max(min_high),
    })
}

/// Iterate y_t = f(window) + e_t from `init`, drop `burn_in` values and return the next `length`.
pub fn simulate(
    dynamics: &Dynamics,
    noise: &dyn Innovation,
    length: usize,
    burn_in: usize,
    init: &[f64],
    rng: &mut RandomStream,
) -> Result<TimeSeries> {
    let lag = dynamics.max_lag();
    if init.len() != lag {
        return Err(Error::LagCount {
            expected: lag,
            got: init.len(),
        });
    }
    let mut path = Vec::with_capacity(lag + burn_in + length);
    path.extend_from_slice(init);
    for index in 0..burn_in + length {
        let next = dynamics.next_mean(&path[path.len() - lag..]) + noise.draw(rng);
        if !next.is_finite() || next.abs() > DIVERGENCE_BOUND {
            return Err(Error::SimulationDiverged { index });
        }
        path.push(next);
    }
    TimeSeries::new(path.split_off(lag + burn_in))
}
