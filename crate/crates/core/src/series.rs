//! Core numeric types shared by every module: the observed series, the
//! per-horizon prediction interval, empirical quantiles and summaries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An ordered, finite, nonempty sequence of observations.
///
/// Values are stored oldest first, so `values()[n - 1]` is the latest
/// observation y_n.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeSeries {
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySample);
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The last `p` observations in time order, i.e. (y_{n-p+1}, ..., y_n).
    pub fn tail(&self, p: usize) -> &[f64] {
        &self.values[self.values.len().saturating_sub(p)..]
    }

    /// The same observations in reverse time order.
    pub fn reversed(&self) -> TimeSeries {
        let mut values = self.values.clone();
        values.reverse();
        TimeSeries { values }
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

impl<'de> Deserialize<'de> for TimeSeries {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let values = Vec::<f64>::deserialize(d)?;
        TimeSeries::new(values).map_err(serde::de::Error::custom)
    }
}

/// Equal-tail interval for the value `horizon` steps ahead.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionInterval {
    pub horizon: usize,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub length: f64,
}

impl PredictionInterval {
    pub fn new(horizon: usize, lower: f64, upper: f64, level: f64) -> Self {
        debug_assert!(lower <= upper, "interval endpoints out of order");
        Self {
            horizon,
            lower,
            upper,
            level,
            length: upper - lower,
        }
    }

    /// Closed-interval membership, matching the coverage count L ≤ y ≤ U.
    pub fn contains(&self, y: f64) -> bool {
        self.lower <= y && y <= self.upper
    }

    /// Equal-tail percentile interval of a bootstrap sample.
    pub fn from_sample(horizon: usize, sample: &[f64], level: f64) -> Result<Self> {
        check_level(level)?;
        let mut sorted = sample.to_vec();
        validate(&sorted)?;
        sorted.sort_by(f64::total_cmp);
        let alpha = 1.0 - level;
        let lower = quantile_sorted(&sorted, alpha / 2.0);
        let upper = quantile_sorted(&sorted, 1.0 - alpha / 2.0);
        Ok(Self::new(horizon, lower, upper, level))
    }
}

pub(crate) fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidLevel(level))
    }
}

fn validate(values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::EmptySample);
    }
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::NonFinite(i)),
        None => Ok(()),
    }
}

/// Linear-interpolation empirical quantile.
///
/// With order statistics x(1) ≤ ... ≤ x(B) and h = (B - 1)q + 1 the result is
/// x(⌊h⌋) + (h - ⌊h⌋)(x(⌈h⌉) - x(⌊h⌋)). `q` is clamped to [0, 1].
pub fn empirical_quantile(values: &[f64], q: f64) -> Result<f64> {
    validate(values)?;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(quantile_sorted(&sorted, q))
}

/// Same rule as [`empirical_quantile`] for data that is already sorted.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let q = q.clamp(0.0, 1.0);
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation (divisor n - 1).
    pub sd: f64,
    /// Standard error of the mean, sd / √n.
    pub se: f64,
}

pub fn mean(values: &[f64]) -> Result<f64> {
    validate(values)?;
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

pub fn summarize(values: &[f64]) -> Result<Summary> {
    if values.len() < 2 {
        return Err(Error::InsufficientSample {
            needed: 2,
            got: values.len(),
        });
    }
    let mean = mean(values)?;
    let n = values.len() as f64;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    let sd = (ss / (n - 1.0)).sqrt();
    Ok(Summary {
        mean,
        sd,
        se: sd / n.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn quantile_of_singleton() {
        assert_eq!(empirical_quantile(&[5.0], 0.5).unwrap(), 5.0);
    }

    #[test]
    fn quantile_hand_evaluated() {
        let xs: Vec<f64> = (1..=10).map(f64::from).collect();
        // h = 9 * 0.05 + 1 = 1.45 -> 1 + 0.45 * (2 - 1)
        assert!((empirical_quantile(&xs, 0.05).unwrap() - 1.45).abs() < 1e-12);
        assert!((empirical_quantile(&xs, 0.95).unwrap() - 9.55).abs() < 1e-12);
        assert_eq!(empirical_quantile(&xs, 0.0).unwrap(), 1.0);
        assert_eq!(empirical_quantile(&xs, 1.0).unwrap(), 10.0);
    }

    #[test]
    fn quantile_of_normal_draws() {
        use crate::noise::{NoiseKind, NoiseSpec, RandomStream};
        let spec = NoiseSpec::standard(NoiseKind::Normal);
        let mut rng = RandomStream::new(11, 0);
        let draws: Vec<f64> = (0..1000).map(|_| spec.sample(&mut rng)).collect();
        let q = empirical_quantile(&draws, 0.95).unwrap();
        assert!((q - 1.645).abs() < 0.1, "q95 = {q}");
    }

    #[test]
    fn quantile_errors() {
        assert_eq!(empirical_quantile(&[], 0.5), Err(Error::EmptySample));
        assert_eq!(empirical_quantile(&[1.0, f64::NAN], 0.5), Err(Error::NonFinite(1)));
    }

    #[test]
    fn summaries() {
        let s = summarize(&[2.0, 2.0, 2.0]).unwrap();
        assert_eq!((s.mean, s.sd), (2.0, 0.0));

        let s = summarize(&[1.0, 3.0]).unwrap();
        assert_eq!(s.mean, 2.0);
        assert!((s.sd - 2f64.sqrt()).abs() < 1e-12);
        assert!((s.se - 1.0).abs() < 1e-12);

        let s = summarize(&[0.0, 0.0, 0.0, 4.0]).unwrap();
        assert_eq!(s.mean, 1.0);
        assert!((s.sd - 2.0).abs() < 1e-12);
        assert!((s.se - 1.0).abs() < 1e-12);

        assert!(matches!(summarize(&[1.0]), Err(Error::InsufficientSample { .. })));
    }

    #[test]
    fn series_rejects_bad_input() {
        assert_eq!(TimeSeries::new(vec![]), Err(Error::EmptySample));
        assert_eq!(TimeSeries::new(vec![0.0, f64::INFINITY]), Err(Error::NonFinite(1)));
        let s = TimeSeries::new(vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(s.tail(2), &[2.0, 3.0]);
        assert_eq!(s.reversed().values(), &[3.0, 2.0, 1.0]);
    }

    proptest! {
        #[test]
        fn quantile_is_monotone(
            xs in prop::collection::vec(-1e6f64..1e6, 1..60),
            mut qs in prop::collection::vec(0.0f64..=1.0, 2..20),
        ) {
            qs.sort_by(f64::total_cmp);
            let values: Vec<f64> = qs.iter().map(|&q| empirical_quantile(&xs, q).unwrap()).collect();
            for w in values.windows(2) {
                prop_assert!(w[0] <= w[1]);
            }
            let width = empirical_quantile(&xs, 0.95).unwrap() - empirical_quantile(&xs, 0.05).unwrap();
            prop_assert!(width >= 0.0);
        }

        #[test]
        fn summary_scales(xs in prop::collection::vec(-1e3f64..1e3, 2..40), c in -10.0f64..10.0) {
            let base = summarize(&xs).unwrap();
            let scaled: Vec<f64> = xs.iter().map(|x| c * x).collect();
            let s = summarize(&scaled).unwrap();
            let tol = 1e-9 * (1.0 + base.sd.abs() + base.mean.abs()) * (1.0 + c.abs());
            prop_assert!((s.mean - c * base.mean).abs() <= tol);
            prop_assert!((s.sd - c.abs() * base.sd).abs() <= tol);
            prop_assert!((s.se - c.abs() * base.se).abs() <= tol);
        }
    }
}
