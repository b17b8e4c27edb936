//! Backward-representation bootstrap for linear AR(p) models.
//!
//! Replicates are generated backwards in time from the observed last p
//! values using the time-reversed AR fit, a forward model is refitted on
//! each replicate, and futures are drawn with the forward residual pool.
//! Only valid for reversible processes; kept as the baseline for the
//! splice bootstrap.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::armodels::{fit_ar, Dynamics, FittedModel, DIVERGENCE_BOUND};
use crate::error::{Error, Result};
use crate::noise::{make_residual_pool, Innovation, RandomStream, ResidualPool};
use crate::series::{check_level, TimeSeries};
use crate::splice::{ForecastFan, REJECTIONS_PER_REPLICATE};

/// y_t = φ_b,1 y_{t+1} + ... + φ_b,p y_{t+p} + e_t
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BackwardModel {
    pub coefficients: Vec<f64>,
    pub residuals: Vec<f64>,
    pub pool: ResidualPool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackcastConfig {
    pub replicates: usize,
    pub horizon: usize,
}

/// Least squares of y_t on its p successors, i.e. an AR(p) fit of the reversed series.
pub fn fit_backward_ar(series: &TimeSeries, p: usize) -> Result<BackwardModel> {
    let reversed = fit_ar(&series.reversed(), p, false)?;
    let Dynamics::Ar(regime) = reversed.dynamics else {
        unreachable!("fit_ar returns AR dynamics")
    };
    let pool = make_residual_pool(&reversed.residuals, series.len(), p)?;
    Ok(BackwardModel {
        coefficients: regime.lags,
        residuals: reversed.residuals,
        pool,
    })
}

/// A length-n series ending in `last_p`, generated backwards with the backward model.
pub fn backcast_replicate(
    model: &BackwardModel,
    last_p: &[f64],
    n: usize,
    rng: &mut RandomStream,
) -> Result<TimeSeries> {
    let p = model.coefficients.len();
    if last_p.len() != p || n < p {
        return Err(Error::LagCount {
            expected: p,
            got: last_p.len(),
        });
    }
    let mut values = vec![0.0; n];
    values[n - p..].copy_from_slice(last_p);
    for t in (0..n - p).rev() {
        let mean: f64 = model
            .coefficients
            .iter()
            .enumerate()
            .map(|(j, w)| w * values[t + 1 + j])
            .sum();
        let next = mean + model.pool.draw(rng);
        if !next.is_finite() || next.abs() > DIVERGENCE_BOUND {
            return Err(Error::SimulationDiverged { index: n - p - 1 - t });
        }
        values[t] = next;
    }
    TimeSeries::new(values)
}

/// Backcast bootstrap forecast fan for an AR(p) without intercept.
pub fn ts_predictive(
    series: &TimeSeries,
    p: usize,
    cfg: &BackcastConfig,
    level: f64,
    stream: &RandomStream,
) -> Result<ForecastFan> {
    check_level(level)?;
    let n = series.len();
    if n <= 2 * p {
        return Err(Error::SeriesTooShort {
            needed: 2 * p + 1,
            got: n,
        });
    }
    let forward = fit_ar(series, p, false)?;
    let forward_pool = make_residual_pool(&forward.residuals, n, p)?;
    let backward = fit_backward_ar(series, p)?;
    let last_p = series.tail(p).to_vec();
    let budget = REJECTIONS_PER_REPLICATE * cfg.replicates;

    let replicate = |index: u64| -> Result<(Vec<f64>, usize)> {
        let mut rng = stream.derive(index);
        let mut rejections = 0;
        loop {
            let rep = backcast_replicate(&backward, &last_p, n, &mut rng)?;
            match fit_ar(&rep, p, false) {
                Ok(refit) => {
                    let path = forecast(&refit, &last_p, cfg.horizon, &forward_pool, &mut rng);
                    return Ok((path, rejections));
                }
                Err(_) => {
                    rejections += 1;
                    if rejections > budget {
                        return Err(Error::ModelFormUnstable {
                            rejections,
                            accepted: 0,
                            rate: 1.0,
                        });
                    }
                }
            }
        }
    };
    let outcomes: Vec<Result<(Vec<f64>, usize)>> = (0..cfg.replicates as u64).into_par_iter().map(replicate).collect();
    let mut rows = Vec::with_capacity(cfg.replicates);
    let mut rejections = 0;
    for outcome in outcomes {
        let (row, rej) = outcome?;
        rows.push(row);
        rejections += rej;
    }
    let point = forward.plugin_forecast(&last_p, cfg.horizon)?;
    let accepted = rows.len();
    let mut fan = ForecastFan::from_draws(rows, last_p, point, level)?;
    fan.rejections = rejections;
    fan.rejection_rate = rejections as f64 / (rejections + accepted).max(1) as f64;
    Ok(fan)
}

fn forecast(
    refit: &FittedModel,
    last_p: &[f64],
    horizon: usize,
    pool: &dyn Innovation,
    rng: &mut RandomStream,
) -> Vec<f64> {
    refit.dynamics.forecast_path(last_p, horizon, pool, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::armodels::simulate;
    use crate::noise::{NoiseKind, NoiseSpec};

    fn draw_series(dynamics: &Dynamics, kind: NoiseKind, n: usize, seed: u64) -> TimeSeries {
        let mut rng = RandomStream::new(seed, 0);
        simulate(
            dynamics,
            &NoiseSpec::standard(kind),
            n,
            1000,
            &vec![0.0; dynamics.max_lag()],
            &mut rng,
        )
        .unwrap()
    }

    fn coef(m: &FittedModel) -> Vec<f64> {
        match &m.dynamics {
            Dynamics::Ar(r) => r.lags.clone(),
            _ => unreachable!(),
        }
    }

    #[test]
    fn backward_fit_is_forward_fit_of_reversal() {
        let y = draw_series(&Dynamics::ar(vec![0.4, -0.3]), NoiseKind::Exp, 200, 1);
        let b = fit_backward_ar(&y, 2).unwrap();
        let f = fit_ar(&y.reversed(), 2, false).unwrap();
        assert_eq!(b.coefficients, coef(&f));
    }

    #[test]
    fn backward_and_forward_agree_for_normal_ar1() {
        let y = draw_series(&Dynamics::reference_ar1(), NoiseKind::Normal, 5000, 2);
        let b = fit_backward_ar(&y, 1).unwrap().coefficients[0];
        let f = coef(&fit_ar(&y, 1, false).unwrap())[0];
        assert!((b - f).abs() < 0.03, "{b} vs {f}");
    }

    #[test]
    fn backward_fit_of_white_noise() {
        let y = draw_series(&Dynamics::ar(vec![0.0]), NoiseKind::Normal, 2000, 3);
        let b = fit_backward_ar(&y, 1).unwrap().coefficients[0];
        assert!(b.abs() < 0.05, "{b}");
    }

    #[test]
    fn backward_pool_is_centered_and_rescaled() {
        let y = draw_series(&Dynamics::reference_ar1(), NoiseKind::Exp, 80, 4);
        let b = fit_backward_ar(&y, 1).unwrap();
        let m: f64 = b.pool.values().iter().sum::<f64>() / b.pool.len() as f64;
        assert!(m.abs() < 1e-12);
        assert_eq!(b.pool.rescale(), (79.0f64 / 78.0).sqrt());
    }

    #[test]
    fn replicates_end_in_observed_values() {
        let y = draw_series(&Dynamics::ar(vec![0.5, 0.2]), NoiseKind::Mixture, 100, 5);
        let b = fit_backward_ar(&y, 2).unwrap();
        let mut rng = RandomStream::new(6, 0);
        for _ in 0..20 {
            let rep = backcast_replicate(&b, y.tail(2), 100, &mut rng).unwrap();
            assert_eq!(rep.len(), 100);
            assert_eq!(rep.tail(2), y.tail(2));
        }
    }

    #[test]
    fn zero_noise_fan_collapses_to_plugin() {
        let y = TimeSeries::new((0..40).map(|i| if i % 2 == 0 { 2.0 } else { -2.0 }).collect()).unwrap();
        let cfg = BackcastConfig {
            replicates: 25,
            horizon: 3,
        };
        let fan = ts_predictive(&y, 1, &cfg, 0.9, &RandomStream::new(1, 0)).unwrap();
        assert_eq!(fan.point_forecast, vec![2.0, -2.0, 2.0]);
        assert!(fan.draws.iter().all(|row| row == &fan.point_forecast));
        assert!(fan.intervals.iter().all(|pi| pi.length == 0.0));
    }
}
