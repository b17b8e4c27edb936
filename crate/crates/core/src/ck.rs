//! Grid solution of the forward Chapman–Kolmogorov recursion for lag-1
//! models with analytic innovation laws.
//!
//! The grid is cell-centred: point i stands for the cell of width h around
//! it and carries that cell's probability mass. Transition mass into a cell
//! is integrated exactly through the noise cdf, and the source integral is a
//! midpoint sum over cells, so jumps in the noise density (centred
//! exponential) and the kink of a threshold model cost no accuracy.

use serde::{Deserialize, Serialize};

use crate::armodels::Dynamics;
use crate::error::{Error, Result};
use crate::noise::NoiseSpec;
use crate::series::{check_level, PredictionInterval};

/// Largest probability mass allowed to fall off the grid in one step.
pub const MAX_LEAKAGE: f64 = 1e-3;
pub const DEFAULT_POINTS: usize = 2001;
/// Source cells lighter than this are skipped.
const NEGLIGIBLE_MASS: f64 = 1e-18;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl GridSpec {
    pub fn new(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() || lo >= hi || count < 3 {
            return Err(Error::InvalidSpec(format!("bad grid [{lo}, {hi}] x {count}")));
        }
        Ok(Self { lo, hi, count })
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.count - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.step()
    }

    /// Halved spacing over the same span.
    pub fn refined(&self) -> Self {
        Self {
            count: 2 * self.count - 1,
            ..*self
        }
    }

    /// `DEFAULT_POINTS` points covering the noise-free path from `y_n` and
    /// the stationary mean, padded by ten stationary standard deviations.
    pub fn default_for(dynamics: &Dynamics, noise: &NoiseSpec, y_n: f64, horizon: usize) -> Result<Self> {
        let slope = lag1_slopes(dynamics)?.into_iter().fold(0.0, |a: f64, b| a.max(b.abs()));
        let sd = if slope < 1.0 {
            noise.sd() / (1.0 - slope * slope).sqrt()
        } else {
            noise.sd() * (horizon as f64).sqrt() * slope.powi(horizon as i32)
        };
        let path = dynamics.plugin_forecast(&[y_n], horizon)?;
        let (mut lo, mut hi) = (0.0f64, 0.0f64);
        for v in path.iter().chain(std::iter::once(&y_n)) {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
        Self::new(lo - 10.0 * sd, hi + 10.0 * sd, DEFAULT_POINTS)
    }
}

fn lag1_slopes(dynamics: &Dynamics) -> Result<Vec<f64>> {
    if dynamics.max_lag() != 1 {
        return Err(Error::InvalidSpec(format!(
            "the density recursion supports lag-1 models only, got lag {}",
            dynamics.max_lag()
        )));
    }
    Ok(match dynamics {
        Dynamics::Ar(r) => r.lags.clone(),
        Dynamics::Setar { low, high, .. } => vec![low.lags[0], high.lags[0]],
    })
}

/// Predictive density on a grid, stored as cell masses summing to one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityGrid {
    pub grid: GridSpec,
    pub masses: Vec<f64>,
    /// Mass that fell off the grid in the last step, before renormalization.
    pub leaked: f64,
}

impl DensityGrid {
    pub fn points(&self) -> Vec<f64> {
        (0..self.grid.count).map(|i| self.grid.point(i)).collect()
    }

    /// Density values (cell mass over cell width).
    pub fn density(&self) -> Vec<f64> {
        let h = self.grid.step();
        self.masses.iter().map(|m| m / h).collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }
}

fn transition(grid: &GridSpec, noise: &NoiseSpec, mean: f64, weight: f64, out: &mut [f64]) {
    let h = grid.step();
    let mut below = noise.cdf(grid.lo - 0.5 * h - mean);
    for (i, slot) in out.iter_mut().enumerate() {
        let above = noise.cdf(grid.point(i) + 0.5 * h - mean);
        *slot += weight * (above - below);
        below = above;
    }
}

fn renormalize(grid: &GridSpec, mut masses: Vec<f64>) -> Result<DensityGrid> {
    let total: f64 = masses.iter().sum();
    let leaked = 1.0 - total;
    if leaked > MAX_LEAKAGE || !total.is_finite() {
        let half = 0.5 * (grid.hi - grid.lo);
        return Err(Error::GridTooNarrow {
            leaked,
            suggested_lo: grid.lo - half,
            suggested_hi: grid.hi + half,
        });
    }
    masses.iter_mut().for_each(|m| *m /= total);
    Ok(DensityGrid {
        grid: *grid,
        masses,
        leaked,
    })
}

/// Density of y_{n+k} given y_n for a lag-1 model with additive noise.
pub fn ck_density(
    dynamics: &Dynamics,
    noise: &NoiseSpec,
    y_n: f64,
    horizon: usize,
    grid: &GridSpec,
) -> Result<DensityGrid> {
    Ok(ck_densities(dynamics, noise, y_n, horizon, grid)?
        .pop()
        .expect("horizon >= 1"))
}

/// Densities for every step 1..=horizon.
pub fn ck_densities(
    dynamics: &Dynamics,
    noise: &NoiseSpec,
    y_n: f64,
    horizon: usize,
    grid: &GridSpec,
) -> Result<Vec<DensityGrid>> {
    lag1_slopes(dynamics)?;
    if horizon == 0 {
        return Err(Error::InvalidSpec("horizon must be at least 1".into()));
    }
    let mut masses = vec![0.0; grid.count];
    transition(grid, noise, dynamics.next_mean(&[y_n]), 1.0, &mut masses);
    let mut steps = vec![renormalize(grid, masses)?];
    for _ in 1..horizon {
        let previous = &steps.last().expect("nonempty").masses;
        let mut next = vec![0.0; grid.count];
        for (j, &w) in previous.iter().enumerate() {
            if w > NEGLIGIBLE_MASS {
                transition(grid, noise, dynamics.next_mean(&[grid.point(j)]), w, &mut next);
            }
        }
        steps.push(renormalize(grid, next)?);
    }
    Ok(steps)
}

/// Equal-tail interval read off the cumulative grid mass.
pub fn ck_interval(density: &DensityGrid, horizon: usize, level: f64) -> Result<PredictionInterval> {
    check_level(level)?;
    let alpha = 1.0 - level;
    let lower = grid_quantile(density, alpha / 2.0);
    let upper = grid_quantile(density, 1.0 - alpha / 2.0);
    Ok(PredictionInterval::new(horizon, lower, upper, level))
}

/// Point where the cumulative mass reaches `q`, interpolating linearly inside a cell.
fn grid_quantile(density: &DensityGrid, q: f64) -> f64 {
    let h = density.grid.step();
    let mut cum = 0.0;
    for (i, &m) in density.masses.iter().enumerate() {
        if m > 0.0 && cum + m >= q {
            let left = density.grid.point(i) - 0.5 * h;
            return left + h * ((q - cum) / m).clamp(0.0, 1.0);
        }
        cum += m;
    }
    density.grid.hi + 0.5 * h
}

/// Oracle intervals for steps 1..=horizon on the default grid.
pub fn ck_intervals(
    dynamics: &Dynamics,
    noise: &NoiseSpec,
    y_n: f64,
    horizon: usize,
    level: f64,
) -> Result<Vec<PredictionInterval>> {
    let grid = GridSpec::default_for(dynamics, noise, y_n, horizon)?;
    ck_densities(dynamics, noise, y_n, horizon, &grid)?
        .iter()
        .enumerate()
        .map(|(k, d)| ck_interval(d, k + 1, level))
        .collect()
}
