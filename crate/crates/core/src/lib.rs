//! Conditional bootstrap prediction intervals for linear and threshold
//! autoregressions.
//!
//! The main entry point is [`splice::sb_predictive`], which builds a forecast
//! fan whose replicates all share the observed series' last p values. The
//! backward-representation bootstrap in [`backcast`] is the linear baseline,
//! [`ck`] solves the forward density recursion on a grid for lag-1 models, and
//! [`coverage`] runs simulation studies of conditional coverage.

pub mod armodels;
pub mod backcast;
pub mod ck;
pub mod coverage;
pub mod error;
mod linalg;
pub mod noise;
pub mod series;
pub mod splice;

pub use armodels::{fit, fit_ar, fit_setar, simulate, Dynamics, FittedModel, ModelSpec, Regime, Threshold};
pub use error::{Error, ErrorClass, Result};
pub use noise::{make_residual_pool, Innovation, NoiseKind, NoiseSpec, RandomStream, ResidualPool};
pub use series::{empirical_quantile, summarize, PredictionInterval, Summary, TimeSeries};
pub use splice::{sb_predictive, ForecastFan, ModelSource, SpliceConfig};
