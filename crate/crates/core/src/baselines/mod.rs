//! Benchmarks for the instantaneous volatility: realized volatility,
//! GARCH(1,1) one-day-ahead forecasts, mean squared error and normalised
//! returns.

mod evaluation;
mod garch;
pub mod optim;
mod realized;

pub use evaluation::{
    mse_compare, normalized_returns, xi_evaluation, xi_grid, ForecastEval, XiCell, GRID_MINUTES,
};
pub use garch::{
    fit_garch11, garch_forecast_one_step, rolling_garch_forecasts, GarchModel, MIN_OBSERVATIONS,
};
pub use realized::{
    close_to_close_returns, daily_closes, realized_volatility, RealizedPeriod, ReturnSeries,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BaselineError {
    #[error("{n} observations, at least {min} required")]
    TooFewObservations { n: usize, min: usize },
    #[error("GARCH fit did not converge within {iterations} iterations")]
    NonConvergence {
        iterations: usize,
        best: Box<GarchModel>,
    },
    #[error("series lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("no observations left after exclusions")]
    Empty,
    #[error("returns contain non-finite values")]
    NonFinite,
    #[error("returns have zero variance")]
    ZeroVariance,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}
