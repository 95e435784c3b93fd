//! Tick-data analytics for the spread/volume/volatility market invariant.
//!
//! The crate is organised bottom-up:
//!
//! - [`marketdata`]: quote/trade records, CSV ingestion and time-weighted
//!   window aggregation.
//! - [`estimators`]: characteristic execution times, the spread correction
//!   coefficient, the invariant `gamma` and the instantaneous volatility.
//! - [`simulator`]: a synthetic random-walk market with Poisson order flow
//!   and a passive limit-order fill simulator.
//! - [`statstests`]: Shapiro-Wilk and Kolmogorov-Smirnov normality tests and
//!   the invariant report tables.
//! - [`baselines`]: realized volatility, GARCH(1,1) and forecast evaluation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod estimators;
pub mod marketdata;
pub mod simulator;
pub mod statstests;

pub use estimators::{EstimateSet, EstimatorConfig, EstimatorError};
pub use marketdata::{InstrumentSpec, QuoteEvent, TradeEvent, WindowAggregate};
