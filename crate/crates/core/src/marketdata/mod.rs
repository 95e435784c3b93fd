//! Quote/trade data model, file ingestion and window aggregation.

mod aggregate;
mod ingest;
mod types;

pub use aggregate::{
    aggregate_daily, aggregate_windows, merge_windows, sample_mid_prices, write_aggregates,
    AggregationConfig, DailyConfig,
};
pub use ingest::{
    ingest_quotes, ingest_trades, load_instrument, read_quotes, read_trades, write_quotes,
    write_trades, IngestOptions, QuoteIngest,
};
pub use types::{
    day_index, BookLevel, InstrumentSpec, Nanos, QuoteEvent, Side, TimeOfDay, TradeEvent,
    WindowAggregate, MAX_DEPTH_LEVELS, NANOS_PER_DAY, NANOS_PER_SEC,
};

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MarketDataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{origin}:{line}: {message}")]
    Parse {
        origin: String,
        line: u64,
        message: String,
    },
    #[error("{origin}:{line}: timestamp {ts} is {behind_ns} ns behind the previous row (tolerance {tolerance_ns} ns)")]
    Ordering {
        origin: String,
        line: u64,
        ts: Nanos,
        behind_ns: i64,
        tolerance_ns: i64,
    },
    #[error("invalid instrument spec: {0}")]
    InvalidSpec(String),
    #[error("invalid aggregation config: {0}")]
    Config(String),
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
}
