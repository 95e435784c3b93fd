use std::path::PathBuf;

use instvol::baselines::BaselineError;
use instvol::marketdata::MarketDataError;
use instvol::simulator::SimError;
use instvol::statstests::StatsError;
use instvol::EstimatorError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: invalid config: {message}")]
    Config { path: PathBuf, message: String },
    #[error("input not found: {0}")]
    MissingInput(PathBuf),
    #[error("{0}")]
    Invalid(String),
    #[error("{symbol}: {source}")]
    Instrument {
        symbol: String,
        #[source]
        source: Box<CliError>,
    },
    #[error(transparent)]
    MarketData(#[from] MarketDataError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Simulator(#[from] SimError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }

    pub fn for_instrument(self, symbol: &str) -> Self {
        CliError::Instrument {
            symbol: symbol.to_string(),
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
