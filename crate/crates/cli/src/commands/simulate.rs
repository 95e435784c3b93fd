use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use instvol::estimators::correction_coefficient;
use instvol::simulator::{calibrate_equilibrium, generate_market, write_market, SimConfig};
use serde::{Deserialize, Serialize};

use crate::config::MANIFEST_FILE;
use crate::error::{CliError, Result};
use crate::output::Staging;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniverseEntry {
    #[serde(flatten)]
    pub market: SimConfig,
    /// Group label carried into grouped invariant reports.
    #[serde(default)]
    pub group: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    /// Recalibrate every instrument's trade rate so that γ = 1.
    pub equilibrium: bool,
    /// One entry per instrument. A single instrument is written directly
    /// into the output directory, several into one subdirectory each.
    pub instruments: Vec<UniverseEntry>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            equilibrium: false,
            instruments: vec![UniverseEntry {
                market: SimConfig::default(),
                group: None,
            }],
        }
    }
}

/// Expected characteristic times of a configuration, in seconds.
#[derive(Debug, Clone, Serialize)]
pub struct Expected {
    pub step_rate: f64,
    pub t_price: f64,
    pub t_volume: Option<f64>,
    pub gamma: Option<f64>,
}

impl Expected {
    pub fn of(cfg: &SimConfig) -> Result<Self> {
        let s = cfg.spread();
        let t_price = cfg.window * (s / cfg.true_sigma).powi(2);
        let p = correction_coefficient(cfg.spread_ticks as f64)?;
        let t_volume = (cfg.trade_rate > 0.0)
            .then(|| 2.0 * cfg.book_depth_per_level / (cfg.trade_rate * cfg.mean_trade_size * p));
        Ok(Self {
            step_rate: cfg.step_rate(),
            t_price,
            t_volume,
            gamma: t_volume
                .filter(|_| t_price.is_finite())
                .map(|tv| (tv / t_price).sqrt()),
        })
    }
}

#[derive(Debug, Serialize)]
struct ManifestInstrument {
    symbol: String,
    dir: PathBuf,
    group: Option<String>,
    /// Trade rate before calibration.
    requested_trade_rate: f64,
    config: SimConfig,
    expected: Expected,
    n_quotes: usize,
    n_trades: usize,
    files: Vec<PathBuf>,
}

#[derive(Debug, Serialize)]
struct Manifest {
    generator: String,
    seed: Option<u64>,
    equilibrium: bool,
    instruments: Vec<ManifestInstrument>,
}

pub fn run(
    mut cfg: SimulateConfig,
    seed: Option<u64>,
    window: Option<f64>,
    equilibrium: bool,
    stage: &mut Staging,
) -> Result<()> {
    cfg.equilibrium |= equilibrium;
    if cfg.instruments.is_empty() {
        return Err(CliError::Invalid("no instruments to simulate".into()));
    }
    let symbols: BTreeSet<&str> = cfg
        .instruments
        .iter()
        .map(|e| e.market.symbol.as_str())
        .collect();
    if symbols.len() != cfg.instruments.len() {
        return Err(CliError::Invalid(
            "instrument symbols must be unique".into(),
        ));
    }
    let single = cfg.instruments.len() == 1;
    let mut manifest = Manifest {
        generator: format!("instvol {}", env!("CARGO_PKG_VERSION")),
        seed,
        equilibrium: cfg.equilibrium,
        instruments: Vec::new(),
    };
    for (i, entry) in cfg.instruments.iter().enumerate() {
        let mut market_cfg = entry.market.clone();
        if let Some(s) = seed {
            market_cfg.seed = s.wrapping_add(i as u64);
        }
        if let Some(w) = window {
            market_cfg.window = w;
        }
        let requested = market_cfg.trade_rate;
        if cfg.equilibrium {
            market_cfg = calibrate_equilibrium(&market_cfg)
                .map_err(|e| CliError::from(e).for_instrument(&market_cfg.symbol))?;
            log::info!(
                "{}: calibrated trade rate {} -> {}",
                market_cfg.symbol,
                requested,
                market_cfg.trade_rate
            );
        }
        let market = generate_market(&market_cfg)
            .map_err(|e| CliError::from(e).for_instrument(&market_cfg.symbol))?;
        let rel = if single {
            PathBuf::from(".")
        } else {
            PathBuf::from(&market_cfg.symbol)
        };
        let dir = stage.subdir(&rel)?;
        let files = write_market(&dir, &market)?;
        stage.register(&files);
        manifest.instruments.push(ManifestInstrument {
            symbol: market_cfg.symbol.clone(),
            dir: rel.clone(),
            group: entry.group.clone(),
            requested_trade_rate: requested,
            expected: Expected::of(&market_cfg)?,
            config: market_cfg,
            n_quotes: market.quotes.len(),
            n_trades: market.trades.len(),
            files: files
                .iter()
                .map(|f| rel.join(f.file_name().expect("file name")))
                .map(|p| clean(&p))
                .collect(),
        });
    }
    stage.write_json(MANIFEST_FILE, &manifest)
}

fn clean(p: &Path) -> PathBuf {
    p.strip_prefix(".")
        .map(Path::to_path_buf)
        .unwrap_or_else(|_| p.to_path_buf())
}
