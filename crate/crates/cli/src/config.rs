//! Command configuration files and input discovery.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate};
use instvol::marketdata::{
    ingest_quotes, ingest_trades, load_instrument, IngestOptions, NANOS_PER_DAY,
};
use instvol::simulator::{INSTRUMENT_FILE, QUOTES_FILE, TRADES_FILE};
use instvol::{InstrumentSpec, QuoteEvent, TradeEvent};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Reads a JSON config, or the defaults when no path is given. Relative
/// input paths are resolved against the config file's directory.
pub fn load_config<T: DeserializeOwned + Default + HasInputs>(path: Option<&Path>) -> Result<T> {
    let mut cfg: T = load_json(path)?;
    if let Some(base) = path.and_then(Path::parent) {
        cfg.inputs_mut().rebase(base);
    }
    Ok(cfg)
}

pub fn load_json<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// One instrument's files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSpec {
    pub quotes: PathBuf,
    pub trades: PathBuf,
    pub instrument: PathBuf,
    #[serde(default)]
    pub group: Option<String>,
}

impl InputSpec {
    fn in_dir(dir: &Path, group: Option<String>) -> Self {
        Self {
            quotes: dir.join(QUOTES_FILE),
            trades: dir.join(TRADES_FILE),
            instrument: dir.join(INSTRUMENT_FILE),
            group,
        }
    }
}

/// Inputs named in a config: explicit file triples and data directories.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Inputs {
    pub inputs: Vec<InputSpec>,
    /// Directories written by `simulate`, or holding `quotes.csv`,
    /// `trades.csv` and `instrument.json`.
    pub data: Vec<PathBuf>,
    /// Largest tolerated backwards step in input timestamps, in ns.
    pub max_regression_ns: Option<i64>,
}

pub trait HasInputs {
    fn inputs_mut(&mut self) -> &mut Inputs;
}

impl Inputs {
    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for i in &mut self.inputs {
            fix(&mut i.quotes);
            fix(&mut i.trades);
            fix(&mut i.instrument);
        }
        self.data.iter_mut().for_each(fix);
    }

    pub fn ingest_options(&self) -> IngestOptions {
        let mut o = IngestOptions::default();
        if let Some(ns) = self.max_regression_ns {
            o.max_regression_ns = ns;
        }
        o
    }

    /// Every instrument, with all paths checked to exist.
    pub fn resolve(&self, extra_dirs: &[PathBuf]) -> Result<Vec<InputSpec>> {
        let mut out = self.inputs.clone();
        for dir in self.data.iter().chain(extra_dirs) {
            out.extend(expand_data_dir(dir)?);
        }
        if out.is_empty() {
            return Err(CliError::Invalid(
                "no inputs: pass --data <dir> or list inputs in --config".into(),
            ));
        }
        for i in &out {
            for p in [&i.quotes, &i.trades, &i.instrument] {
                if !p.is_file() {
                    return Err(CliError::MissingInput(p.clone()));
                }
            }
        }
        Ok(out)
    }
}

#[derive(Deserialize)]
struct ManifestEntry {
    dir: PathBuf,
    #[serde(default)]
    group: Option<String>,
}

#[derive(Deserialize)]
struct ManifestInstruments {
    instruments: Vec<ManifestEntry>,
}

/// A directory with an `instrument.json` is one instrument. Otherwise the
/// instruments listed in its manifest are used, or failing that every
/// subdirectory holding an `instrument.json`, in name order.
fn expand_data_dir(dir: &Path) -> Result<Vec<InputSpec>> {
    if !dir.is_dir() {
        return Err(CliError::MissingInput(dir.to_path_buf()));
    }
    let manifest = dir.join(MANIFEST_FILE);
    let listed: Option<Vec<ManifestEntry>> = if manifest.is_file() {
        let text = fs::read_to_string(&manifest).map_err(CliError::io(&manifest))?;
        serde_json::from_str::<ManifestInstruments>(&text)
            .ok()
            .map(|m| m.instruments)
    } else {
        None
    };
    if dir.join(INSTRUMENT_FILE).is_file() {
        let group = listed
            .and_then(|l| l.into_iter().find(|e| e.dir == Path::new(".")))
            .and_then(|e| e.group);
        return Ok(vec![InputSpec::in_dir(dir, group)]);
    }
    if let Some(list) = listed {
        return Ok(list
            .into_iter()
            .map(|e| InputSpec::in_dir(&dir.join(e.dir), e.group))
            .collect());
    }
    let mut subdirs: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(CliError::io(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(INSTRUMENT_FILE).is_file())
        .collect();
    subdirs.sort();
    if subdirs.is_empty() {
        return Err(CliError::Invalid(format!(
            "{}: no {INSTRUMENT_FILE} in the directory or its subdirectories",
            dir.display()
        )));
    }
    Ok(subdirs.iter().map(|d| InputSpec::in_dir(d, None)).collect())
}

pub struct Loaded {
    pub spec: InstrumentSpec,
    pub group: Option<String>,
    pub quotes: Vec<QuoteEvent>,
    pub trades: Vec<TradeEvent>,
}

pub fn load(input: &InputSpec, opts: &IngestOptions) -> Result<Loaded> {
    let spec = load_instrument(&input.instrument)?;
    let q = ingest_quotes(&input.quotes, opts)?;
    if q.dropped > 0 {
        log::warn!(
            "{}: dropped {} locked or crossed quotes",
            input.quotes.display(),
            q.dropped
        );
    }
    let trades = ingest_trades(&input.trades, opts)?;
    log::info!(
        "{}: {} quotes, {} trades",
        spec.symbol,
        q.events.len(),
        trades.len()
    );
    Ok(Loaded {
        spec,
        group: input.group.clone(),
        quotes: q.events,
        trades,
    })
}

/// Calendar date of a day index (days since the epoch).
pub fn date_of_day(day: i64) -> String {
    DateTime::from_timestamp(day * (NANOS_PER_DAY / 1_000_000_000), 0)
        .map(|t| t.date_naive().to_string())
        .unwrap_or_else(|| day.to_string())
}

/// Day index of a `YYYY-MM-DD` date.
pub fn day_of_date(date: &str) -> Result<i64> {
    let d = NaiveDate::parse_from_str(date, "%Y-%m-%d")
        .map_err(|e| CliError::Invalid(format!("bad date {date:?}: {e}")))?;
    Ok(d.signed_duration_since(NaiveDate::default()).num_days())
}
