//! Synthetic random-walk market and passive limit-order fill simulation.
//!
//! The generated market has a mid price on a tick grid that moves one tick
//! up or down at Poisson times, a constant spread of `spread_ticks`, touch
//! sizes resampled around `book_depth_per_level`, and Poisson trade arrivals
//! split evenly between buyers and sellers. A seller prints at the best bid
//! with probability `P(n)` and inside the spread otherwise, so that the
//! at-or-below-touch share of traded volume follows the correction
//! coefficient.

mod fills;

pub use fills::{simulate_passive_fills, FillSimConfig, FillSimResult, HorizonPolicy};

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Geometric};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimators::{correction_coefficient, EstimatorError};
use crate::marketdata::{
    write_quotes, write_trades, BookLevel, InstrumentSpec, MarketDataError, QuoteEvent, Side,
    TimeOfDay, TradeEvent, MAX_DEPTH_LEVELS, NANOS_PER_SEC,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulator config: {0}")]
    InvalidConfig(String),
    #[error("infeasible equilibrium: {0}")]
    Infeasible(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    MarketData(#[from] MarketDataError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error("quote or trade stream is empty")]
    EmptyStreams,
    #[error("no sell volume was observed during any order horizon")]
    NoObservations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub seed: u64,
    /// Session length in seconds.
    pub session_length: u32,
    pub tick_size: f64,
    pub initial_price: f64,
    /// Standard deviation of the mid price over one `window`, in price units.
    pub true_sigma: f64,
    /// Trades per second.
    pub trade_rate: f64,
    pub mean_trade_size: f64,
    /// Mean displayed size per book level.
    pub book_depth_per_level: f64,
    pub spread_ticks: u32,
    pub n_days: u32,
    /// Reference window for `true_sigma`, in seconds.
    pub window: f64,
    pub symbol: String,
    pub session_open: TimeOfDay,
    /// Touch size refreshes per second.
    pub quote_refresh_rate: f64,
    /// Book levels emitted per side, 1 to 5.
    pub depth_levels: usize,
    /// First simulated day, in days since the epoch.
    pub start_day: i64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            session_length: 30_600,
            tick_size: 0.01,
            initial_price: 100.0,
            true_sigma: 0.02,
            trade_rate: 0.25,
            mean_trade_size: 100.0,
            book_depth_per_level: 1000.0,
            spread_ticks: 1,
            n_days: 5,
            window: 300.0,
            symbol: "SIM".into(),
            session_open: TimeOfDay::from_secs(8 * 3600).expect("valid time"),
            quote_refresh_rate: 0.2,
            depth_levels: 1,
            start_day: 17_168,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidConfig(msg));
        let positive = [
            ("tick_size", self.tick_size),
            ("initial_price", self.initial_price),
            ("window", self.window),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        let non_negative = [
            ("true_sigma", self.true_sigma),
            ("trade_rate", self.trade_rate),
            ("quote_refresh_rate", self.quote_refresh_rate),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be non-negative, got {v}"));
            }
        }
        if !(self.mean_trade_size >= 1.0 && self.mean_trade_size.is_finite()) {
            return bad(format!(
                "mean_trade_size must be at least 1, got {}",
                self.mean_trade_size
            ));
        }
        if !(self.book_depth_per_level >= 1.0 && self.book_depth_per_level.is_finite()) {
            return bad(format!(
                "book_depth_per_level must be at least 1, got {}",
                self.book_depth_per_level
            ));
        }
        if self.spread_ticks < 1 {
            return bad("spread_ticks must be at least 1".into());
        }
        if self.n_days < 1 {
            return bad("n_days must be at least 1".into());
        }
        if !(1..=MAX_DEPTH_LEVELS).contains(&self.depth_levels) {
            return bad(format!(
                "depth_levels must be in 1..={MAX_DEPTH_LEVELS}, got {}",
                self.depth_levels
            ));
        }
        if self.session_length == 0 || self.session_open.secs() + self.session_length >= 86_400 {
            return bad(format!(
                "session of {} s starting at {} does not fit in one day",
                self.session_length, self.session_open
            ));
        }
        if self.initial_price < (self.spread_ticks as f64 + 1.0) * self.tick_size {
            return bad("initial_price must exceed the spread by at least one tick".into());
        }
        Ok(())
    }

    pub fn spread(&self) -> f64 {
        self.spread_ticks as f64 * self.tick_size
    }

    /// Smallest number of decimals that represents the tick grid exactly.
    pub fn price_decimals(&self) -> u32 {
        (0..=10)
            .find(|&d| {
                let scaled = self.tick_size * 10f64.powi(d as i32);
                (scaled - scaled.round()).abs() < 1e-9 * scaled.max(1.0)
            })
            .unwrap_or(10)
    }

    pub fn instrument(&self) -> Result<InstrumentSpec, SimError> {
        let close = TimeOfDay::from_secs(self.session_open.secs() + self.session_length)
            .ok_or_else(|| SimError::InvalidConfig("session close past midnight".into()))?;
        let spec = InstrumentSpec {
            symbol: self.symbol.clone(),
            tick_size: self.tick_size,
            session_open: self.session_open,
            session_close: close,
            price_decimals: self.price_decimals(),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Mid-price steps per second.
    pub fn step_rate(&self) -> f64 {
        (self.true_sigma / self.tick_size).powi(2) / self.window
    }
}

/// Sets `trade_rate` so that the expected characteristic times coincide:
/// `T_price = W·s²/σ²` equals `T_volume = 2D / (rate·m·P(n))`.
pub fn calibrate_equilibrium(cfg: &SimConfig) -> Result<SimConfig, SimError> {
    cfg.validate()?;
    let p = correction_coefficient(cfg.spread_ticks as f64)?;
    let s = cfg.spread();
    let rate = 2.0 * cfg.book_depth_per_level * cfg.true_sigma.powi(2)
        / (s * s * cfg.mean_trade_size * cfg.window * p);
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(SimError::Infeasible(format!(
            "required trade_rate is {rate}"
        )));
    }
    Ok(SimConfig {
        trade_rate: rate,
        ..cfg.clone()
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimMarket {
    pub config: SimConfig,
    pub spec: InstrumentSpec,
    pub quotes: Vec<QuoteEvent>,
    pub trades: Vec<TradeEvent>,
}

struct SizeSampler {
    lo: i64,
    hi: i64,
}

impl SizeSampler {
    fn new(mean: f64) -> Self {
        let half = (mean - 1.0) / 2.0;
        Self {
            lo: (mean - half).ceil() as i64,
            hi: (mean + half).floor() as i64,
        }
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        rng.random_range(self.lo..=self.hi) as f64
    }
}

struct Book {
    bid_ticks: i64,
    spread_ticks: i64,
    tick: f64,
    scale: f64,
    bid_sizes: Vec<f64>,
    ask_sizes: Vec<f64>,
}

impl Book {
    fn resample(&mut self, sizes: &SizeSampler, rng: &mut impl Rng) {
        for s in self.bid_sizes.iter_mut().chain(self.ask_sizes.iter_mut()) {
            *s = sizes.sample(rng);
        }
    }

    /// Grid price rounded to the written decimals, so prices survive a CSV
    /// round trip unchanged.
    fn px(&self, ticks: i64) -> f64 {
        (ticks as f64 * self.tick * self.scale).round() / self.scale
    }

    fn quote(&self, ts: i64) -> QuoteEvent {
        let ask_ticks = self.bid_ticks + self.spread_ticks;
        let mut q = QuoteEvent::top(
            ts,
            self.px(self.bid_ticks),
            self.bid_sizes[0],
            self.px(ask_ticks),
            self.ask_sizes[0],
        );
        for k in 1..self.bid_sizes.len() {
            let bid_level = self.bid_ticks - k as i64;
            if bid_level >= 1 {
                q.bid_depth.push(BookLevel {
                    px: self.px(bid_level),
                    sz: self.bid_sizes[k],
                });
            }
            q.ask_depth.push(BookLevel {
                px: self.px(ask_ticks + k as i64),
                sz: self.ask_sizes[k],
            });
        }
        q
    }
}

/// Generates `n_days` consecutive sessions. Deterministic per seed.
pub fn generate_market(cfg: &SimConfig) -> Result<SimMarket, SimError> {
    cfg.validate()?;
    let spec = cfg.instrument()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.spread_ticks as i64;
    let p_touch = correction_coefficient(n as f64)?;
    let sizes = SizeSampler::new(cfg.book_depth_per_level);
    let trade_size = Geometric::new(1.0 / cfg.mean_trade_size)
        .map_err(|e| SimError::InvalidConfig(format!("mean_trade_size: {e}")))?;

    let step_rate = cfg.step_rate();
    let total_rate = step_rate + cfg.trade_rate + cfg.quote_refresh_rate;
    let gaps = (total_rate > 0.0)
        .then(|| {
            Exp::new(total_rate).map_err(|e| SimError::InvalidConfig(format!("event rate: {e}")))
        })
        .transpose()?;

    let mut book = Book {
        bid_ticks: ((cfg.initial_price / cfg.tick_size) - n as f64 / 2.0)
            .round()
            .max(1.0) as i64,
        spread_ticks: n,
        tick: cfg.tick_size,
        scale: 10f64.powi(spec.price_decimals as i32),
        bid_sizes: vec![0.0; cfg.depth_levels],
        ask_sizes: vec![0.0; cfg.depth_levels],
    };

    let mut quotes = Vec::new();
    let mut trades: Vec<TradeEvent> = Vec::new();
    let session = cfg.session_length as f64;
    for d in 0..cfg.n_days as i64 {
        let (open, _) = spec.session_bounds(cfg.start_day + d);
        book.resample(&sizes, &mut rng);
        quotes.push(book.quote(open));
        let Some(gaps) = &gaps else { continue };
        let mut offset = 0.0;
        loop {
            offset += gaps.sample(&mut rng);
            if offset >= session {
                break;
            }
            let ts = open + (offset * NANOS_PER_SEC as f64) as i64;
            let u = rng.random::<f64>() * total_rate;
            if u < step_rate {
                let up = rng.random_bool(0.5);
                book.bid_ticks += if up || book.bid_ticks <= 1 { 1 } else { -1 };
                book.resample(&sizes, &mut rng);
                quotes.push(book.quote(ts));
            } else if u < step_rate + cfg.trade_rate {
                let side = if rng.random_bool(0.5) {
                    Side::Buy
                } else {
                    Side::Sell
                };
                let inside = if n > 1 && !rng.random_bool(p_touch) {
                    rng.random_range(1..n)
                } else {
                    0
                };
                let px_ticks = match side {
                    Side::Sell => book.bid_ticks + inside,
                    _ => book.bid_ticks + n - inside,
                };
                let ts = match trades.last() {
                    Some(prev) if prev.ts >= ts => prev.ts + 1,
                    _ => ts,
                };
                trades.push(TradeEvent {
                    ts,
                    px: book.px(px_ticks),
                    sz: 1.0 + trade_size.sample(&mut rng) as f64,
                    side,
                });
            } else {
                book.resample(&sizes, &mut rng);
                quotes.push(book.quote(ts));
            }
        }
    }

    Ok(SimMarket {
        config: cfg.clone(),
        spec,
        quotes,
        trades,
    })
}

pub const QUOTES_FILE: &str = "quotes.csv";
pub const TRADES_FILE: &str = "trades.csv";
pub const INSTRUMENT_FILE: &str = "instrument.json";

fn create(path: &Path) -> Result<BufWriter<File>, SimError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| SimError::Io {
            path: path.to_path_buf(),
            source,
        })
}

/// Writes `quotes.csv`, `trades.csv` and `instrument.json` into `dir` and
/// returns their paths.
pub fn write_market(dir: &Path, market: &SimMarket) -> Result<Vec<PathBuf>, SimError> {
    let decimals = market.spec.price_decimals;
    let quotes = dir.join(QUOTES_FILE);
    write_quotes(create(&quotes)?, &market.quotes, decimals)?;
    let trades = dir.join(TRADES_FILE);
    write_trades(create(&trades)?, &market.trades, decimals)?;
    let instrument = dir.join(INSTRUMENT_FILE);
    let json = serde_json::to_string_pretty(&market.spec).expect("instrument spec serializes");
    std::fs::write(&instrument, json + "\n").map_err(|source| SimError::Io {
        path: instrument.clone(),
        source,
    })?;
    Ok(vec![quotes, trades, instrument])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SimConfig {
        SimConfig {
            n_days: 2,
            session_length: 3600,
            ..SimConfig::default()
        }
    }

    #[test]
    fn calibration_leaves_equilibrium_config_unchanged() {
        // spread = σ, n = 1, window volume 2D equals the book
        let cfg = SimConfig {
            true_sigma: 0.01,
            book_depth_per_level: 500.0,
            mean_trade_size: 10.0,
            trade_rate: 1000.0 / (10.0 * 300.0),
            ..SimConfig::default()
        };
        let cal = calibrate_equilibrium(&cfg).unwrap();
        assert!((cal.trade_rate - cfg.trade_rate).abs() < 1e-12 * cfg.trade_rate);
    }

    #[test]
    fn calibrated_rate_is_linear_in_book_depth() {
        let a = calibrate_equilibrium(&SimConfig::default()).unwrap();
        let b = calibrate_equilibrium(&SimConfig {
            book_depth_per_level: 2000.0,
            ..SimConfig::default()
        })
        .unwrap();
        assert!((b.trade_rate / a.trade_rate - 2.0).abs() < 1e-12);
    }

    #[test]
    fn calibration_rejects_static_price() {
        let cfg = SimConfig {
            true_sigma: 0.0,
            ..SimConfig::default()
        };
        assert!(matches!(
            calibrate_equilibrium(&cfg),
            Err(SimError::Infeasible(_))
        ));
    }

    #[test]
    fn zero_trade_rate_gives_no_trades() {
        let m = generate_market(&SimConfig {
            trade_rate: 0.0,
            ..small()
        })
        .unwrap();
        assert!(m.trades.is_empty());
        assert!(!m.quotes.is_empty());
        let mut buf = Vec::new();
        write_trades(&mut buf, &m.trades, 2).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "ts_ns,px,sz,side\n");
    }

    #[test]
    fn generation_is_deterministic_per_seed() {
        let a = generate_market(&small()).unwrap();
        let b = generate_market(&small()).unwrap();
        assert_eq!(a, b);
        let c = generate_market(&SimConfig { seed: 2, ..small() }).unwrap();
        assert_ne!(a.trades, c.trades);
    }

    #[test]
    fn prices_on_grid_and_trades_strictly_increasing() {
        let cfg = SimConfig {
            spread_ticks: 3,
            depth_levels: 3,
            ..small()
        };
        let m = generate_market(&cfg).unwrap();
        let on_grid = |px: f64| ((px / cfg.tick_size) - (px / cfg.tick_size).round()).abs() < 1e-6;
        assert!(m.trades.windows(2).all(|w| w[0].ts < w[1].ts));
        assert!(m.quotes.windows(2).all(|w| w[0].ts <= w[1].ts));
        for q in &m.quotes {
            assert!(on_grid(q.bid_px) && on_grid(q.ask_px));
            assert!((q.spread() - 0.03).abs() < 1e-9);
            assert_eq!(q.ask_depth.len(), 2);
            assert!(q.bid_sz >= 1.0 && q.ask_sz >= 1.0);
        }
        for t in &m.trades {
            assert!(on_grid(t.px) && t.sz >= 1.0);
        }
        for t in &m.trades {
            let (open, close) = m.spec.session_bounds(crate::marketdata::day_index(t.ts));
            assert!(t.ts >= open && t.ts < close);
        }
    }

    #[test]
    fn size_sampler_is_centred_on_the_mean() {
        let s = SizeSampler::new(1000.0);
        assert_eq!((s.lo + s.hi) as f64 / 2.0, 1000.0);
        let s = SizeSampler::new(1.0);
        assert_eq!((s.lo, s.hi), (1, 1));
        let s = SizeSampler::new(4.0);
        assert_eq!((s.lo + s.hi) as f64 / 2.0, 4.0);
    }

    #[test]
    fn price_decimals_follow_tick() {
        let d = |tick| {
            SimConfig {
                tick_size: tick,
                ..SimConfig::default()
            }
            .price_decimals()
        };
        assert_eq!(d(0.01), 2);
        assert_eq!(d(0.5), 1);
        assert_eq!(d(1.0), 0);
        assert_eq!(d(0.0025), 4);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(SimConfig {
            spread_ticks: 0,
            ..SimConfig::default()
        }
        .validate()
        .is_err());
        assert!(SimConfig {
            tick_size: 0.0,
            ..SimConfig::default()
        }
        .validate()
        .is_err());
        assert!(SimConfig {
            session_length: 90_000,
            ..SimConfig::default()
        }
        .validate()
        .is_err());
        assert!(SimConfig {
            depth_levels: 6,
            ..SimConfig::default()
        }
        .validate()
        .is_err());
        assert!(SimConfig {
            mean_trade_size: 0.5,
            ..SimConfig::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn config_round_trips_through_json_with_defaults() {
        let cfg: SimConfig = serde_json::from_str(r#"{"seed": 7, "spread_ticks": 2}"#).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.spread_ticks, 2);
        assert_eq!(cfg.window, 300.0);
        let back: SimConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn write_market_produces_readable_files() {
        let dir = tempfile::tempdir().unwrap();
        let m = generate_market(&small()).unwrap();
        let paths = write_market(dir.path(), &m).unwrap();
        assert_eq!(paths.len(), 3);
        let spec = crate::marketdata::load_instrument(&paths[2]).unwrap();
        assert_eq!(spec, m.spec);
        let opts = crate::marketdata::IngestOptions::default();
        let q = crate::marketdata::ingest_quotes(&paths[0], &opts).unwrap();
        assert_eq!(q.events.len(), m.quotes.len());
        assert_eq!(q.dropped, 0);
        let t = crate::marketdata::ingest_trades(&paths[1], &opts).unwrap();
        assert_eq!(t, m.trades);
    }

    #[test]
    fn write_market_reports_unwritable_path() {
        let m = generate_market(&small()).unwrap();
        let err = write_market(Path::new("/nonexistent/dir/for/sure"), &m).unwrap_err();
        assert!(matches!(err, SimError::Io { .. }));
    }
}
