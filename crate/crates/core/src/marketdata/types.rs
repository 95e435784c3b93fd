use std::fmt;

use serde::{Deserialize, Serialize};

use super::MarketDataError;

/// Nanoseconds since the Unix epoch.
pub type Nanos = i64;

pub const NANOS_PER_SEC: i64 = 1_000_000_000;
pub const NANOS_PER_DAY: i64 = 86_400 * NANOS_PER_SEC;

/// Top of book plus at most four further levels per side.
pub const MAX_DEPTH_LEVELS: usize = 5;

/// Calendar day (days since the epoch, UTC) a timestamp falls on.
pub fn day_index(ts: Nanos) -> i64 {
    ts.div_euclid(NANOS_PER_DAY)
}

/// Time of day with second resolution, serialized as `HH:MM:SS`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct TimeOfDay(u32);

impl TimeOfDay {
    pub fn from_secs(secs: u32) -> Option<Self> {
        (secs < 86_400).then_some(Self(secs))
    }

    pub fn secs(self) -> u32 {
        self.0
    }

    pub fn nanos(self) -> Nanos {
        self.0 as i64 * NANOS_PER_SEC
    }
}

impl fmt::Display for TimeOfDay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:02}:{:02}:{:02}",
            self.0 / 3600,
            (self.0 / 60) % 60,
            self.0 % 60
        )
    }
}

impl std::str::FromStr for TimeOfDay {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() < 2 || parts.len() > 3 {
            return Err(format!("expected HH:MM[:SS], got {s:?}"));
        }
        let field = |p: &str, max: u32| -> Result<u32, String> {
            let v: u32 = p
                .parse()
                .map_err(|_| format!("bad time field {p:?} in {s:?}"))?;
            if v >= max {
                return Err(format!("time field {v} out of range in {s:?}"));
            }
            Ok(v)
        };
        let h = field(parts[0], 24)?;
        let m = field(parts[1], 60)?;
        let sec = if parts.len() == 3 {
            field(parts[2], 60)?
        } else {
            0
        };
        Ok(Self(h * 3600 + m * 60 + sec))
    }
}

impl TryFrom<String> for TimeOfDay {
    type Error = String;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<TimeOfDay> for String {
    fn from(t: TimeOfDay) -> Self {
        t.to_string()
    }
}

/// Static instrument metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstrumentSpec {
    pub symbol: String,
    pub tick_size: f64,
    pub session_open: TimeOfDay,
    pub session_close: TimeOfDay,
    pub price_decimals: u32,
}

impl InstrumentSpec {
    pub fn validate(&self) -> Result<(), MarketDataError> {
        if !(self.tick_size > 0.0 && self.tick_size.is_finite()) {
            return Err(MarketDataError::InvalidSpec(format!(
                "tick_size must be positive, got {}",
                self.tick_size
            )));
        }
        if self.session_open >= self.session_close {
            return Err(MarketDataError::InvalidSpec(format!(
                "session_open {} must precede session_close {}",
                self.session_open, self.session_close
            )));
        }
        Ok(())
    }

    pub fn session_nanos(&self) -> i64 {
        self.session_close.nanos() - self.session_open.nanos()
    }

    pub fn session_secs(&self) -> f64 {
        self.session_nanos() as f64 / NANOS_PER_SEC as f64
    }

    /// `[open, close)` of the session on `day`.
    pub fn session_bounds(&self, day: i64) -> (Nanos, Nanos) {
        let base = day * NANOS_PER_DAY;
        (
            base + self.session_open.nanos(),
            base + self.session_close.nanos(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BookLevel {
    pub px: f64,
    pub sz: f64,
}

/// Top-of-book update, optionally with depth levels 2..=5.
#[derive(Debug, Clone, PartialEq)]
pub struct QuoteEvent {
    pub ts: Nanos,
    pub bid_px: f64,
    pub bid_sz: f64,
    pub ask_px: f64,
    pub ask_sz: f64,
    /// Levels 2.. on the bid side, best first.
    pub bid_depth: Vec<BookLevel>,
    /// Levels 2.. on the ask side, best first.
    pub ask_depth: Vec<BookLevel>,
}

impl QuoteEvent {
    pub fn top(ts: Nanos, bid_px: f64, bid_sz: f64, ask_px: f64, ask_sz: f64) -> Self {
        Self {
            ts,
            bid_px,
            bid_sz,
            ask_px,
            ask_sz,
            bid_depth: Vec::new(),
            ask_depth: Vec::new(),
        }
    }

    pub fn spread(&self) -> f64 {
        self.ask_px - self.bid_px
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.bid_px + self.ask_px)
    }

    pub fn has_depth(&self) -> bool {
        !self.bid_depth.is_empty() || !self.ask_depth.is_empty()
    }

    /// Mean displayed size per level over the first `levels` bid levels.
    pub fn mean_bid_depth(&self, levels: usize) -> f64 {
        mean_level_size(self.bid_sz, &self.bid_depth, levels)
    }

    pub fn mean_ask_depth(&self, levels: usize) -> f64 {
        mean_level_size(self.ask_sz, &self.ask_depth, levels)
    }
}

fn mean_level_size(top: f64, depth: &[BookLevel], levels: usize) -> f64 {
    let extra = levels.saturating_sub(1).min(depth.len());
    let total: f64 = top + depth[..extra].iter().map(|l| l.sz).sum::<f64>();
    total / (extra + 1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    #[serde(rename = "B")]
    Buy,
    #[serde(rename = "S")]
    Sell,
    #[serde(rename = "U")]
    Unknown,
}

impl Side {
    pub fn code(self) -> &'static str {
        match self {
            Side::Buy => "B",
            Side::Sell => "S",
            Side::Unknown => "U",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeEvent {
    pub ts: Nanos,
    pub px: f64,
    pub sz: f64,
    pub side: Side,
}

/// Per-window averages of the prevailing quote state plus trade totals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowAggregate {
    pub window_start: Nanos,
    pub window_end: Nanos,
    pub avg_spread: f64,
    pub avg_bid_vol: f64,
    pub avg_ask_vol: f64,
    pub avg_price: f64,
    pub traded_volume: f64,
    pub price_std: f64,
    pub n_quotes: usize,
    pub n_trades: usize,
    pub valid: bool,
    /// Window was cut short by the session close.
    pub truncated: bool,
    /// Prevailing mid at the window start (first mid seen when the book
    /// opens inside the window).
    pub open_price: Option<f64>,
    /// Prevailing mid at the window end.
    pub close_price: Option<f64>,
    pub last_trade_px: Option<f64>,
    /// Time-weighted mean size per level over the configured depth levels;
    /// absent when the quotes carry no depth.
    pub depth_bid_vol: Option<f64>,
    pub depth_ask_vol: Option<f64>,
}

impl WindowAggregate {
    /// ΔT in seconds.
    pub fn duration_secs(&self) -> f64 {
        (self.window_end - self.window_start) as f64 / NANOS_PER_SEC as f64
    }

    pub fn day(&self) -> i64 {
        day_index(self.window_start)
    }

    /// True when a usable quote state was observed, regardless of trading.
    pub fn has_book(&self) -> bool {
        self.n_quotes > 0 && self.avg_spread > 0.0
    }

    pub fn book_volume(&self) -> f64 {
        self.avg_bid_vol + self.avg_ask_vol
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn time_of_day_round_trips_through_json() {
        let t: TimeOfDay = "08:30:15".parse().unwrap();
        assert_eq!(t.secs(), 8 * 3600 + 30 * 60 + 15);
        let json = serde_json::to_string(&t).unwrap();
        assert_eq!(json, "\"08:30:15\"");
        let back: TimeOfDay = serde_json::from_str(&json).unwrap();
        assert_eq!(back, t);
        assert!("25:00".parse::<TimeOfDay>().is_err());
        assert!("nonsense".parse::<TimeOfDay>().is_err());
    }

    #[test]
    fn spec_validation() {
        let mut spec = InstrumentSpec {
            symbol: "X".into(),
            tick_size: 0.01,
            session_open: "08:00".parse().unwrap(),
            session_close: "16:30".parse().unwrap(),
            price_decimals: 2,
        };
        assert!(spec.validate().is_ok());
        assert_eq!(spec.session_secs(), 30_600.0);
        spec.tick_size = 0.0;
        assert!(spec.validate().is_err());
        spec.tick_size = 0.01;
        spec.session_close = spec.session_open;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn depth_means_use_available_levels() {
        let mut q = QuoteEvent::top(0, 99.0, 100.0, 101.0, 200.0);
        assert_eq!(q.mean_bid_depth(5), 100.0);
        q.bid_depth = vec![
            BookLevel {
                px: 98.0,
                sz: 300.0,
            },
            BookLevel {
                px: 97.0,
                sz: 500.0,
            },
        ];
        assert_eq!(q.mean_bid_depth(3), 300.0);
        assert_eq!(q.mean_bid_depth(2), 200.0);
        assert_eq!(q.mean_bid_depth(5), 300.0);
    }

    #[test]
    fn day_index_handles_pre_epoch() {
        assert_eq!(day_index(0), 0);
        assert_eq!(day_index(NANOS_PER_DAY - 1), 0);
        assert_eq!(day_index(-1), -1);
    }
}
