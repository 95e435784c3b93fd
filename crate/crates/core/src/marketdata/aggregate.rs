//! Time-window aggregation of quote/trade streams.
//!
//! Quote-derived averages are weighted by how long each quote state
//! prevailed inside the window. The state carried into a window is the last
//! quote of the same calendar day, so nothing crosses an overnight gap.

use std::collections::BTreeSet;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::types::{
    day_index, InstrumentSpec, Nanos, QuoteEvent, TradeEvent, WindowAggregate, NANOS_PER_DAY,
    NANOS_PER_SEC,
};
use super::MarketDataError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AggregationConfig {
    /// Window length ΔT in seconds.
    pub window_secs: f64,
    /// Number of equal sub-intervals whose squared log returns make up the
    /// window's price standard deviation.
    pub sub_intervals: usize,
    /// Levels used for the depth-averaged book volumes.
    pub depth_levels: usize,
}

impl Default for AggregationConfig {
    fn default() -> Self {
        Self {
            window_secs: 300.0,
            sub_intervals: 5,
            depth_levels: 5,
        }
    }
}

impl AggregationConfig {
    pub fn with_window(window_secs: f64) -> Self {
        Self {
            window_secs,
            ..Self::default()
        }
    }
}

/// Daily roll-up: intraday windows are averaged, the daily price standard
/// deviation comes from fixed sub-interval returns across the session.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DailyConfig {
    pub window_secs: f64,
    pub sub_interval_secs: f64,
    pub depth_levels: usize,
}

impl Default for DailyConfig {
    fn default() -> Self {
        Self {
            window_secs: 300.0,
            sub_interval_secs: 300.0,
            depth_levels: 5,
        }
    }
}

fn secs_to_nanos(secs: f64) -> i64 {
    (secs * NANOS_PER_SEC as f64).round() as i64
}

fn day_slice<T>(events: &[T], lo: Nanos, hi: Nanos, ts: impl Fn(&T) -> Nanos) -> &[T] {
    let a = events.partition_point(|e| ts(e) < lo);
    let b = events.partition_point(|e| ts(e) < hi);
    &events[a..b]
}

fn state_at(day_quotes: &[QuoteEvent], t: Nanos) -> Option<&QuoteEvent> {
    let i = day_quotes.partition_point(|q| q.ts <= t);
    i.checked_sub(1).map(|i| &day_quotes[i])
}

/// Sum of squared log returns between consecutive known mids.
fn sum_sq_log_returns(samples: &[Option<f64>]) -> f64 {
    samples
        .windows(2)
        .filter_map(|w| match (w[0], w[1]) {
            (Some(a), Some(b)) if a > 0.0 && b > 0.0 => Some((b / a).ln().powi(2)),
            _ => None,
        })
        .sum()
}

fn mids_at(day_quotes: &[QuoteEvent], bounds: &[Nanos]) -> Vec<Option<f64>> {
    bounds
        .iter()
        .map(|&b| state_at(day_quotes, b).map(QuoteEvent::mid))
        .collect()
}

/// Sessions (calendar days) that contain at least one in-session event.
fn session_days(quotes: &[QuoteEvent], trades: &[TradeEvent], spec: &InstrumentSpec) -> Vec<i64> {
    let in_session = |ts: Nanos| {
        let (open, close) = spec.session_bounds(day_index(ts));
        ts >= open && ts < close
    };
    quotes
        .iter()
        .map(|q| q.ts)
        .chain(trades.iter().map(|t| t.ts))
        .filter(|&ts| in_session(ts))
        .map(day_index)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

#[derive(Default)]
struct Weighted {
    weight: f64,
    spread: f64,
    bid: f64,
    ask: f64,
    price: f64,
    depth_weight: f64,
    depth_bid: f64,
    depth_ask: f64,
}

impl Weighted {
    fn add(&mut self, q: &QuoteEvent, dt: i64, depth_levels: usize) {
        if dt <= 0 {
            return;
        }
        let w = dt as f64;
        self.weight += w;
        self.spread += w * q.spread();
        self.bid += w * q.bid_sz;
        self.ask += w * q.ask_sz;
        self.price += w * q.mid();
        if q.has_depth() {
            self.depth_weight += w;
            self.depth_bid += w * q.mean_bid_depth(depth_levels);
            self.depth_ask += w * q.mean_ask_depth(depth_levels);
        }
    }

    fn mean(&self, sum: f64) -> f64 {
        if self.weight > 0.0 {
            sum / self.weight
        } else {
            0.0
        }
    }

    fn depth_mean(&self, sum: f64) -> Option<f64> {
        (self.depth_weight > 0.0).then(|| sum / self.depth_weight)
    }
}

fn build_window(
    day_quotes: &[QuoteEvent],
    session_trades: &[TradeEvent],
    start: Nanos,
    end: Nanos,
    truncated: bool,
    cfg: &AggregationConfig,
) -> WindowAggregate {
    let i0 = day_quotes.partition_point(|q| q.ts <= start);
    let mut cur = i0.checked_sub(1).map(|i| &day_quotes[i]);
    let mut open_price = cur.map(QuoteEvent::mid);
    let mut n_quotes = usize::from(cur.is_some());
    let mut t = start;
    let mut acc = Weighted::default();
    for q in day_quotes[i0..].iter().take_while(|q| q.ts < end) {
        if let Some(c) = cur {
            acc.add(c, q.ts - t, cfg.depth_levels);
        }
        cur = Some(q);
        t = q.ts;
        n_quotes += 1;
        open_price.get_or_insert(q.mid());
    }
    if let Some(c) = cur {
        acc.add(c, end - t, cfg.depth_levels);
    }
    let close_price = state_at(day_quotes, end).map(QuoteEvent::mid);

    let trades = day_slice(session_trades, start, end, |t| t.ts);
    let traded_volume: f64 = trades.iter().map(|t| t.sz).sum();
    let last_trade_px = trades.last().map(|t| t.px);

    let avg_price = acc.mean(acc.price);
    let k = cfg.sub_intervals.max(1) as i64;
    let len = end - start;
    let bounds: Vec<Nanos> = (0..=k).map(|j| start + len * j / k).collect();
    let mut samples = mids_at(day_quotes, &bounds);
    if samples[0].is_none() {
        samples[0] = open_price;
    }
    let price_std = if avg_price > 0.0 {
        avg_price * sum_sq_log_returns(&samples).sqrt()
    } else {
        0.0
    };

    let avg_spread = acc.mean(acc.spread);
    let n_trades = trades.len();
    WindowAggregate {
        window_start: start,
        window_end: end,
        avg_spread,
        avg_bid_vol: acc.mean(acc.bid),
        avg_ask_vol: acc.mean(acc.ask),
        avg_price,
        traded_volume,
        price_std,
        n_quotes,
        n_trades,
        valid: n_trades > 0 && n_quotes > 0 && acc.weight > 0.0 && avg_spread > 0.0,
        truncated,
        open_price,
        close_price,
        last_trade_px,
        depth_bid_vol: acc.depth_mean(acc.depth_bid),
        depth_ask_vol: acc.depth_mean(acc.depth_ask),
    }
}

/// Partitions every session touched by the streams into contiguous windows
/// of `cfg.window_secs`, the last one truncated at the session close.
///
/// Both streams must be sorted by timestamp.
pub fn aggregate_windows(
    quotes: &[QuoteEvent],
    trades: &[TradeEvent],
    spec: &InstrumentSpec,
    cfg: &AggregationConfig,
) -> Result<Vec<WindowAggregate>, MarketDataError> {
    spec.validate()?;
    let window = secs_to_nanos(cfg.window_secs);
    if !(cfg.window_secs.is_finite() && window > 0) {
        return Err(MarketDataError::Config(format!(
            "window must be positive, got {} s",
            cfg.window_secs
        )));
    }
    if window > spec.session_nanos() {
        return Err(MarketDataError::Config(format!(
            "window of {} s exceeds the {} s session",
            cfg.window_secs,
            spec.session_secs()
        )));
    }
    if cfg.sub_intervals == 0 {
        return Err(MarketDataError::Config(
            "sub_intervals must be at least 1".into(),
        ));
    }

    let mut out = Vec::new();
    for day in session_days(quotes, trades, spec) {
        let (open, close) = spec.session_bounds(day);
        let dq = day_slice(
            quotes,
            day * NANOS_PER_DAY,
            (day + 1) * NANOS_PER_DAY,
            |q| q.ts,
        );
        let dt = day_slice(trades, open, close, |t| t.ts);
        let mut start = open;
        while start < close {
            let end = (start + window).min(close);
            out.push(build_window(dq, dt, start, end, end - start < window, cfg));
            start = end;
        }
    }
    Ok(out)
}

/// Combines contiguous windows into one aggregate.
///
/// Quote averages are duration-weighted over the valid windows only; trade
/// totals cover every window; price variances add.
pub fn merge_windows(windows: &[WindowAggregate]) -> Option<WindowAggregate> {
    let first = windows.first()?;
    let last = windows.last()?;

    let mut weight = 0.0;
    let (mut spread, mut bid, mut ask, mut price) = (0.0, 0.0, 0.0, 0.0);
    let (mut dw, mut dbid, mut dask) = (0.0, 0.0, 0.0);
    let mut rel_var = 0.0;
    for w in windows {
        if w.avg_price > 0.0 {
            rel_var += (w.price_std / w.avg_price).powi(2);
        }
        if !w.valid {
            continue;
        }
        let d = w.duration_secs();
        weight += d;
        spread += d * w.avg_spread;
        bid += d * w.avg_bid_vol;
        ask += d * w.avg_ask_vol;
        price += d * w.avg_price;
        if let (Some(b), Some(a)) = (w.depth_bid_vol, w.depth_ask_vol) {
            dw += d;
            dbid += d * b;
            dask += d * a;
        }
    }
    let mean = |s: f64| if weight > 0.0 { s / weight } else { 0.0 };
    let avg_spread = mean(spread);
    let avg_price = mean(price);
    let n_trades: usize = windows.iter().map(|w| w.n_trades).sum();
    Some(WindowAggregate {
        window_start: first.window_start,
        window_end: last.window_end,
        avg_spread,
        avg_bid_vol: mean(bid),
        avg_ask_vol: mean(ask),
        avg_price,
        traded_volume: windows.iter().map(|w| w.traded_volume).sum(),
        price_std: avg_price * rel_var.sqrt(),
        n_quotes: windows.iter().map(|w| w.n_quotes).sum(),
        n_trades,
        valid: weight > 0.0 && n_trades > 0 && avg_spread > 0.0,
        truncated: windows.iter().any(|w| w.truncated),
        open_price: windows.iter().find_map(|w| w.open_price),
        close_price: windows.iter().rev().find_map(|w| w.close_price),
        last_trade_px: windows.iter().rev().find_map(|w| w.last_trade_px),
        depth_bid_vol: (dw > 0.0).then(|| dbid / dw),
        depth_ask_vol: (dw > 0.0).then(|| dask / dw),
    })
}

/// One aggregate per session. ΔT is the whole session.
pub fn aggregate_daily(
    quotes: &[QuoteEvent],
    trades: &[TradeEvent],
    spec: &InstrumentSpec,
    cfg: &DailyConfig,
) -> Result<Vec<WindowAggregate>, MarketDataError> {
    let sub = secs_to_nanos(cfg.sub_interval_secs);
    if !(cfg.sub_interval_secs.is_finite() && sub > 0) {
        return Err(MarketDataError::Config(format!(
            "sub-interval must be positive, got {} s",
            cfg.sub_interval_secs
        )));
    }
    let windows = aggregate_windows(
        quotes,
        trades,
        spec,
        &AggregationConfig {
            window_secs: cfg.window_secs,
            sub_intervals: 1,
            depth_levels: cfg.depth_levels,
        },
    )?;

    let mut out = Vec::new();
    for day_windows in windows.chunk_by(|a, b| a.day() == b.day()) {
        let Some(mut agg) = merge_windows(day_windows) else {
            continue;
        };
        let day = agg.day();
        let (open, close) = spec.session_bounds(day);
        let dq = day_slice(
            quotes,
            day * NANOS_PER_DAY,
            (day + 1) * NANOS_PER_DAY,
            |q| q.ts,
        );
        let mut bounds: Vec<Nanos> = (0..)
            .map(|j| open + j * sub)
            .take_while(|&b| b < close)
            .collect();
        bounds.push(close);
        let mut samples = mids_at(dq, &bounds);
        if samples[0].is_none() {
            samples[0] = agg.open_price;
        }
        agg.price_std = if agg.avg_price > 0.0 {
            agg.avg_price * sum_sq_log_returns(&samples).sqrt()
        } else {
            0.0
        };
        agg.window_start = open;
        agg.window_end = close;
        out.push(agg);
    }
    Ok(out)
}

/// Prevailing mid sampled every `step_secs` from the open to the close of
/// each session (the last step truncated). Leading samples before the first
/// quote of the day are omitted.
pub fn sample_mid_prices(
    quotes: &[QuoteEvent],
    spec: &InstrumentSpec,
    step_secs: f64,
) -> Result<Vec<(i64, Vec<f64>)>, MarketDataError> {
    spec.validate()?;
    let step = secs_to_nanos(step_secs);
    if !(step_secs.is_finite() && step > 0) {
        return Err(MarketDataError::Config(format!(
            "sampling step must be positive, got {step_secs} s"
        )));
    }
    let mut out = Vec::new();
    for day in session_days(quotes, &[], spec) {
        let (open, close) = spec.session_bounds(day);
        let dq = day_slice(
            quotes,
            day * NANOS_PER_DAY,
            (day + 1) * NANOS_PER_DAY,
            |q| q.ts,
        );
        let mut bounds: Vec<Nanos> = (0..)
            .map(|j| open + j * step)
            .take_while(|&b| b < close)
            .collect();
        bounds.push(close);
        let mids: Vec<f64> = mids_at(dq, &bounds).into_iter().flatten().collect();
        out.push((day, mids));
    }
    Ok(out)
}

pub fn write_aggregates<W: Write>(
    writer: W,
    windows: &[WindowAggregate],
) -> Result<(), MarketDataError> {
    let mut w = csv::Writer::from_writer(writer);
    for agg in windows {
        w.serialize(agg)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
