//! Intraday log-return series and realized volatility.

use serde::{Deserialize, Serialize};

use crate::marketdata::{day_index, InstrumentSpec, TradeEvent};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnSeries {
    /// Sampling interval in seconds.
    pub interval: f64,
    pub returns: Vec<f64>,
    /// Index into `returns` at which each day starts. Consecutive days are
    /// never joined by a return.
    pub day_boundaries: Vec<usize>,
    pub days: Vec<i64>,
}

impl ReturnSeries {
    /// Log returns of consecutive prices within each day.
    pub fn from_day_prices(interval: f64, prices: &[(i64, Vec<f64>)]) -> Self {
        let mut returns = Vec::new();
        let mut day_boundaries = Vec::with_capacity(prices.len());
        let mut days = Vec::with_capacity(prices.len());
        for (day, px) in prices {
            day_boundaries.push(returns.len());
            days.push(*day);
            returns.extend(px.windows(2).map(|w| (w[1] / w[0]).ln()));
        }
        Self {
            interval,
            returns,
            day_boundaries,
            days,
        }
    }

    pub fn day_returns(&self, i: usize) -> &[f64] {
        let start = self.day_boundaries[i];
        let end = self
            .day_boundaries
            .get(i + 1)
            .copied()
            .unwrap_or(self.returns.len());
        &self.returns[start..end]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RealizedPeriod {
    Day,
    /// Blocks of this many consecutive returns within a day; the last block
    /// of a day may be shorter.
    Returns(usize),
}

/// `sqrt(Σ r²)` per period.
pub fn realized_volatility(series: &ReturnSeries, per: RealizedPeriod) -> Vec<f64> {
    let rv = |r: &[f64]| r.iter().map(|x| x * x).sum::<f64>().sqrt();
    (0..series.day_boundaries.len())
        .flat_map(|i| {
            let day = series.day_returns(i);
            match per {
                RealizedPeriod::Day => vec![rv(day)],
                RealizedPeriod::Returns(k) => day.chunks(k.max(1)).map(rv).collect(),
            }
        })
        .collect()
}

/// Last in-session trade price of each day.
pub fn daily_closes(trades: &[TradeEvent], spec: &InstrumentSpec) -> Vec<(i64, f64)> {
    let mut out: Vec<(i64, f64)> = Vec::new();
    for t in trades {
        let day = day_index(t.ts);
        let (open, close) = spec.session_bounds(day);
        if t.ts < open || t.ts >= close {
            continue;
        }
        match out.last_mut() {
            Some(last) if last.0 == day => last.1 = t.px,
            _ => out.push((day, t.px)),
        }
    }
    out
}

/// Close-to-close log returns; entry `i` belongs to the day of close `i + 1`.
pub fn close_to_close_returns(closes: &[(i64, f64)]) -> Vec<(i64, f64)> {
    closes
        .windows(2)
        .map(|w| (w[1].0, (w[1].1 / w[0].1).ln()))
        .collect()
}
