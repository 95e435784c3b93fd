//! Virtual passive buy orders replayed against recorded quote/trade streams.
//!
//! One order at a time is placed at the prevailing best bid `B0`, behind the
//! displayed size. Over its horizon every seller-initiated trade adds its
//! size to the denominator, and to the numerator when it prints at or below
//! `B0`. The order is resolved when it fills, when the bid moves away
//! above `B0` (runaway), or when the horizon ends.

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::estimators::{t_volume, EstimatorConfig};
use crate::marketdata::{
    aggregate_windows, day_index, AggregationConfig, InstrumentSpec, Nanos, QuoteEvent, Side,
    TradeEvent, WindowAggregate, NANOS_PER_SEC,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum HorizonPolicy {
    /// Corrected `T_volume` of the window the order is placed in.
    TVolume,
    Fixed {
        seconds: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FillSimConfig {
    pub window_secs: f64,
    pub horizon: HorizonPolicy,
    /// Stop counting once the bid has moved above the order price.
    pub stop_on_runaway: bool,
}

impl Default for FillSimConfig {
    fn default() -> Self {
        Self {
            window_secs: 300.0,
            horizon: HorizonPolicy::TVolume,
            stop_on_runaway: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FillSimResult {
    /// Mean spread in ticks over the valid windows.
    pub spread_ticks: f64,
    pub measured_fraction: f64,
    pub n_orders: usize,
    pub fill_rate: f64,
}

/// Weight with which a trade counts as seller-initiated. Unsigned trades
/// are classified against the prevailing quote.
fn sell_weight(t: &TradeEvent, q: &QuoteEvent) -> f64 {
    match t.side {
        Side::Sell => 1.0,
        Side::Buy => 0.0,
        Side::Unknown => {
            if t.px <= q.bid_px {
                1.0
            } else if t.px >= q.ask_px {
                0.0
            } else {
                let mid = q.mid();
                if t.px < mid {
                    1.0
                } else if t.px > mid {
                    0.0
                } else {
                    0.5
                }
            }
        }
    }
}

struct Order {
    px: f64,
    ahead: f64,
    behind: f64,
}

impl Order {
    /// Aligns the tracked queue with a new displayed size at the order's
    /// level: shrinkage is a cancellation taken pro-rata ahead and behind,
    /// growth joins behind.
    fn reconcile(&mut self, displayed: f64) {
        let tracked = self.ahead + self.behind;
        if displayed < tracked {
            let keep = displayed / tracked;
            self.ahead *= keep;
            self.behind *= keep;
        } else {
            self.behind += displayed - tracked;
        }
    }
}

enum Outcome {
    Filled,
    Runaway,
    Expired,
}

struct OrderRun {
    outcome: Outcome,
    resolved_at: Nanos,
    at_or_below: f64,
    sold: f64,
}

fn price_eps(spec: &InstrumentSpec) -> f64 {
    spec.tick_size * 1e-6
}

fn run_order(
    quotes: &[QuoteEvent],
    trades: &[TradeEvent],
    mut qi: usize,
    start: Nanos,
    end: Nanos,
    spec: &InstrumentSpec,
    cfg: &FillSimConfig,
) -> OrderRun {
    let eps = price_eps(spec);
    let placed = &quotes[qi];
    let mut order = Order {
        px: placed.bid_px,
        ahead: placed.bid_sz,
        behind: 0.0,
    };
    let mut run = OrderRun {
        outcome: Outcome::Expired,
        resolved_at: end,
        at_or_below: 0.0,
        sold: 0.0,
    };
    let mut ti = trades.partition_point(|t| t.ts <= start);
    qi += 1;
    while qi < quotes.len() && quotes[qi].ts <= start {
        qi += 1;
    }
    let mut runaway = false;
    loop {
        let next_trade = trades.get(ti).filter(|t| t.ts <= end);
        let next_quote = quotes.get(qi).filter(|q| q.ts <= end);
        let take_trade = match (next_trade, next_quote) {
            (Some(t), Some(q)) => t.ts <= q.ts,
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => return run,
        };
        if take_trade {
            let t = &trades[ti];
            ti += 1;
            let w = sell_weight(t, &quotes[qi - 1]);
            if w == 0.0 {
                continue;
            }
            run.sold += w * t.sz;
            if t.px <= order.px + eps {
                run.at_or_below += w * t.sz;
                if runaway {
                    continue;
                }
                let through = t.px < order.px - eps;
                let depletion = w * t.sz;
                if through || depletion > order.ahead {
                    run.outcome = Outcome::Filled;
                    run.resolved_at = t.ts;
                    return run;
                }
                order.ahead -= depletion;
            }
        } else {
            let q = &quotes[qi];
            qi += 1;
            if runaway {
                continue;
            }
            if q.bid_px < order.px - eps {
                run.outcome = Outcome::Filled;
                run.resolved_at = q.ts;
                return run;
            }
            if q.bid_px > order.px + eps {
                run.outcome = Outcome::Runaway;
                run.resolved_at = q.ts;
                if cfg.stop_on_runaway {
                    return run;
                }
                runaway = true;
                continue;
            }
            order.reconcile(q.bid_sz);
        }
    }
}

fn window_containing(windows: &[WindowAggregate], t: Nanos) -> Option<&WindowAggregate> {
    let i = windows.partition_point(|w| w.window_end <= t);
    windows.get(i).filter(|w| w.window_start <= t)
}

/// Replays one order after another over the streams and aggregates the
/// share of sell volume that traded at or below each order's price.
pub fn simulate_passive_fills(
    quotes: &[QuoteEvent],
    trades: &[TradeEvent],
    spec: &InstrumentSpec,
    cfg: &FillSimConfig,
) -> Result<FillSimResult, SimError> {
    if quotes.is_empty() || trades.is_empty() {
        return Err(SimError::EmptyStreams);
    }
    let windows = aggregate_windows(
        quotes,
        trades,
        spec,
        &AggregationConfig::with_window(cfg.window_secs),
    )?;
    let est_cfg = EstimatorConfig::default();
    let window_ns = (cfg.window_secs * NANOS_PER_SEC as f64) as Nanos;

    let (mut num, mut den) = (0.0, 0.0);
    let (mut n_orders, mut n_filled) = (0usize, 0usize);
    let mut t = quotes[0].ts;
    let last_ts = quotes
        .last()
        .map(|q| q.ts)
        .max(trades.last().map(|t| t.ts))
        .unwrap_or(t);
    while t <= last_ts {
        let (_, close) = spec.session_bounds(day_index(t));
        let Some(window) = window_containing(&windows, t) else {
            // Outside any session: jump to the next window start.
            let i = windows.partition_point(|w| w.window_start <= t);
            match windows.get(i) {
                Some(w) => t = w.window_start,
                None => break,
            }
            continue;
        };
        let qi = quotes.partition_point(|q| q.ts <= t);
        let usable = qi > 0 && day_index(quotes[qi - 1].ts) == day_index(t);
        let horizon = match cfg.horizon {
            HorizonPolicy::TVolume => t_volume(window, spec, &est_cfg).ok(),
            HorizonPolicy::Fixed { seconds } => Some(seconds),
        };
        let (true, Some(horizon)) = (usable, horizon) else {
            t = window.window_end;
            continue;
        };
        let end = (t + (horizon * NANOS_PER_SEC as f64) as Nanos).min(close);
        let run = run_order(quotes, trades, qi - 1, t, end, spec, cfg);
        num += run.at_or_below;
        den += run.sold;
        n_orders += 1;
        if matches!(run.outcome, Outcome::Filled) {
            n_filled += 1;
        }
        t = run.resolved_at.max(t + 1) + window_ns;
    }

    if !(den > 0.0) {
        return Err(SimError::NoObservations);
    }
    let valid: Vec<&WindowAggregate> = windows.iter().filter(|w| w.valid).collect();
    let spread_ticks = if valid.is_empty() {
        0.0
    } else {
        valid.iter().map(|w| w.avg_spread).sum::<f64>() / valid.len() as f64 / spec.tick_size
    };
    Ok(FillSimResult {
        spread_ticks,
        measured_fraction: num / den,
        n_orders,
        fill_rate: n_filled as f64 / n_orders as f64,
    })
}
