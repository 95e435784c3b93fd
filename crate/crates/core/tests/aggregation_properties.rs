use instvol::marketdata::{
    aggregate_windows, write_aggregates, AggregationConfig, InstrumentSpec, QuoteEvent, Side,
    TradeEvent, NANOS_PER_DAY, NANOS_PER_SEC,
};
use proptest::prelude::*;

const DAY: i64 = 17_500;

fn spec() -> InstrumentSpec {
    InstrumentSpec {
        symbol: "A".into(),
        tick_size: 0.01,
        session_open: "09:00".parse().unwrap(),
        session_close: "10:00".parse().unwrap(),
        price_decimals: 2,
    }
}

fn open() -> i64 {
    DAY * NANOS_PER_DAY + 9 * 3600 * NANOS_PER_SEC
}

prop_compose! {
    /// Quote states at sorted offsets (in ms) inside the session.
    fn quote_stream()(
        states in prop::collection::vec((0i64..3_600_000, 1u32..5, 1.0f64..500.0, 1.0f64..500.0, 9_000i64..11_000), 1..40),
    ) -> Vec<QuoteEvent> {
        let mut states = states;
        states.sort_by_key(|s| s.0);
        states
            .into_iter()
            .map(|(ms, ticks, b, a, bid)| {
                let bid = bid as f64 / 100.0;
                QuoteEvent::top(open() + ms * 1_000_000, bid, b.round(), bid + ticks as f64 / 100.0, a.round())
            })
            .collect()
    }
}

prop_compose! {
    fn trade_stream()(raw in prop::collection::vec((-600_000i64..4_200_000, 1u32..1000), 0..60)) -> Vec<TradeEvent> {
        let mut raw = raw;
        raw.sort_by_key(|t| t.0);
        raw.into_iter()
            .map(|(ms, sz)| TradeEvent { ts: open() + ms * 1_000_000, px: 100.0, sz: sz as f64, side: Side::Unknown })
            .collect()
    }
}

proptest! {
    #[test]
    fn splitting_a_quote_interval_changes_nothing(quotes in quote_stream(), at in 0usize..40, frac in 0.01f64..0.99) {
        let cfg = AggregationConfig::with_window(600.0);
        let base = aggregate_windows(&quotes, &[], &spec(), &cfg).unwrap();
        let i = at % quotes.len();
        let end = quotes.get(i + 1).map_or(open() + 3600 * NANOS_PER_SEC, |q| q.ts);
        let split_ts = quotes[i].ts + ((end - quotes[i].ts) as f64 * frac) as i64;
        prop_assume!(split_ts > quotes[i].ts && split_ts < end);
        let mut split = quotes.clone();
        split.insert(i + 1, QuoteEvent { ts: split_ts, ..quotes[i].clone() });
        let after = aggregate_windows(&split, &[], &spec(), &cfg).unwrap();
        for (a, b) in base.iter().zip(&after) {
            let close = |x: f64, y: f64| (x - y).abs() <= 1e-9 * x.abs().max(1.0);
            prop_assert!(close(a.avg_spread, b.avg_spread));
            prop_assert!(close(a.avg_bid_vol, b.avg_bid_vol));
            prop_assert!(close(a.avg_ask_vol, b.avg_ask_vol));
            prop_assert!(close(a.avg_price, b.avg_price));
        }
    }

    #[test]
    fn traded_volume_is_conserved(quotes in quote_stream(), trades in trade_stream()) {
        let windows = aggregate_windows(&quotes, &trades, &spec(), &AggregationConfig::with_window(420.0)).unwrap();
        let (o, c) = spec().session_bounds(DAY);
        let in_session: f64 = trades.iter().filter(|t| t.ts >= o && t.ts < c).map(|t| t.sz).sum();
        let aggregated: f64 = windows.iter().map(|w| w.traded_volume).sum();
        prop_assert!((in_session - aggregated).abs() < 1e-9);
        prop_assert!(windows.iter().all(|w| w.avg_spread >= 0.0 && w.traded_volume >= 0.0 && w.price_std >= 0.0));
        prop_assert!(windows.iter().all(|w| !w.valid || (w.n_trades > 0 && w.n_quotes > 0 && w.avg_spread > 0.0)));
    }

    #[test]
    fn aggregation_output_is_deterministic(quotes in quote_stream(), trades in trade_stream()) {
        let cfg = AggregationConfig::with_window(300.0);
        let render = || {
            let w = aggregate_windows(&quotes, &trades, &spec(), &cfg).unwrap();
            let mut buf = Vec::new();
            write_aggregates(&mut buf, &w).unwrap();
            buf
        };
        prop_assert_eq!(render(), render());
    }
}
