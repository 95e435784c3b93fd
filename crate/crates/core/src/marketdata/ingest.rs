//! CSV ingestion and emission for the quotes/trades schemas.
//!
//! Quotes: `ts_ns,bid_px,bid_sz,ask_px,ask_sz[,bid2_px,bid2_sz,ask2_px,ask2_sz,...,ask5_sz]`.
//! Trades: `ts_ns,px,sz[,side]` with side one of `B`, `S`, `U`.
//! Columns are located by header name, so optional depth columns may appear
//! in any order.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::types::{
    BookLevel, InstrumentSpec, Nanos, QuoteEvent, Side, TradeEvent, MAX_DEPTH_LEVELS,
};
use super::MarketDataError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IngestOptions {
    /// Rows may run backwards in time by at most this much; they are
    /// re-sorted. Larger regressions are rejected.
    pub max_regression_ns: i64,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            max_regression_ns: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct QuoteIngest {
    pub events: Vec<QuoteEvent>,
    /// Locked or crossed rows (ask <= bid) that were excluded.
    pub dropped: usize,
}

pub fn load_instrument(path: impl AsRef<Path>) -> Result<InstrumentSpec, MarketDataError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| MarketDataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let spec: InstrumentSpec =
        serde_json::from_reader(file).map_err(|e| MarketDataError::Parse {
            origin: path.display().to_string(),
            line: e.line() as u64,
            message: e.to_string(),
        })?;
    spec.validate()?;
    Ok(spec)
}

pub fn ingest_quotes(
    path: impl AsRef<Path>,
    opts: &IngestOptions,
) -> Result<QuoteIngest, MarketDataError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| MarketDataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_quotes(file, &path.display().to_string(), opts)
}

pub fn ingest_trades(
    path: impl AsRef<Path>,
    opts: &IngestOptions,
) -> Result<Vec<TradeEvent>, MarketDataError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| MarketDataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_trades(file, &path.display().to_string(), opts)
}

struct RowCtx<'a> {
    origin: &'a str,
    line: u64,
}

impl RowCtx<'_> {
    fn err(&self, message: impl Into<String>) -> MarketDataError {
        MarketDataError::Parse {
            origin: self.origin.to_string(),
            line: self.line,
            message: message.into(),
        }
    }

    fn field<'r>(
        &self,
        rec: &'r csv::StringRecord,
        idx: usize,
        name: &str,
    ) -> Result<&'r str, MarketDataError> {
        rec.get(idx)
            .map(str::trim)
            .ok_or_else(|| self.err(format!("missing field {name}")))
    }

    fn ts(&self, rec: &csv::StringRecord, idx: usize) -> Result<Nanos, MarketDataError> {
        let raw = self.field(rec, idx, "ts_ns")?;
        raw.parse().map_err(|_| {
            self.err(format!(
                "ts_ns: cannot parse {raw:?} as integer nanoseconds"
            ))
        })
    }

    fn num(&self, rec: &csv::StringRecord, idx: usize, name: &str) -> Result<f64, MarketDataError> {
        let raw = self.field(rec, idx, name)?;
        let v: f64 = raw
            .parse()
            .map_err(|_| self.err(format!("{name}: cannot parse {raw:?} as a number")))?;
        if !v.is_finite() {
            return Err(self.err(format!("{name}: non-finite value {raw:?}")));
        }
        Ok(v)
    }

    fn opt_num(
        &self,
        rec: &csv::StringRecord,
        idx: Option<usize>,
        name: &str,
    ) -> Result<Option<f64>, MarketDataError> {
        match idx {
            Some(i) if rec.get(i).is_some_and(|s| !s.trim().is_empty()) => {
                self.num(rec, i, name).map(Some)
            }
            _ => Ok(None),
        }
    }
}

fn column(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h.trim() == name)
}

fn required(
    headers: &csv::StringRecord,
    name: &str,
    origin: &str,
) -> Result<usize, MarketDataError> {
    column(headers, name).ok_or_else(|| MarketDataError::Parse {
        origin: origin.to_string(),
        line: 1,
        message: format!("header is missing column {name:?}"),
    })
}

/// Tracks the running maximum timestamp and rejects regressions beyond the
/// tolerance.
struct OrderCheck {
    max_ts: Option<Nanos>,
    tolerance: i64,
    needs_sort: bool,
}

impl OrderCheck {
    fn new(tolerance: i64) -> Self {
        Self {
            max_ts: None,
            tolerance,
            needs_sort: false,
        }
    }

    fn observe(&mut self, ts: Nanos, ctx: &RowCtx<'_>) -> Result<(), MarketDataError> {
        if let Some(max) = self.max_ts {
            if ts < max {
                let behind = max - ts;
                if behind > self.tolerance {
                    return Err(MarketDataError::Ordering {
                        origin: ctx.origin.to_string(),
                        line: ctx.line,
                        ts,
                        behind_ns: behind,
                        tolerance_ns: self.tolerance,
                    });
                }
                self.needs_sort = true;
                return Ok(());
            }
        }
        self.max_ts = Some(ts);
        Ok(())
    }
}

pub fn read_quotes<R: Read>(
    reader: R,
    origin: &str,
    opts: &IngestOptions,
) -> Result<QuoteIngest, MarketDataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| MarketDataError::Parse {
            origin: origin.to_string(),
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    if headers.is_empty() {
        return Ok(QuoteIngest::default());
    }

    let c_ts = required(&headers, "ts_ns", origin)?;
    let c_bpx = required(&headers, "bid_px", origin)?;
    let c_bsz = required(&headers, "bid_sz", origin)?;
    let c_apx = required(&headers, "ask_px", origin)?;
    let c_asz = required(&headers, "ask_sz", origin)?;
    let depth_cols: Vec<[Option<usize>; 4]> = (2..=MAX_DEPTH_LEVELS)
        .map(|k| {
            [
                column(&headers, &format!("bid{k}_px")),
                column(&headers, &format!("bid{k}_sz")),
                column(&headers, &format!("ask{k}_px")),
                column(&headers, &format!("ask{k}_sz")),
            ]
        })
        .collect();

    let mut out = QuoteIngest::default();
    let mut order = OrderCheck::new(opts.max_regression_ns);
    let mut rec = csv::StringRecord::new();
    loop {
        let more = rdr
            .read_record(&mut rec)
            .map_err(|e| MarketDataError::Parse {
                origin: origin.to_string(),
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })?;
        if !more {
            break;
        }
        let ctx = RowCtx {
            origin,
            line: rec.position().map_or(0, |p| p.line()),
        };
        let ts = ctx.ts(&rec, c_ts)?;
        let bid_px = ctx.num(&rec, c_bpx, "bid_px")?;
        let bid_sz = ctx.num(&rec, c_bsz, "bid_sz")?;
        let ask_px = ctx.num(&rec, c_apx, "ask_px")?;
        let ask_sz = ctx.num(&rec, c_asz, "ask_sz")?;
        if bid_sz < 0.0 || ask_sz < 0.0 {
            return Err(ctx.err("negative top-of-book size"));
        }
        if bid_px <= 0.0 || ask_px <= 0.0 {
            return Err(ctx.err("non-positive quote price"));
        }
        order.observe(ts, &ctx)?;

        let mut quote = QuoteEvent::top(ts, bid_px, bid_sz, ask_px, ask_sz);
        let (mut bid_open, mut ask_open) = (true, true);
        for (i, cols) in depth_cols.iter().enumerate() {
            let k = i + 2;
            let bpx = ctx.opt_num(&rec, cols[0], &format!("bid{k}_px"))?;
            let bsz = ctx.opt_num(&rec, cols[1], &format!("bid{k}_sz"))?;
            let apx = ctx.opt_num(&rec, cols[2], &format!("ask{k}_px"))?;
            let asz = ctx.opt_num(&rec, cols[3], &format!("ask{k}_sz"))?;
            match (bpx, bsz) {
                (Some(px), Some(sz)) if bid_open => {
                    if sz < 0.0 {
                        return Err(ctx.err(format!("negative size at bid level {k}")));
                    }
                    quote.bid_depth.push(BookLevel { px, sz });
                }
                _ => bid_open = false,
            }
            match (apx, asz) {
                (Some(px), Some(sz)) if ask_open => {
                    if sz < 0.0 {
                        return Err(ctx.err(format!("negative size at ask level {k}")));
                    }
                    quote.ask_depth.push(BookLevel { px, sz });
                }
                _ => ask_open = false,
            }
        }

        if quote.spread() <= 0.0 {
            out.dropped += 1;
            continue;
        }
        out.events.push(quote);
    }
    if order.needs_sort {
        out.events.sort_by_key(|q| q.ts);
    }
    Ok(out)
}

pub fn read_trades<R: Read>(
    reader: R,
    origin: &str,
    opts: &IngestOptions,
) -> Result<Vec<TradeEvent>, MarketDataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| MarketDataError::Parse {
            origin: origin.to_string(),
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    if headers.is_empty() {
        return Ok(Vec::new());
    }
    let c_ts = required(&headers, "ts_ns", origin)?;
    let c_px = required(&headers, "px", origin)?;
    let c_sz = required(&headers, "sz", origin)?;
    let c_side = column(&headers, "side");

    let mut trades = Vec::new();
    let mut order = OrderCheck::new(opts.max_regression_ns);
    let mut rec = csv::StringRecord::new();
    loop {
        let more = rdr
            .read_record(&mut rec)
            .map_err(|e| MarketDataError::Parse {
                origin: origin.to_string(),
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })?;
        if !more {
            break;
        }
        let ctx = RowCtx {
            origin,
            line: rec.position().map_or(0, |p| p.line()),
        };
        let ts = ctx.ts(&rec, c_ts)?;
        let px = ctx.num(&rec, c_px, "px")?;
        let sz = ctx.num(&rec, c_sz, "sz")?;
        if px <= 0.0 {
            return Err(ctx.err(format!("px must be positive, got {px}")));
        }
        if sz <= 0.0 {
            return Err(ctx.err(format!("sz must be positive, got {sz}")));
        }
        let side = match c_side.and_then(|i| rec.get(i)).map(str::trim) {
            None | Some("") | Some("U") => Side::Unknown,
            Some("B") => Side::Buy,
            Some("S") => Side::Sell,
            Some(other) => return Err(ctx.err(format!("side must be B, S or U, got {other:?}"))),
        };
        order.observe(ts, &ctx)?;
        trades.push(TradeEvent { ts, px, sz, side });
    }
    if order.needs_sort {
        trades.sort_by_key(|t| t.ts);
    }
    Ok(trades)
}

fn fmt_px(px: f64, decimals: u32) -> String {
    format!("{:.*}", decimals as usize, px)
}

pub fn write_quotes<W: Write>(
    writer: W,
    quotes: &[QuoteEvent],
    price_decimals: u32,
) -> Result<(), MarketDataError> {
    let levels = quotes
        .iter()
        .map(|q| q.bid_depth.len().max(q.ask_depth.len()))
        .max()
        .unwrap_or(0)
        .min(MAX_DEPTH_LEVELS - 1);
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = ["ts_ns", "bid_px", "bid_sz", "ask_px", "ask_sz"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for k in 2..2 + levels {
        header.extend([
            format!("bid{k}_px"),
            format!("bid{k}_sz"),
            format!("ask{k}_px"),
            format!("ask{k}_sz"),
        ]);
    }
    w.write_record(&header)?;
    let mut row: Vec<String> = Vec::with_capacity(header.len());
    for q in quotes {
        row.clear();
        row.push(q.ts.to_string());
        row.push(fmt_px(q.bid_px, price_decimals));
        row.push(q.bid_sz.to_string());
        row.push(fmt_px(q.ask_px, price_decimals));
        row.push(q.ask_sz.to_string());
        for lvl in 0..levels {
            for side in [&q.bid_depth, &q.ask_depth] {
                match side.get(lvl) {
                    Some(l) => {
                        row.push(fmt_px(l.px, price_decimals));
                        row.push(l.sz.to_string());
                    }
                    None => {
                        row.push(String::new());
                        row.push(String::new());
                    }
                }
            }
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_trades<W: Write>(
    writer: W,
    trades: &[TradeEvent],
    price_decimals: u32,
) -> Result<(), MarketDataError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["ts_ns", "px", "sz", "side"])?;
    for t in trades {
        w.write_record([
            t.ts.to_string(),
            fmt_px(t.px, price_decimals),
            t.sz.to_string(),
            t.side.code().to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quotes(text: &str) -> Result<QuoteIngest, MarketDataError> {
        read_quotes(text.as_bytes(), "quotes.csv", &IngestOptions::default())
    }

    #[test]
    fn well_formed_three_rows() {
        let q = quotes(
            "ts_ns,bid_px,bid_sz,ask_px,ask_sz\n\
             1000,99.99,100,100.01,200\n\
             2000,99.99,150,100.01,200\n\
             3000,100.00,100,100.02,50\n",
        )
        .unwrap();
        assert_eq!(q.events.len(), 3);
        assert_eq!(q.dropped, 0);
        assert_eq!(q.events[2].bid_px, 100.0);
        assert_eq!(q.events[1].bid_sz, 150.0);
    }

    #[test]
    fn crossed_row_is_dropped_and_counted() {
        let q = quotes(
            "ts_ns,bid_px,bid_sz,ask_px,ask_sz\n\
             1000,99.99,100,100.01,200\n\
             2000,100.02,100,100.01,200\n\
             3000,100.00,100,100.00,200\n",
        )
        .unwrap();
        assert_eq!(q.events.len(), 1);
        assert_eq!(q.dropped, 2);
    }

    #[test]
    fn empty_file_is_empty_sequence() {
        let q = quotes("").unwrap();
        assert!(q.events.is_empty());
        assert_eq!(q.dropped, 0);
        let q = quotes("ts_ns,bid_px,bid_sz,ask_px,ask_sz\n").unwrap();
        assert!(q.events.is_empty());
        let t = read_trades("".as_bytes(), "t", &IngestOptions::default()).unwrap();
        assert!(t.is_empty());
    }

    #[test]
    fn malformed_row_reports_line_number() {
        let err = quotes(
            "ts_ns,bid_px,bid_sz,ask_px,ask_sz\n\
             1000,99.99,100,100.01,200\n\
             2000,abc,100,100.01,200\n",
        )
        .unwrap_err();
        match err {
            MarketDataError::Parse { line, message, .. } => {
                assert_eq!(line, 3);
                assert!(message.contains("bid_px"), "{message}");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn missing_column_is_header_error() {
        let err = quotes("ts_ns,bid_px,ask_px\n1,2,3\n").unwrap_err();
        assert!(matches!(err, MarketDataError::Parse { line: 1, .. }));
    }

    #[test]
    fn small_regressions_are_resorted_large_ones_fail() {
        let q = quotes(
            "ts_ns,bid_px,bid_sz,ask_px,ask_sz\n\
             1000000,99.99,100,100.01,200\n\
             500000,99.98,100,100.00,200\n\
             2000000,99.99,100,100.01,200\n",
        )
        .unwrap();
        let ts: Vec<_> = q.events.iter().map(|e| e.ts).collect();
        assert_eq!(ts, vec![500_000, 1_000_000, 2_000_000]);

        let err = quotes(
            "ts_ns,bid_px,bid_sz,ask_px,ask_sz\n\
             5000000000,99.99,100,100.01,200\n\
             1000000000,99.99,100,100.01,200\n",
        )
        .unwrap_err();
        assert!(matches!(err, MarketDataError::Ordering { line: 3, .. }));
    }

    #[test]
    fn depth_columns_in_any_order() {
        let q = quotes(
            "ts_ns,bid_px,bid_sz,ask_px,ask_sz,ask2_sz,ask2_px,bid2_px,bid2_sz,bid3_px,bid3_sz\n\
             1,10.0,5,10.1,6,7,10.2,9.9,8,9.8,9\n",
        )
        .unwrap();
        let e = &q.events[0];
        assert_eq!(e.bid_depth.len(), 2);
        assert_eq!(e.ask_depth, vec![BookLevel { px: 10.2, sz: 7.0 }]);
    }

    #[test]
    fn trades_parse_sides_and_validate() {
        let t = read_trades(
            "ts_ns,px,sz,side\n1,10.0,300,B\n2,10.1,700,S\n3,10.0,5,\n4,10.0,5,U\n".as_bytes(),
            "t",
            &IngestOptions::default(),
        )
        .unwrap();
        let sides: Vec<_> = t.iter().map(|t| t.side).collect();
        assert_eq!(
            sides,
            vec![Side::Buy, Side::Sell, Side::Unknown, Side::Unknown]
        );
        let err = read_trades(
            "ts_ns,px,sz\n1,10.0,0\n".as_bytes(),
            "t",
            &IngestOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, MarketDataError::Parse { line: 2, .. }));
        let err = read_trades(
            "ts_ns,px,sz,side\n1,10.0,1,X\n".as_bytes(),
            "t",
            &IngestOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, MarketDataError::Parse { .. }));
    }

    #[test]
    fn writers_emit_readable_schema() {
        let mut q = QuoteEvent::top(10, 99.99, 100.0, 100.01, 250.0);
        q.bid_depth.push(BookLevel {
            px: 99.98,
            sz: 300.0,
        });
        let qs = vec![q, QuoteEvent::top(20, 100.0, 1.0, 100.02, 2.0)];
        let mut buf = Vec::new();
        write_quotes(&mut buf, &qs, 2).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(
            text.starts_with("ts_ns,bid_px,bid_sz,ask_px,ask_sz,bid2_px,bid2_sz,ask2_px,ask2_sz\n")
        );
        assert!(text.contains("10,99.99,100,100.01,250,99.98,300,,\n"));
        let back = read_quotes(buf.as_slice(), "mem", &IngestOptions::default()).unwrap();
        assert_eq!(back.events, qs);

        let ts = vec![TradeEvent {
            ts: 5,
            px: 100.0,
            sz: 30.0,
            side: Side::Sell,
        }];
        let mut buf = Vec::new();
        write_trades(&mut buf, &ts, 2).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "ts_ns,px,sz,side\n5,100.00,30,S\n"
        );
    }
}
