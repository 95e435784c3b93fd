use std::collections::BTreeMap;
use std::path::PathBuf;

use instvol::baselines::{
    close_to_close_returns, daily_closes, mse_compare, realized_volatility,
    rolling_garch_forecasts, xi_grid, RealizedPeriod, ReturnSeries, XiCell, MIN_OBSERVATIONS,
};
use instvol::estimators::instantaneous_volatility;
use instvol::marketdata::{
    aggregate_daily, aggregate_windows, sample_mid_prices, AggregationConfig, DailyConfig,
};
use instvol::{EstimatorConfig, WindowAggregate};
use serde::{Deserialize, Serialize};

use crate::config::{date_of_day, day_of_date, load, HasInputs, Inputs, Loaded};
use crate::error::{CliError, Result};
use crate::output::Staging;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HistogramConfig {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

impl Default for HistogramConfig {
    fn default() -> Self {
        Self {
            lo: -5.0,
            hi: 5.0,
            bins: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForecastConfig {
    pub input: Inputs,
    pub estimator: EstimatorConfig,
    /// Daily roll-up feeding the same-day σ_I.
    pub daily: DailyConfig,
    /// Mid sampling step of the realized volatility, in seconds.
    pub realized_step_secs: f64,
    /// Returns required before the first GARCH forecast.
    pub garch_min_obs: usize,
    /// Days (`YYYY-MM-DD`) left out of the MSE.
    pub exclusions: Vec<String>,
    pub xi_histogram: HistogramConfig,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        Self {
            input: Inputs::default(),
            estimator: EstimatorConfig::default(),
            daily: DailyConfig::default(),
            realized_step_secs: 300.0,
            garch_min_obs: MIN_OBSERVATIONS,
            exclusions: Vec::new(),
            xi_histogram: HistogramConfig::default(),
        }
    }
}

impl HasInputs for ForecastConfig {
    fn inputs_mut(&mut self) -> &mut Inputs {
        &mut self.input
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DayRow {
    pub symbol: String,
    pub date: String,
    pub sigma_realized: f64,
    pub sigma_inst: Option<f64>,
    pub sigma_garch: Option<f64>,
    pub excluded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub symbol: String,
    /// Days with all three volatilities, after exclusions.
    pub n_days: usize,
    pub mse_inst: f64,
    pub mse_garch: f64,
    pub sigma_xi_5_5: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct GridRow {
    symbol: String,
    history_min: u32,
    forecast_min: u32,
    sigma_xi: f64,
    n_obs: usize,
    n_skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct HistogramRow {
    symbol: String,
    history_min: u32,
    forecast_min: u32,
    bin_lo: f64,
    bin_hi: f64,
    count: usize,
}

/// Per-day realized, same-day instantaneous and one-day-ahead GARCH
/// volatilities, all in log-return units over one session.
pub fn day_rows(l: &Loaded, cfg: &ForecastConfig, excluded: &[i64]) -> Result<Vec<DayRow>> {
    let mids = sample_mid_prices(&l.quotes, &l.spec, cfg.realized_step_secs)?;
    let series = ReturnSeries::from_day_prices(cfg.realized_step_secs, &mids);
    let realized = realized_volatility(&series, RealizedPeriod::Day);

    let inst: BTreeMap<i64, f64> = aggregate_daily(&l.quotes, &l.trades, &l.spec, &cfg.daily)?
        .iter()
        .filter_map(|d| {
            instantaneous_volatility(d, &l.spec, &cfg.estimator)
                .ok()
                .map(|s| (d.day(), s))
        })
        .collect();

    let returns = close_to_close_returns(&daily_closes(&l.trades, &l.spec));
    let r: Vec<f64> = returns.iter().map(|x| x.1).collect();
    let forecasts = rolling_garch_forecasts(&r, cfg.garch_min_obs)?;
    let garch: BTreeMap<i64, f64> = returns
        .iter()
        .zip(&forecasts)
        .filter_map(|((day, _), h)| h.map(|h| (*day, h.sqrt())))
        .collect();

    Ok(series
        .days
        .iter()
        .zip(realized)
        .map(|(day, sigma_realized)| DayRow {
            symbol: l.spec.symbol.clone(),
            date: date_of_day(*day),
            sigma_realized,
            sigma_inst: inst.get(day).copied(),
            sigma_garch: garch.get(day).copied(),
            excluded: excluded.contains(day),
        })
        .collect())
}

pub fn summarize(symbol: &str, rows: &[DayRow], xi: &[XiCell]) -> Result<Summary> {
    let mut realized = Vec::new();
    let mut inst = Vec::new();
    let mut garch = Vec::new();
    let mut skip = Vec::new();
    for r in rows {
        if let (Some(i), Some(g)) = (r.sigma_inst, r.sigma_garch) {
            if r.excluded {
                skip.push(realized.len());
            }
            realized.push(r.sigma_realized);
            inst.push(i);
            garch.push(g);
        }
    }
    Ok(Summary {
        symbol: symbol.to_string(),
        n_days: realized.len() - skip.len(),
        mse_inst: mse_compare(&realized, &inst, &skip)?,
        mse_garch: mse_compare(&realized, &garch, &skip)?,
        sigma_xi_5_5: xi
            .iter()
            .find(|c| c.history_min == 5 && c.forecast_min == 5)
            .map(|c| c.sigma_xi),
    })
}

fn histogram(values: &[f64], h: &HistogramConfig) -> Result<Vec<(f64, f64, usize)>> {
    if h.bins == 0 || !(h.hi > h.lo) {
        return Err(CliError::Invalid(format!(
            "histogram needs bins > 0 and hi > lo, got {} bins on [{}, {}]",
            h.bins, h.lo, h.hi
        )));
    }
    let width = (h.hi - h.lo) / h.bins as f64;
    let mut counts = vec![0usize; h.bins];
    for v in values {
        let k = ((v - h.lo) / width).floor().clamp(0.0, (h.bins - 1) as f64) as usize;
        counts[k] += 1;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(k, c)| (h.lo + k as f64 * width, h.lo + (k + 1) as f64 * width, c))
        .collect())
}

fn minute_days(l: &Loaded, cfg: &ForecastConfig) -> Result<Vec<Vec<WindowAggregate>>> {
    let windows = aggregate_windows(
        &l.quotes,
        &l.trades,
        &l.spec,
        &AggregationConfig {
            window_secs: 60.0,
            depth_levels: cfg.daily.depth_levels,
            ..AggregationConfig::default()
        },
    )?;
    Ok(windows
        .chunk_by(|a, b| a.day() == b.day())
        .map(<[WindowAggregate]>::to_vec)
        .collect())
}

pub fn run(
    mut cfg: ForecastConfig,
    data: &[PathBuf],
    window: Option<f64>,
    stage: &mut Staging,
) -> Result<()> {
    if let Some(w) = window {
        cfg.daily.window_secs = w;
    }
    let excluded = cfg
        .exclusions
        .iter()
        .map(|d| day_of_date(d))
        .collect::<Result<Vec<_>>>()?;
    histogram(&[], &cfg.xi_histogram)?;
    let inputs = cfg.input.resolve(data)?;
    let opts = cfg.input.ingest_options();
    let mut all_days = Vec::new();
    let mut summaries = Vec::new();
    let mut grid = Vec::new();
    let mut hist = Vec::new();
    for input in &inputs {
        let l = load(input, &opts)?;
        let symbol = l.spec.symbol.clone();
        let wrap = |e: CliError| e.for_instrument(&symbol);
        let rows = day_rows(&l, &cfg, &excluded).map_err(wrap)?;
        let cells = xi_grid(
            &minute_days(&l, &cfg).map_err(wrap)?,
            &l.spec,
            &cfg.estimator,
        );
        let s = summarize(&symbol, &rows, &cells).map_err(wrap)?;
        log::info!(
            "{symbol}: MSE σ_I {:.3e}, MSE GARCH {:.3e} over {} days",
            s.mse_inst,
            s.mse_garch,
            s.n_days
        );
        for c in &cells {
            grid.push(GridRow {
                symbol: symbol.clone(),
                history_min: c.history_min,
                forecast_min: c.forecast_min,
                sigma_xi: c.sigma_xi,
                n_obs: c.n_obs,
                n_skipped: c.n_skipped,
            });
            for (bin_lo, bin_hi, count) in histogram(&c.xi, &cfg.xi_histogram)? {
                hist.push(HistogramRow {
                    symbol: symbol.clone(),
                    history_min: c.history_min,
                    forecast_min: c.forecast_min,
                    bin_lo,
                    bin_hi,
                    count,
                });
            }
        }
        all_days.extend(rows);
        summaries.push(s);
    }
    stage.write_table("forecast_days", &all_days)?;
    stage.write_table("forecast_summary", &summaries)?;
    stage.write_table("xi_grid", &grid)?;
    stage.write_table("xi_histogram", &hist)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(r: f64, i: Option<f64>, g: Option<f64>, excluded: bool) -> DayRow {
        DayRow {
            symbol: "X".into(),
            date: String::new(),
            sigma_realized: r,
            sigma_inst: i,
            sigma_garch: g,
            excluded,
        }
    }

    #[test]
    fn identical_series_have_zero_error() {
        let rows = vec![
            row(0.01, Some(0.01), Some(0.01), false),
            row(0.02, Some(0.02), Some(0.02), false),
        ];
        let s = summarize("X", &rows, &[]).unwrap();
        assert_eq!((s.mse_inst, s.mse_garch, s.n_days), (0.0, 0.0, 2));
        assert_eq!(s.sigma_xi_5_5, None);
    }

    #[test]
    fn excluded_and_incomplete_days_are_left_out() {
        let rows = vec![
            row(0.01, Some(0.02), Some(0.01), false),
            row(0.01, Some(0.5), Some(0.01), true),
            row(0.01, None, Some(0.9), false),
        ];
        let s = summarize("X", &rows, &[]).unwrap();
        assert_eq!(s.n_days, 1);
        assert!((s.mse_inst - 1e-4).abs() < 1e-18);
        assert_eq!(s.mse_garch, 0.0);
    }

    #[test]
    fn histogram_clamps_tails() {
        let h = HistogramConfig {
            lo: -1.0,
            hi: 1.0,
            bins: 2,
        };
        let bins = histogram(&[-3.0, -0.5, 0.0, 0.5, 9.0], &h).unwrap();
        assert_eq!(bins, vec![(-1.0, 0.0, 2), (0.0, 1.0, 3)]);
        assert!(histogram(&[], &HistogramConfig { bins: 0, ..h }).is_err());
    }
}
