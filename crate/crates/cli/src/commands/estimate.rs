use std::path::PathBuf;

use instvol::estimators::{annualize, AnnualizationConfig};
use instvol::marketdata::{aggregate_daily, aggregate_windows, AggregationConfig, DailyConfig};
use instvol::{EstimateSet, EstimatorConfig, InstrumentSpec, WindowAggregate};
use serde::{Deserialize, Serialize};

use crate::config::{date_of_day, load, HasInputs, Inputs};
use crate::error::{CliError, Result};
use crate::output::Staging;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateConfig {
    pub input: Inputs,
    pub aggregation: AggregationConfig,
    pub daily: DailyConfig,
    pub estimator: EstimatorConfig,
    /// Trading sessions per year for annualised σ_I; defaults to 252.
    pub sessions_per_year: Option<f64>,
}

impl HasInputs for EstimateConfig {
    fn inputs_mut(&mut self) -> &mut Inputs {
        &mut self.input
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateRow {
    pub symbol: String,
    pub date: String,
    pub window_start: i64,
    pub window_end: i64,
    pub valid: bool,
    pub n_trades: usize,
    pub traded_volume: f64,
    pub t_price: Option<f64>,
    pub t_volume: Option<f64>,
    pub spread_ticks: Option<f64>,
    pub correction: Option<f64>,
    pub gamma: Option<f64>,
    pub sigma_inst: Option<f64>,
    pub sigma_inst_annualized: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateSummary {
    pub symbol: String,
    pub n_windows: usize,
    pub n_valid: usize,
    pub mean_gamma_windows: Option<f64>,
    pub n_days: usize,
    pub mean_gamma_daily: Option<f64>,
}

pub fn estimate_rows(
    windows: &[WindowAggregate],
    spec: &InstrumentSpec,
    cfg: &EstimatorConfig,
    calendar: &AnnualizationConfig,
) -> Vec<EstimateRow> {
    windows
        .iter()
        .map(|w| {
            let e = EstimateSet::from_aggregate(w, spec, cfg);
            EstimateRow {
                symbol: spec.symbol.clone(),
                date: date_of_day(w.day()),
                window_start: w.window_start,
                window_end: w.window_end,
                valid: w.valid,
                n_trades: w.n_trades,
                traded_volume: w.traded_volume,
                t_price: e.t_price,
                t_volume: e.t_volume,
                spread_ticks: e.spread_ticks,
                correction: e.correction,
                gamma: e.gamma,
                sigma_inst_annualized: e
                    .sigma_inst
                    .and_then(|s| annualize(s, w.duration_secs(), calendar).ok()),
                sigma_inst: e.sigma_inst,
            }
        })
        .collect()
}

fn mean_gamma(rows: &[EstimateRow]) -> Option<f64> {
    let g: Vec<f64> = rows.iter().filter_map(|r| r.gamma).collect();
    (!g.is_empty()).then(|| g.iter().sum::<f64>() / g.len() as f64)
}

pub fn run(
    mut cfg: EstimateConfig,
    data: &[PathBuf],
    window: Option<f64>,
    stage: &mut Staging,
) -> Result<()> {
    if let Some(w) = window {
        cfg.aggregation.window_secs = w;
        cfg.daily.window_secs = w;
    }
    let inputs = cfg.input.resolve(data)?;
    let opts = cfg.input.ingest_options();
    let mut rows = Vec::new();
    let mut daily_rows = Vec::new();
    let mut summary = Vec::new();
    for input in &inputs {
        let l = load(input, &opts)?;
        let symbol = l.spec.symbol.clone();
        let wrap = |e: CliError| e.for_instrument(&symbol);
        let mut calendar = AnnualizationConfig::for_instrument(&l.spec);
        if let Some(n) = cfg.sessions_per_year {
            calendar.sessions_per_year = n;
        }
        let windows = aggregate_windows(&l.quotes, &l.trades, &l.spec, &cfg.aggregation)
            .map_err(|e| wrap(e.into()))?;
        let daily = aggregate_daily(&l.quotes, &l.trades, &l.spec, &cfg.daily)
            .map_err(|e| wrap(e.into()))?;
        let w_rows = estimate_rows(&windows, &l.spec, &cfg.estimator, &calendar);
        let d_rows = estimate_rows(&daily, &l.spec, &cfg.estimator, &calendar);
        let s = EstimateSummary {
            symbol: symbol.clone(),
            n_windows: w_rows.len(),
            n_valid: w_rows.iter().filter(|r| r.valid).count(),
            mean_gamma_windows: mean_gamma(&w_rows),
            n_days: d_rows.len(),
            mean_gamma_daily: mean_gamma(&d_rows),
        };
        log::info!(
            "{symbol}: {} windows, daily mean γ {:?}",
            s.n_windows,
            s.mean_gamma_daily
        );
        rows.extend(w_rows);
        daily_rows.extend(d_rows);
        summary.push(s);
    }
    stage.write_table("estimates", &rows)?;
    stage.write_table("daily_estimates", &daily_rows)?;
    stage.write_table("estimate_summary", &summary)
}
