use std::path::PathBuf;

use instvol::estimators::{gamma, t_price, t_volume};
use instvol::marketdata::{aggregate_daily, DailyConfig};
use instvol::statstests::{invariant_report, DayEstimate, InstrumentDays, KsMode, ReportConfig};
use instvol::EstimatorConfig;
use serde::{Deserialize, Serialize};

use crate::config::{date_of_day, load, HasInputs, Inputs};
use crate::error::Result;
use crate::output::Staging;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InvariantConfig {
    pub input: Inputs,
    pub daily: DailyConfig,
    pub estimator: EstimatorConfig,
    pub report: ReportConfig,
}

impl HasInputs for InvariantConfig {
    fn inputs_mut(&mut self) -> &mut Inputs {
        &mut self.input
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct DayRow {
    symbol: String,
    group: Option<String>,
    date: String,
    t_price: Option<f64>,
    t_volume: Option<f64>,
    gamma: Option<f64>,
    traded_volume: f64,
}

pub fn run(
    mut cfg: InvariantConfig,
    data: &[PathBuf],
    seed: Option<u64>,
    window: Option<f64>,
    stage: &mut Staging,
) -> Result<()> {
    if let Some(w) = window {
        cfg.daily.window_secs = w;
    }
    if let (Some(s), KsMode::EstimatedParamsMc { seed, .. }) = (seed, &mut cfg.report.ks_mode) {
        *seed = s;
    }
    let inputs = cfg.input.resolve(data)?;
    let opts = cfg.input.ingest_options();
    let mut instruments = Vec::with_capacity(inputs.len());
    let mut day_rows = Vec::new();
    for input in &inputs {
        let l = load(input, &opts)?;
        let daily = aggregate_daily(&l.quotes, &l.trades, &l.spec, &cfg.daily)
            .map_err(|e| crate::error::CliError::from(e).for_instrument(&l.spec.symbol))?;
        let days: Vec<DayEstimate> = daily
            .iter()
            .map(|d| DayEstimate {
                day: d.day(),
                t_price: t_price(d).ok(),
                t_volume: t_volume(d, &l.spec, &cfg.estimator).ok(),
                gamma: gamma(d, &l.spec, &cfg.estimator).ok(),
                traded_volume: d.traded_volume,
            })
            .collect();
        day_rows.extend(days.iter().map(|d| DayRow {
            symbol: l.spec.symbol.clone(),
            group: l.group.clone(),
            date: date_of_day(d.day),
            t_price: d.t_price,
            t_volume: d.t_volume,
            gamma: d.gamma,
            traded_volume: d.traded_volume,
        }));
        instruments.push(InstrumentDays {
            symbol: l.spec.symbol.clone(),
            group: l.group,
            days,
        });
    }
    let rows = invariant_report(&instruments, &cfg.report)?;
    for r in &rows {
        log::info!(
            "{}: ⟨γ⟩ = {:.4} over {} of {}",
            r.label,
            r.mean_gamma,
            r.n_used,
            r.n_total
        );
    }
    stage.write_table("invariant_report", &rows)?;
    stage.write_table("invariant_days", &day_rows)
}
