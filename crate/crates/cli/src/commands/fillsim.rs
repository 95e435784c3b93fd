use std::path::PathBuf;

use instvol::estimators::correction_coefficient;
use instvol::simulator::{simulate_passive_fills, FillSimConfig};
use serde::{Deserialize, Serialize};

use crate::config::{load, HasInputs, Inputs};
use crate::error::{CliError, Result};
use crate::output::Staging;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FillsimConfig {
    pub input: Inputs,
    pub fill: FillSimConfig,
    /// Points of the correction curve emitted for overlay plots.
    pub curve_points: usize,
    /// Largest spread, in ticks, of the curve grid.
    pub curve_max_ticks: f64,
}

impl Default for FillsimConfig {
    fn default() -> Self {
        Self {
            input: Inputs::default(),
            fill: FillSimConfig::default(),
            curve_points: 200,
            curve_max_ticks: 1000.0,
        }
    }
}

impl HasInputs for FillsimConfig {
    fn inputs_mut(&mut self) -> &mut Inputs {
        &mut self.input
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FillRow {
    pub symbol: String,
    pub spread_ticks: f64,
    pub measured_fraction: f64,
    pub n_orders: usize,
    pub fill_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub spread_ticks: f64,
    pub correction: f64,
}

/// Log-spaced grid from one tick to `max_ticks`, both ends included.
pub fn correction_curve(points: usize, max_ticks: f64) -> Result<Vec<CurvePoint>> {
    if points < 2 || !(max_ticks > 1.0 && max_ticks.is_finite()) {
        return Err(CliError::Invalid(format!(
            "curve needs at least 2 points and a maximum above one tick, got {points} and {max_ticks}"
        )));
    }
    (0..points)
        .map(|i| {
            let n = if i + 1 == points {
                max_ticks
            } else {
                max_ticks.powf(i as f64 / (points - 1) as f64)
            };
            Ok(CurvePoint {
                spread_ticks: n,
                correction: correction_coefficient(n)?,
            })
        })
        .collect()
}

pub fn run(
    mut cfg: FillsimConfig,
    data: &[PathBuf],
    window: Option<f64>,
    stage: &mut Staging,
) -> Result<()> {
    if let Some(w) = window {
        cfg.fill.window_secs = w;
    }
    let curve = correction_curve(cfg.curve_points, cfg.curve_max_ticks)?;
    let inputs = cfg.input.resolve(data)?;
    let opts = cfg.input.ingest_options();
    let mut rows = Vec::with_capacity(inputs.len());
    for input in &inputs {
        let l = load(input, &opts)?;
        let r = simulate_passive_fills(&l.quotes, &l.trades, &l.spec, &cfg.fill)
            .map_err(|e| CliError::from(e).for_instrument(&l.spec.symbol))?;
        log::info!(
            "{}: n = {:.3} ticks, fraction {:.4} over {} orders",
            l.spec.symbol,
            r.spread_ticks,
            r.measured_fraction,
            r.n_orders
        );
        rows.push(FillRow {
            symbol: l.spec.symbol,
            spread_ticks: r.spread_ticks,
            measured_fraction: r.measured_fraction,
            n_orders: r.n_orders,
            fill_rate: r.fill_rate,
        });
    }
    stage.write_table("fillsim", &rows)?;
    stage.write_table("fill_curve", &curve)
}
