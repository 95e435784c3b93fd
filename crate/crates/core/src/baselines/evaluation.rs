//! Forecast comparison: mean squared error against realized volatility and
//! returns normalised by the preceding instantaneous-volatility estimate.

use serde::{Deserialize, Serialize};

use super::BaselineError;
use crate::estimators::{instantaneous_volatility, EstimatorConfig};
use crate::marketdata::{merge_windows, InstrumentSpec, WindowAggregate};
use crate::statstests::mean_std;

/// Horizons, in minutes, of the history/forecast grid.
pub const GRID_MINUTES: [u32; 5] = [1, 5, 10, 30, 60];

/// `(1/N)·Σ (a_i − b_i)²` over the indices not in `exclusions`.
pub fn mse_compare(
    realized: &[f64],
    candidate: &[f64],
    exclusions: &[usize],
) -> Result<f64, BaselineError> {
    if realized.len() != candidate.len() {
        return Err(BaselineError::LengthMismatch {
            left: realized.len(),
            right: candidate.len(),
        });
    }
    let (sum, n) = realized
        .iter()
        .zip(candidate)
        .enumerate()
        .filter(|(i, _)| !exclusions.contains(i))
        .fold((0.0, 0usize), |(s, n), (_, (a, b))| {
            (s + (a - b).powi(2), n + 1)
        });
    if n == 0 {
        return Err(BaselineError::Empty);
    }
    Ok(sum / n as f64)
}

/// `ξ_i = r_i / σ_i`, skipping observations whose forecast is zero or not
/// finite. Returns the kept values and the skip count.
pub fn normalized_returns(
    returns: &[f64],
    sigmas: &[Option<f64>],
) -> Result<(Vec<f64>, usize), BaselineError> {
    if returns.len() != sigmas.len() {
        return Err(BaselineError::LengthMismatch {
            left: returns.len(),
            right: sigmas.len(),
        });
    }
    let mut xi = Vec::with_capacity(returns.len());
    let mut skipped = 0;
    for (r, s) in returns.iter().zip(sigmas) {
        match s {
            Some(s) if *s > 0.0 && s.is_finite() && r.is_finite() => xi.push(r / s),
            _ => skipped += 1,
        }
    }
    Ok((xi, skipped))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XiCell {
    pub history_min: u32,
    pub forecast_min: u32,
    pub xi: Vec<f64>,
    pub sigma_xi: f64,
    pub n_obs: usize,
    pub n_skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastEval {
    pub mse_inst: f64,
    pub mse_garch: f64,
    pub xi: Vec<f64>,
    pub sigma_xi: f64,
    pub n_days: usize,
}

fn check_grid(history_min: u32, forecast_min: u32) -> Result<(), BaselineError> {
    if !GRID_MINUTES.contains(&history_min) || !GRID_MINUTES.contains(&forecast_min) {
        return Err(BaselineError::InvalidGrid(format!(
            "history {history_min} and forecast {forecast_min} must be in {GRID_MINUTES:?} minutes"
        )));
    }
    if history_min > forecast_min {
        return Err(BaselineError::InvalidGrid(format!(
            "history {history_min} min exceeds forecast {forecast_min} min"
        )));
    }
    Ok(())
}

/// One grid cell. `days` holds each session's one-minute windows in time
/// order. Each day is tiled from the open by forecast blocks; a block with
/// a full history inside the same day is an observation. Its return is the
/// log change of the mid over the block, and its forecast is `σ_I` of the
/// merged history scaled by `sqrt(forecast / history)`.
pub fn xi_evaluation(
    days: &[Vec<WindowAggregate>],
    spec: &InstrumentSpec,
    cfg: &EstimatorConfig,
    history_min: u32,
    forecast_min: u32,
) -> Result<XiCell, BaselineError> {
    check_grid(history_min, forecast_min)?;
    let (h, f) = (history_min as usize, forecast_min as usize);
    let scale = (forecast_min as f64 / history_min as f64).sqrt();
    let mut returns = Vec::new();
    let mut sigmas = Vec::new();
    for windows in days {
        if let Some(w) = windows
            .iter()
            .find(|w| (w.duration_secs() - 60.0).abs() > 1e-9 && !w.truncated)
        {
            return Err(BaselineError::InvalidGrid(format!(
                "base windows must last one minute, found {} s",
                w.duration_secs()
            )));
        }
        let mut start = 0;
        while start + f <= windows.len() {
            if start >= h {
                let block = &windows[start..start + f];
                let r = match (block[0].open_price, block[f - 1].close_price) {
                    (Some(o), Some(c)) if o > 0.0 && c > 0.0 => (c / o).ln(),
                    _ => f64::NAN,
                };
                let sigma = merge_windows(&windows[start - h..start])
                    .and_then(|hist| instantaneous_volatility(&hist, spec, cfg).ok())
                    .map(|s| s * scale);
                returns.push(r);
                sigmas.push(sigma);
            }
            start += f;
        }
    }
    let (xi, n_skipped) = normalized_returns(&returns, &sigmas)?;
    if xi.len() < 2 {
        return Err(BaselineError::InsufficientData(format!(
            "{} usable observations for history {history_min} / forecast {forecast_min}",
            xi.len()
        )));
    }
    let (_, sigma_xi) = mean_std(&xi);
    Ok(XiCell {
        history_min,
        forecast_min,
        n_obs: xi.len(),
        n_skipped,
        sigma_xi,
        xi,
    })
}

/// Every lower-triangle cell (history ≤ forecast) of the grid that has
/// enough observations.
pub fn xi_grid(
    days: &[Vec<WindowAggregate>],
    spec: &InstrumentSpec,
    cfg: &EstimatorConfig,
) -> Vec<XiCell> {
    let mut cells = Vec::new();
    for &h in &GRID_MINUTES {
        for &f in GRID_MINUTES.iter().filter(|&&f| f >= h) {
            if let Ok(cell) = xi_evaluation(days, spec, cfg, h, f) {
                cells.push(cell);
            }
        }
    }
    cells
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marketdata::NANOS_PER_SEC;
    use proptest::prelude::*;

    #[test]
    fn mse_examples() {
        let a = [0.1, 0.2, 0.3];
        assert_eq!(mse_compare(&a, &a, &[]).unwrap(), 0.0);
        let b: Vec<f64> = a.iter().map(|x| x + 0.05).collect();
        assert!((mse_compare(&a, &b, &[]).unwrap() - 0.0025).abs() < 1e-15);
        let mut c = b.clone();
        c[1] = 10.0;
        assert!((mse_compare(&a, &c, &[1]).unwrap() - 0.0025).abs() < 1e-15);
        assert!(matches!(
            mse_compare(&a, &a[..2], &[]),
            Err(BaselineError::LengthMismatch { .. })
        ));
        assert!(matches!(
            mse_compare(&a, &a, &[0, 1, 2]),
            Err(BaselineError::Empty)
        ));
    }

    #[test]
    fn lagged_tracker_is_penalised_after_a_step() {
        let truth: Vec<f64> = (0..40).map(|i| if i < 20 { 0.01 } else { 0.02 }).collect();
        let lagged: Vec<f64> = std::iter::once(truth[0])
            .chain(truth[..39].iter().copied())
            .collect();
        let same_day = mse_compare(&truth, &truth, &[]).unwrap();
        assert!(mse_compare(&truth, &lagged, &[]).unwrap() > same_day);
    }

    #[test]
    fn xi_equals_one_when_returns_match_forecasts() {
        let r = [0.01, -0.02, 0.03];
        let s = [Some(0.01), Some(-0.02), Some(0.03)];
        let (xi, skipped) = normalized_returns(&r, &s).unwrap();
        // a negative forecast is not a volatility and is skipped
        assert_eq!(skipped, 1);
        assert!(xi.iter().all(|&x| x == 1.0));
        let (_, sd) = mean_std(&xi);
        assert_eq!(sd, 0.0);
    }

    #[test]
    fn grid_rejects_off_grid_and_upper_triangle() {
        let spec = spec();
        let cfg = EstimatorConfig::default();
        assert!(matches!(
            xi_evaluation(&[], &spec, &cfg, 2, 5),
            Err(BaselineError::InvalidGrid(_))
        ));
        assert!(matches!(
            xi_evaluation(&[], &spec, &cfg, 10, 5),
            Err(BaselineError::InvalidGrid(_))
        ));
    }

    fn spec() -> InstrumentSpec {
        InstrumentSpec {
            symbol: "X".into(),
            tick_size: 0.01,
            session_open: "08:00".parse().unwrap(),
            session_close: "09:00".parse().unwrap(),
            price_decimals: 2,
        }
    }

    /// Minute windows whose σ_I is exactly 1e-4 and whose mid moves by a
    /// fixed relative step per minute.
    fn minute(i: i64, open: f64, close: f64, traded: f64) -> WindowAggregate {
        WindowAggregate {
            window_start: i * 60 * NANOS_PER_SEC,
            window_end: (i + 1) * 60 * NANOS_PER_SEC,
            avg_spread: 0.01,
            avg_bid_vol: 500.0,
            avg_ask_vol: 500.0,
            avg_price: 100.0,
            traded_volume: traded,
            price_std: 0.01,
            n_quotes: 5,
            n_trades: if traded > 0.0 { 3 } else { 0 },
            valid: traded > 0.0,
            truncated: false,
            open_price: Some(open),
            close_price: Some(close),
            last_trade_px: None,
            depth_bid_vol: None,
            depth_ask_vol: None,
        }
    }

    #[test]
    fn constructed_minutes_give_unit_xi() {
        let step = 1e-4f64;
        let mut px = 100.0;
        let day: Vec<WindowAggregate> = (0..60)
            .map(|i| {
                let open = px;
                px *= step.exp();
                minute(i, open, px, 1000.0)
            })
            .collect();
        let cell = xi_evaluation(
            std::slice::from_ref(&day),
            &spec(),
            &EstimatorConfig::default(),
            5,
            5,
        )
        .unwrap();
        // σ_I of five merged minutes is 1e-4·sqrt(5) and each return is 5e-4
        assert!(
            cell.xi.iter().all(|x| (x - 5f64.sqrt()).abs() < 1e-9),
            "{:?}",
            cell.xi
        );
        assert_eq!(cell.n_obs + cell.n_skipped, 11);
        assert!(cell.sigma_xi < 1e-9);

        let mut quiet = day;
        for w in quiet.iter_mut().take(10) {
            w.traded_volume = 0.0;
            w.n_trades = 0;
            w.valid = false;
        }
        let cell = xi_evaluation(&[quiet], &spec(), &EstimatorConfig::default(), 5, 5).unwrap();
        assert_eq!(cell.n_skipped, 2);
        assert_eq!(cell.n_obs, 9);
    }

    proptest! {
        #[test]
        fn mse_is_symmetric_and_zero_only_on_agreement(
            pairs in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..50),
        ) {
            let a: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let b: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let ab = mse_compare(&a, &b, &[]).unwrap();
            prop_assert_eq!(ab, mse_compare(&b, &a, &[]).unwrap());
            prop_assert!(ab >= 0.0);
            prop_assert_eq!(ab == 0.0, a == b);
        }

        #[test]
        fn xi_counts_add_up(
            obs in prop::collection::vec((-0.1f64..0.1, prop::option::of(-0.01f64..0.05)), 0..60),
        ) {
            let r: Vec<f64> = obs.iter().map(|o| o.0).collect();
            let s: Vec<Option<f64>> = obs.iter().map(|o| o.1).collect();
            let (xi, skipped) = normalized_returns(&r, &s).unwrap();
            prop_assert_eq!(xi.len() + skipped, obs.len());
        }
    }
}
