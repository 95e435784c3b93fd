//! Characteristic execution times, the spread correction coefficient, the
//! market invariant and the instantaneous volatility.
//!
//! Two waiting times describe a passive order resting at the touch:
//!
//! ```text
//! T_price  = ΔT · (⟨spread⟩ / σ(ΔT))²
//! T_volume = ΔT · (⟨V_bid⟩ + ⟨V_ask⟩) / V_traded · 1 / P(n)
//! P(n)     = ½ · (1 + exp(−(n − 1) / √n)),   n = ⟨spread⟩ / tick
//! ```
//!
//! Their ratio defines `γ² = T_volume / T_price`, which stays close to one on
//! liquid markets. Setting `γ = 1` and solving for `σ(ΔT) / ⟨Price⟩` gives
//! the instantaneous volatility.
//!
//! All functions are pure. Times are in seconds, volumes in shares or
//! contracts, and `σ_I` is a fractional return per window.

use libm::erfc;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::marketdata::{InstrumentSpec, Nanos, WindowAggregate};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimatorError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("aggregate is not valid")]
    InvalidAggregate,
    #[error("T_price undefined: price standard deviation is zero")]
    ZeroPriceStd,
    #[error("T_volume undefined: no traded volume")]
    ZeroTradedVolume,
    #[error("book volume is zero")]
    EmptyBook,
    #[error("average spread is {0} ticks, below one tick")]
    SubTickSpread(f64),
    #[error("gamma undefined: {0}")]
    UndefinedGamma(Box<EstimatorError>),
}

/// Which book and price inputs feed the estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VolatilityVariant {
    /// Window time averages of the touch volumes and the mid price.
    #[default]
    Averaged,
    /// Last trade price and per-level volume averaged over the configured
    /// book depth. Falls back to the averaged inputs when the data carries
    /// no depth or no trade.
    Instantaneous,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorConfig {
    /// Clamp `n` to one when the average spread is below a tick. When
    /// disabled such windows are a domain error.
    pub clamp_spread: bool,
    pub variant: VolatilityVariant,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            clamp_spread: true,
            variant: VolatilityVariant::Averaged,
        }
    }
}

/// Everything derivable from one aggregate. Undefined quantities are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateSet {
    pub window_start: Nanos,
    pub window_end: Nanos,
    pub t_price: Option<f64>,
    pub t_volume: Option<f64>,
    pub spread_ticks: Option<f64>,
    pub correction: Option<f64>,
    pub gamma: Option<f64>,
    pub sigma_inst: Option<f64>,
}

impl EstimateSet {
    pub fn from_aggregate(
        agg: &WindowAggregate,
        spec: &InstrumentSpec,
        cfg: &EstimatorConfig,
    ) -> Self {
        let spread_ticks = spread_in_ticks(agg.avg_spread, spec.tick_size, cfg.clamp_spread).ok();
        Self {
            window_start: agg.window_start,
            window_end: agg.window_end,
            t_price: t_price(agg).ok(),
            t_volume: t_volume(agg, spec, cfg).ok(),
            spread_ticks,
            correction: spread_ticks.and_then(|n| correction_coefficient(n).ok()),
            gamma: gamma(agg, spec, cfg).ok(),
            sigma_inst: instantaneous_volatility(agg, spec, cfg).ok(),
        }
    }
}

/// `σ(t) = σ(ΔT) · √(t / ΔT)`.
pub fn scale_sigma(sigma_dt: f64, dt: f64, t: f64) -> Result<f64, EstimatorError> {
    if !(dt > 0.0) {
        return Err(EstimatorError::Domain(format!(
            "ΔT must be positive, got {dt}"
        )));
    }
    if !(sigma_dt >= 0.0) || !(t >= 0.0) {
        return Err(EstimatorError::Domain(format!(
            "σ and t must be non-negative, got σ={sigma_dt}, t={t}"
        )));
    }
    Ok(sigma_dt * (t / dt).sqrt())
}

/// Time for the price diffusion to cover one average spread.
pub fn t_price(agg: &WindowAggregate) -> Result<f64, EstimatorError> {
    if !agg.valid {
        return Err(EstimatorError::InvalidAggregate);
    }
    if !(agg.price_std > 0.0) {
        return Err(EstimatorError::ZeroPriceStd);
    }
    Ok(agg.duration_secs() * (agg.avg_spread / agg.price_std).powi(2))
}

/// Average spread measured in ticks.
pub fn spread_in_ticks(
    avg_spread: f64,
    tick_size: f64,
    clamp: bool,
) -> Result<f64, EstimatorError> {
    if !(tick_size > 0.0) {
        return Err(EstimatorError::Domain(format!(
            "tick size must be positive, got {tick_size}"
        )));
    }
    let n = avg_spread / tick_size;
    if !n.is_finite() || n < 0.0 {
        return Err(EstimatorError::Domain(format!("bad spread {avg_spread}")));
    }
    if n < 1.0 {
        return if clamp {
            Ok(1.0)
        } else {
            Err(EstimatorError::SubTickSpread(n))
        };
    }
    Ok(n)
}

/// Fraction of traded volume that hits the touch level or below, as a
/// function of the spread in ticks. `P(1) = 1`, decreasing to ½.
pub fn correction_coefficient(spread_ticks: f64) -> Result<f64, EstimatorError> {
    let n = spread_ticks;
    if n.is_nan() || n < 1.0 {
        return Err(EstimatorError::Domain(format!(
            "spread must be at least one tick, got {n}"
        )));
    }
    if n.is_infinite() {
        return Ok(0.5);
    }
    Ok(0.5 * (1.0 + (-(n - 1.0) / n.sqrt()).exp()))
}

struct BookInputs {
    price: f64,
    book_volume: f64,
}

fn book_inputs(agg: &WindowAggregate, cfg: &EstimatorConfig) -> BookInputs {
    match cfg.variant {
        VolatilityVariant::Averaged => BookInputs {
            price: agg.avg_price,
            book_volume: agg.book_volume(),
        },
        VolatilityVariant::Instantaneous => BookInputs {
            price: agg.last_trade_px.unwrap_or(agg.avg_price),
            book_volume: match (agg.depth_bid_vol, agg.depth_ask_vol) {
                (Some(b), Some(a)) => b + a,
                _ => agg.book_volume(),
            },
        },
    }
}

/// Time for one-sided trading to work through the average touch queue,
/// corrected for trades printing inside the spread.
pub fn t_volume(
    agg: &WindowAggregate,
    spec: &InstrumentSpec,
    cfg: &EstimatorConfig,
) -> Result<f64, EstimatorError> {
    if !(agg.traded_volume > 0.0) {
        return Err(EstimatorError::ZeroTradedVolume);
    }
    if !agg.valid {
        return Err(EstimatorError::InvalidAggregate);
    }
    let n = spread_in_ticks(agg.avg_spread, spec.tick_size, cfg.clamp_spread)?;
    let p = correction_coefficient(n)?;
    let book = book_inputs(agg, cfg).book_volume;
    Ok(agg.duration_secs() * book / agg.traded_volume / p)
}

/// Volume traded on one side of the market during `t` seconds.
pub fn one_sided_volume(t: f64, agg: &WindowAggregate) -> Result<f64, EstimatorError> {
    if !(t >= 0.0) {
        return Err(EstimatorError::Domain(format!(
            "t must be non-negative, got {t}"
        )));
    }
    let dt = agg.duration_secs();
    if !(dt > 0.0) {
        return Err(EstimatorError::Domain("window has zero length".into()));
    }
    Ok(0.5 * t * agg.traded_volume / dt)
}

/// `γ = σ/⟨spread⟩ · √(book / V_traded) · √(1 / P(n))`.
pub fn gamma(
    agg: &WindowAggregate,
    spec: &InstrumentSpec,
    cfg: &EstimatorConfig,
) -> Result<f64, EstimatorError> {
    let undefined = |e| EstimatorError::UndefinedGamma(Box::new(e));
    if !agg.valid {
        return Err(undefined(EstimatorError::InvalidAggregate));
    }
    if !(agg.price_std > 0.0) {
        return Err(undefined(EstimatorError::ZeroPriceStd));
    }
    if !(agg.traded_volume > 0.0) {
        return Err(undefined(EstimatorError::ZeroTradedVolume));
    }
    let n = spread_in_ticks(agg.avg_spread, spec.tick_size, cfg.clamp_spread).map_err(undefined)?;
    let p = correction_coefficient(n).map_err(undefined)?;
    let book = book_inputs(agg, cfg).book_volume;
    Ok(agg.price_std / agg.avg_spread * (book / agg.traded_volume).sqrt() * (1.0 / p).sqrt())
}

/// `σ_I = ⟨spread⟩/⟨Price⟩ · √(V_traded / book) · √P(n)`.
///
/// Needs a quote state but not trading: a window without trades has a
/// static price and returns zero.
pub fn instantaneous_volatility(
    agg: &WindowAggregate,
    spec: &InstrumentSpec,
    cfg: &EstimatorConfig,
) -> Result<f64, EstimatorError> {
    if !agg.has_book() {
        return Err(EstimatorError::InvalidAggregate);
    }
    let inputs = book_inputs(agg, cfg);
    if !(inputs.book_volume > 0.0) {
        return Err(EstimatorError::EmptyBook);
    }
    if !(inputs.price > 0.0) {
        return Err(EstimatorError::Domain(format!(
            "price must be positive, got {}",
            inputs.price
        )));
    }
    if agg.traded_volume == 0.0 {
        return Ok(0.0);
    }
    let n = spread_in_ticks(agg.avg_spread, spec.tick_size, cfg.clamp_spread)?;
    let p = correction_coefficient(n)?;
    Ok(agg.avg_spread / inputs.price * (agg.traded_volume / inputs.book_volume).sqrt() * p.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnualizationConfig {
    pub sessions_per_year: f64,
    pub session_seconds: f64,
}

impl AnnualizationConfig {
    pub fn for_instrument(spec: &InstrumentSpec) -> Self {
        Self {
            sessions_per_year: 252.0,
            session_seconds: spec.session_secs(),
        }
    }
}

/// Scales a per-window volatility to annual terms.
pub fn annualize(
    sigma_window: f64,
    dt: f64,
    calendar: &AnnualizationConfig,
) -> Result<f64, EstimatorError> {
    if !(dt > 0.0) {
        return Err(EstimatorError::Domain(format!(
            "ΔT must be positive, got {dt}"
        )));
    }
    Ok(sigma_window * (calendar.sessions_per_year * calendar.session_seconds / dt).sqrt())
}

/// Chance that a binary random walk has crossed one spread after `T_price`:
/// `1 − erf(1/√2)`.
pub fn passive_fill_probability() -> f64 {
    erfc(std::f64::consts::FRAC_1_SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marketdata::NANOS_PER_SEC;

    fn spec() -> InstrumentSpec {
        InstrumentSpec {
            symbol: "T".into(),
            tick_size: 0.01,
            session_open: "08:00".parse().unwrap(),
            session_close: "16:30".parse().unwrap(),
            price_decimals: 2,
        }
    }

    pub(crate) fn agg(
        dt: f64,
        spread: f64,
        sigma: f64,
        book: f64,
        traded: f64,
        price: f64,
    ) -> WindowAggregate {
        WindowAggregate {
            window_start: 0,
            window_end: (dt * NANOS_PER_SEC as f64) as i64,
            avg_spread: spread,
            avg_bid_vol: book / 2.0,
            avg_ask_vol: book / 2.0,
            avg_price: price,
            traded_volume: traded,
            price_std: sigma,
            n_quotes: 10,
            n_trades: if traded > 0.0 { 5 } else { 0 },
            valid: traded > 0.0 && spread > 0.0,
            truncated: false,
            open_price: Some(price),
            close_price: Some(price),
            last_trade_px: None,
            depth_bid_vol: None,
            depth_ask_vol: None,
        }
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    #[test]
    fn scale_sigma_examples() {
        assert_eq!(scale_sigma(2.0, 300.0, 300.0).unwrap(), 2.0);
        assert_eq!(scale_sigma(2.0, 300.0, 1200.0).unwrap(), 4.0);
        // 1.5 * sqrt(1.5)
        assert!((scale_sigma(1.5, 60.0, 90.0).unwrap() - 1.837_117_307_087_384).abs() < 1e-12);
        assert!(scale_sigma(1.0, 0.0, 1.0).is_err());
        assert!(scale_sigma(1.0, -5.0, 1.0).is_err());
    }

    #[test]
    fn t_price_examples() {
        assert!(close(
            t_price(&agg(300.0, 0.02, 0.02, 1.0, 1.0, 100.0)).unwrap(),
            300.0,
            1e-12
        ));
        assert!(close(
            t_price(&agg(300.0, 0.01, 0.02, 1.0, 1.0, 100.0)).unwrap(),
            75.0,
            1e-12
        ));
        assert_eq!(
            t_price(&agg(300.0, 0.01, 0.0, 1.0, 1.0, 100.0)),
            Err(EstimatorError::ZeroPriceStd)
        );
    }

    #[test]
    fn correction_coefficient_examples() {
        assert_eq!(correction_coefficient(1.0).unwrap(), 1.0);
        assert!(correction_coefficient(1e6).unwrap() - 0.5 < 1e-3);
        assert_eq!(correction_coefficient(f64::INFINITY).unwrap(), 0.5);
        // ½(1 + e^{-3/2})
        assert!((correction_coefficient(4.0).unwrap() - 0.611_565_080_074_215).abs() < 1e-12);
        assert!(correction_coefficient(0.5).is_err());
        assert!(correction_coefficient(f64::NAN).is_err());
    }

    #[test]
    fn spread_clamping_policy() {
        assert_eq!(spread_in_ticks(0.005, 0.01, true).unwrap(), 1.0);
        assert!(matches!(
            spread_in_ticks(0.005, 0.01, false),
            Err(EstimatorError::SubTickSpread(_))
        ));
        assert!((spread_in_ticks(0.04, 0.01, false).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn t_volume_examples() {
        let cfg = EstimatorConfig::default();
        let s = spec();
        assert!(close(
            t_volume(&agg(300.0, 0.01, 0.01, 1000.0, 1000.0, 100.0), &s, &cfg).unwrap(),
            300.0,
            1e-12
        ));
        assert!(close(
            t_volume(&agg(300.0, 0.01, 0.01, 2000.0, 500.0, 100.0), &s, &cfg).unwrap(),
            1200.0,
            1e-12
        ));
        let n4 = t_volume(&agg(300.0, 0.04, 0.01, 2000.0, 500.0, 100.0), &s, &cfg).unwrap();
        assert!((n4 - 1962.18).abs() < 0.01, "{n4}");
        assert_eq!(
            t_volume(&agg(300.0, 0.01, 0.01, 2000.0, 0.0, 100.0), &s, &cfg),
            Err(EstimatorError::ZeroTradedVolume)
        );
    }

    #[test]
    fn one_sided_volume_examples() {
        let a = agg(300.0, 0.01, 0.01, 1.0, 1000.0, 100.0);
        assert_eq!(one_sided_volume(300.0, &a).unwrap(), 500.0);
        assert_eq!(one_sided_volume(0.0, &a).unwrap(), 0.0);
        let b = agg(300.0, 0.01, 0.01, 1.0, 900.0, 100.0);
        assert!(close(one_sided_volume(600.0, &b).unwrap(), 900.0, 1e-12));
        assert!(one_sided_volume(-1.0, &a).is_err());
    }

    #[test]
    fn gamma_examples() {
        let cfg = EstimatorConfig::default();
        let s = spec();
        assert!(close(
            gamma(&agg(300.0, 0.01, 0.01, 1000.0, 1000.0, 100.0), &s, &cfg).unwrap(),
            1.0,
            1e-12
        ));
        assert!(close(
            gamma(&agg(300.0, 0.01, 0.02, 1000.0, 4000.0, 100.0), &s, &cfg).unwrap(),
            1.0,
            1e-12
        ));
        assert!(matches!(
            gamma(&agg(300.0, 0.01, 0.0, 1000.0, 4000.0, 100.0), &s, &cfg),
            Err(EstimatorError::UndefinedGamma(_))
        ));
    }

    #[test]
    fn instantaneous_volatility_examples() {
        let cfg = EstimatorConfig::default();
        let s = spec();
        let v = instantaneous_volatility(&agg(300.0, 0.01, 0.02, 1000.0, 4000.0, 100.0), &s, &cfg)
            .unwrap();
        assert!(close(v, 2e-4, 1e-12), "{v}");
        assert_eq!(
            instantaneous_volatility(&agg(300.0, 0.01, 0.0, 1000.0, 0.0, 100.0), &s, &cfg).unwrap(),
            0.0
        );
        let base =
            instantaneous_volatility(&agg(300.0, 0.01, 0.0, 1000.0, 1000.0, 100.0), &s, &cfg)
                .unwrap();
        let quad =
            instantaneous_volatility(&agg(1200.0, 0.01, 0.0, 1000.0, 4000.0, 100.0), &s, &cfg)
                .unwrap();
        assert!(close(quad, 2.0 * base, 1e-12));
        assert_eq!(
            instantaneous_volatility(&agg(300.0, 0.01, 0.0, 0.0, 10.0, 100.0), &s, &cfg),
            Err(EstimatorError::EmptyBook)
        );
    }

    #[test]
    fn instantaneous_variant_uses_depth_and_last_trade() {
        let s = spec();
        let mut a = agg(300.0, 0.01, 0.0, 1000.0, 4000.0, 100.0);
        a.last_trade_px = Some(200.0);
        a.depth_bid_vol = Some(2000.0);
        a.depth_ask_vol = Some(2000.0);
        let cfg = EstimatorConfig {
            variant: VolatilityVariant::Instantaneous,
            ..Default::default()
        };
        let v = instantaneous_volatility(&a, &s, &cfg).unwrap();
        // spread/price = 5e-5, sqrt(4000/4000) = 1
        assert!(close(v, 5e-5, 1e-12), "{v}");
        let avg = instantaneous_volatility(&a, &s, &EstimatorConfig::default()).unwrap();
        assert!(close(avg, 2e-4, 1e-12));
    }

    #[test]
    fn annualize_examples() {
        let cal = AnnualizationConfig::for_instrument(&spec());
        let a = annualize(0.01, cal.session_seconds, &cal).unwrap();
        assert!((a - 0.158_745_078_663_875_4).abs() < 1e-12);
        assert_eq!(annualize(0.0, 300.0, &cal).unwrap(), 0.0);
        let full = annualize(0.01, 600.0, &cal).unwrap();
        let half = annualize(0.01, 300.0, &cal).unwrap();
        assert!(close(half, full * 2f64.sqrt(), 1e-12));
        assert!(annualize(0.01, 0.0, &cal).is_err());
    }

    /// Maclaurin series of erf, independent of the library erfc.
    fn erf_series(x: f64) -> f64 {
        let mut term = x;
        let mut sum = x;
        for n in 1..60 {
            term *= -x * x / n as f64;
            sum += term / (2 * n + 1) as f64;
        }
        2.0 / std::f64::consts::PI.sqrt() * sum
    }

    #[test]
    fn passive_fill_probability_examples() {
        let p = passive_fill_probability();
        let oracle = 1.0 - erf_series(std::f64::consts::FRAC_1_SQRT_2);
        assert!((p - oracle).abs() < 1e-12, "{p} vs {oracle}");
        assert!((p - 0.317_311).abs() < 1e-6);
        assert!(p > 0.31 && p < 0.32);
    }

    #[test]
    fn estimate_set_leaves_undefined_quantities_blank() {
        let e = EstimateSet::from_aggregate(
            &agg(300.0, 0.01, 0.01, 1000.0, 0.0, 100.0),
            &spec(),
            &EstimatorConfig::default(),
        );
        assert_eq!(e.sigma_inst, Some(0.0));
        assert!(e.gamma.is_none() && e.t_volume.is_none() && e.t_price.is_none());
        assert_eq!(e.correction, Some(1.0));
    }
}
