//! Invariant report tables: per instrument (one row per instrument over its
//! days) or per group (one row per group over instrument-level means).

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{
    ks_normality, ks_with_null, mean_std, one_sample_t_test, pearson, shapiro_wilk, KsMode,
    LillieforsNull, StatsError,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayEstimate {
    pub day: i64,
    pub t_price: Option<f64>,
    pub t_volume: Option<f64>,
    pub gamma: Option<f64>,
    pub traded_volume: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstrumentDays {
    pub symbol: String,
    /// Exchange or index the instrument belongs to, for grouped reports.
    pub group: Option<String>,
    pub days: Vec<DayEstimate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportStyle {
    PerInstrument,
    PerGroup,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReportConfig {
    pub style: ReportStyle,
    /// Instruments whose mean T_price is not below this are dropped.
    pub max_t_price_secs: Option<f64>,
    /// Days trading less than this fraction of the instrument's busiest day
    /// are dropped.
    pub min_volume_fraction: Option<f64>,
    pub ks_mode: KsMode,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self {
            style: ReportStyle::PerInstrument,
            max_t_price_secs: Some(900.0),
            min_volume_fraction: Some(0.2),
            ks_mode: KsMode::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub label: String,
    /// Days (per instrument) or instruments (per group) before filtering.
    pub n_total: usize,
    pub n_used: usize,
    pub mean_t_price: f64,
    pub mean_gamma: f64,
    pub std_gamma: f64,
    /// Pearson correlation of T_price and T_volume.
    pub correlation: Option<f64>,
    pub sw_p: Option<f64>,
    pub ks_p: Option<f64>,
    /// Two-sided test of mean γ = 1.
    pub t_test_p: Option<f64>,
}

struct Point {
    t_price: f64,
    t_volume: f64,
    gamma: f64,
}

/// Days passing the volume filter with all three quantities defined.
fn usable_days(inst: &InstrumentDays, cfg: &ReportConfig) -> Vec<Point> {
    let max_volume = inst
        .days
        .iter()
        .map(|d| d.traded_volume)
        .fold(0.0, f64::max);
    let floor = cfg.min_volume_fraction.map_or(0.0, |f| f * max_volume);
    inst.days
        .iter()
        .filter(|d| d.traded_volume >= floor)
        .filter_map(|d| match (d.t_price, d.t_volume, d.gamma) {
            (Some(tp), Some(tv), Some(g)) if tp.is_finite() && tv.is_finite() && g.is_finite() => {
                Some(Point {
                    t_price: tp,
                    t_volume: tv,
                    gamma: g,
                })
            }
            _ => None,
        })
        .collect()
}

fn liquid(points: &[Point], cfg: &ReportConfig) -> bool {
    if points.is_empty() {
        return false;
    }
    let mean_tp = points.iter().map(|p| p.t_price).sum::<f64>() / points.len() as f64;
    cfg.max_t_price_secs.is_none_or(|max| mean_tp < max)
}

struct KsRunner {
    mode: KsMode,
    nulls: HashMap<usize, LillieforsNull>,
}

impl KsRunner {
    fn p(&mut self, sample: &[f64]) -> Option<f64> {
        match self.mode {
            KsMode::FixedParams { .. } => ks_normality(sample, self.mode).ok().map(|r| r.p_value),
            KsMode::EstimatedParamsMc { resamples, seed } => {
                if sample.len() < 3 {
                    return None;
                }
                let null = match self.nulls.entry(sample.len()) {
                    std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
                    std::collections::hash_map::Entry::Vacant(e) => {
                        e.insert(LillieforsNull::simulate(sample.len(), resamples, seed).ok()?)
                    }
                };
                ks_with_null(sample, null).ok().map(|r| r.p_value)
            }
        }
    }
}

fn row(label: String, n_total: usize, points: &[Point], ks: &mut KsRunner) -> ReportRow {
    let gammas: Vec<f64> = points.iter().map(|p| p.gamma).collect();
    let tp: Vec<f64> = points.iter().map(|p| p.t_price).collect();
    let tv: Vec<f64> = points.iter().map(|p| p.t_volume).collect();
    let (mean_gamma, std_gamma) = mean_std(&gammas);
    ReportRow {
        label,
        n_total,
        n_used: points.len(),
        mean_t_price: tp.iter().sum::<f64>() / tp.len() as f64,
        mean_gamma,
        std_gamma,
        correlation: pearson(&tp, &tv),
        sw_p: shapiro_wilk(&gammas).ok().map(|r| r.p_value),
        ks_p: ks.p(&gammas),
        t_test_p: one_sample_t_test(&gammas, 1.0).ok().map(|r| r.p_value),
    }
}

/// Builds the report rows after the volume-day and liquidity filters.
/// Grouped rows summarise instrument means; instruments without a group
/// fall into the group of their own symbol.
pub fn invariant_report(
    instruments: &[InstrumentDays],
    cfg: &ReportConfig,
) -> Result<Vec<ReportRow>, StatsError> {
    if instruments.is_empty() {
        return Err(StatsError::EmptyReport);
    }
    if let Some(f) = cfg.min_volume_fraction {
        if !(0.0..=1.0).contains(&f) {
            return Err(StatsError::InvalidConfig(format!(
                "min_volume_fraction {f} outside [0, 1]"
            )));
        }
    }
    let mut ks = KsRunner {
        mode: cfg.ks_mode,
        nulls: HashMap::new(),
    };
    let rows = match cfg.style {
        ReportStyle::PerInstrument => instruments
            .iter()
            .filter_map(|inst| {
                let points = usable_days(inst, cfg);
                liquid(&points, cfg)
                    .then(|| row(inst.symbol.clone(), inst.days.len(), &points, &mut ks))
            })
            .collect::<Vec<_>>(),
        ReportStyle::PerGroup => {
            let mut groups: BTreeMap<String, (usize, Vec<Point>)> = BTreeMap::new();
            for inst in instruments {
                let key = inst.group.clone().unwrap_or_else(|| inst.symbol.clone());
                let entry = groups.entry(key).or_default();
                entry.0 += 1;
                let points = usable_days(inst, cfg);
                if liquid(&points, cfg) {
                    let k = points.len() as f64;
                    entry.1.push(Point {
                        t_price: points.iter().map(|p| p.t_price).sum::<f64>() / k,
                        t_volume: points.iter().map(|p| p.t_volume).sum::<f64>() / k,
                        gamma: points.iter().map(|p| p.gamma).sum::<f64>() / k,
                    });
                }
            }
            groups
                .into_iter()
                .filter(|(_, (_, pts))| !pts.is_empty())
                .map(|(label, (n_total, pts))| row(label, n_total, &pts, &mut ks))
                .collect()
        }
    };
    if rows.is_empty() {
        return Err(StatsError::EmptyReport);
    }
    Ok(rows)
}

pub fn write_report_csv<W: Write>(writer: W, rows: &[ReportRow]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn days(values: &[(f64, f64, f64, f64)]) -> Vec<DayEstimate> {
        values
            .iter()
            .enumerate()
            .map(|(i, &(tp, tv, g, vol))| DayEstimate {
                day: i as i64,
                t_price: Some(tp),
                t_volume: Some(tv),
                gamma: Some(g),
                traded_volume: vol,
            })
            .collect()
    }

    fn inst(symbol: &str, group: Option<&str>, d: Vec<DayEstimate>) -> InstrumentDays {
        InstrumentDays {
            symbol: symbol.into(),
            group: group.map(String::from),
            days: d,
        }
    }

    #[test]
    fn constant_gamma_gives_unit_mean_and_zero_std() {
        let d = days(&[(100.0, 100.0, 1.0, 1e4); 10]);
        let rows = invariant_report(&[inst("A", None, d)], &ReportConfig::default()).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].mean_gamma, 1.0);
        assert_eq!(rows[0].std_gamma, 0.0);
        assert!(rows[0].sw_p.is_none() && rows[0].ks_p.is_none());
    }

    #[test]
    fn identical_times_give_unit_correlation() {
        let d: Vec<_> = (0..12)
            .map(|i| {
                (
                    50.0 + 10.0 * i as f64,
                    50.0 + 10.0 * i as f64,
                    1.0 + 0.01 * i as f64,
                    1e4,
                )
            })
            .collect();
        let rows =
            invariant_report(&[inst("A", None, days(&d))], &ReportConfig::default()).unwrap();
        assert!((rows[0].correlation.unwrap() - 1.0).abs() < 1e-12);
        assert!(rows[0].sw_p.is_some() && rows[0].ks_p.is_some() && rows[0].t_test_p.is_some());
    }

    #[test]
    fn filters_drop_illiquid_instruments_and_thin_days() {
        let liquid_days = days(&[
            (100.0, 110.0, 1.0, 1e4),
            (120.0, 100.0, 1.1, 1e4),
            (90.0, 95.0, 0.9, 1e3),
        ]);
        let illiquid = days(&[(2000.0, 2100.0, 1.0, 1e4); 3]);
        let cfg = ReportConfig::default();
        let rows = invariant_report(
            &[
                inst("A", None, liquid_days),
                inst("B", None, illiquid.clone()),
            ],
            &cfg,
        )
        .unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].label, "A");
        assert_eq!(rows[0].n_total, 3);
        assert_eq!(rows[0].n_used, 2);
        assert!(matches!(
            invariant_report(&[inst("B", None, illiquid)], &cfg),
            Err(StatsError::EmptyReport)
        ));
        assert!(matches!(
            invariant_report(&[], &cfg),
            Err(StatsError::EmptyReport)
        ));
    }

    #[test]
    fn grouped_rows_summarise_instrument_means() {
        let a = inst(
            "A",
            Some("X"),
            days(&[(100.0, 100.0, 1.0, 1e4), (200.0, 200.0, 1.0, 1e4)]),
        );
        let b = inst("B", Some("X"), days(&[(300.0, 330.0, 1.2, 1e4)]));
        let c = inst("C", Some("Y"), days(&[(50.0, 40.0, 0.8, 1e4)]));
        let cfg = ReportConfig {
            style: ReportStyle::PerGroup,
            ..Default::default()
        };
        let rows = invariant_report(&[a, b, c], &cfg).unwrap();
        assert_eq!(
            rows.iter().map(|r| r.label.as_str()).collect::<Vec<_>>(),
            ["X", "Y"]
        );
        assert_eq!(rows[0].n_total, 2);
        assert_eq!(rows[0].n_used, 2);
        assert!((rows[0].mean_t_price - 225.0).abs() < 1e-12);
        assert!((rows[0].mean_gamma - 1.1).abs() < 1e-12);
        assert_eq!(rows[0].correlation, Some(1.0));
    }

    #[test]
    fn undefined_days_are_skipped() {
        let mut d = days(&[(100.0, 100.0, 1.0, 1e4); 4]);
        d[1].gamma = None;
        let rows = invariant_report(&[inst("A", None, d)], &ReportConfig::default()).unwrap();
        assert_eq!(rows[0].n_used, 3);
    }

    #[test]
    fn csv_has_one_row_per_report_row() {
        let d = days(&[(100.0, 100.0, 1.0, 1e4); 3]);
        let rows = invariant_report(&[inst("A", None, d)], &ReportConfig::default()).unwrap();
        let mut buf = Vec::new();
        write_report_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with("label,n_total,n_used,mean_t_price"));
    }
}
