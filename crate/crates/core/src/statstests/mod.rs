//! Normality tests, correlation and summary statistics for samples of the
//! invariant γ, and the per-instrument / per-group invariant report.

mod ks;
mod report;
mod shapiro;

pub use ks::{kolmogorov_q, ks_normality, ks_with_null, KsMode, LillieforsNull};
pub use report::{
    invariant_report, write_report_csv, DayEstimate, InstrumentDays, ReportConfig, ReportRow,
    ReportStyle,
};
pub use shapiro::shapiro_wilk;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

pub const ALPHA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("sample size {n} outside {min}..={max}")]
    SampleSize { n: usize, min: usize, max: usize },
    #[error("sample has zero variance")]
    ZeroVariance,
    #[error("sample contains non-finite values")]
    NonFinite,
    #[error("no instrument survived the report filters")]
    EmptyReport,
    #[error("{0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    ShapiroWilk,
    KolmogorovSmirnov,
    LillieforsMc,
    /// One-sample Student t test of a hypothesised mean.
    StudentT,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub statistic: f64,
    pub p_value: f64,
    pub method: TestMethod,
    pub reject_at_005: bool,
}

impl TestReport {
    pub fn new(statistic: f64, p_value: f64, method: TestMethod) -> Self {
        let p_value = p_value.clamp(0.0, 1.0);
        Self {
            statistic,
            p_value,
            method,
            reject_at_005: p_value < ALPHA,
        }
    }
}

fn check_sample(sample: &[f64]) -> Result<(), StatsError> {
    if sample.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(StatsError::NonFinite)
    }
}

/// Mean and sample standard deviation (n − 1 denominator).
pub fn mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (mean, 0.0);
    }
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Summary of a γ sample, one value per day or per instrument.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaSample {
    pub values: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl GammaSample {
    pub fn new(values: Vec<f64>) -> Result<Self, StatsError> {
        if values.is_empty() {
            return Err(StatsError::SampleSize {
                n: 0,
                min: 1,
                max: usize::MAX,
            });
        }
        check_sample(&values)?;
        let (mean, std) = mean_std(&values);
        Ok(Self {
            n: values.len(),
            mean,
            std,
            values,
        })
    }
}

/// Pearson correlation; `None` when either series is constant or the
/// lengths differ or are below two.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if !(sxx > 0.0 && syy > 0.0) {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Two-sided one-sample t test of `mean == mu0`.
pub fn one_sample_t_test(sample: &[f64], mu0: f64) -> Result<TestReport, StatsError> {
    if sample.len() < 2 {
        return Err(StatsError::SampleSize {
            n: sample.len(),
            min: 2,
            max: usize::MAX,
        });
    }
    check_sample(sample)?;
    let (mean, std) = mean_std(sample);
    if !(std > 0.0) {
        return Err(StatsError::ZeroVariance);
    }
    let n = sample.len() as f64;
    let t = (mean - mu0) / (std / n.sqrt());
    let dist =
        StudentsT::new(0.0, 1.0, n - 1.0).map_err(|e| StatsError::InvalidConfig(e.to_string()))?;
    let p = 2.0 * (1.0 - dist.cdf(t.abs()));
    Ok(TestReport::new(t, p, TestMethod::StudentT))
}
