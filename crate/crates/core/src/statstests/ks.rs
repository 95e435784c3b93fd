//! One-sample Kolmogorov-Smirnov test against a normal distribution, with
//! either known parameters or a Monte-Carlo (Lilliefors) null for
//! parameters fitted to the sample.

use libm::erfc;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_sample, mean_std, StatsError, TestMethod, TestReport};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum KsMode {
    FixedParams { mean: f64, std: f64 },
    EstimatedParamsMc { resamples: usize, seed: u64 },
}

impl Default for KsMode {
    fn default() -> Self {
        KsMode::EstimatedParamsMc {
            resamples: 2000,
            seed: 0,
        }
    }
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Largest distance between the empirical CDF and `N(mean, std²)`.
/// Sorts `sample` in place.
fn ks_distance(sample: &mut [f64], mean: f64, std: f64) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = std_normal_cdf((x - mean) / std);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Kolmogorov distribution upper tail `Q(λ) = P(K > λ)`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        let pi2 = std::f64::consts::PI.powi(2);
        let y = (-pi2 / (8.0 * lambda * lambda)).exp();
        let sum: f64 = (0..20).map(|j| y.powi((2 * j + 1) * (2 * j + 1))).sum();
        let cdf = (2.0 * std::f64::consts::PI).sqrt() / lambda * sum;
        (1.0 - cdf).clamp(0.0, 1.0)
    } else {
        let x = (-2.0 * lambda * lambda).exp();
        let sum = (1..=20).fold(0.0, |acc, j| {
            let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
            acc + sign * x.powi(j * j)
        });
        (2.0 * sum).clamp(0.0, 1.0)
    }
}

fn asymptotic_p(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    kolmogorov_q((sn + 0.12 + 0.11 / sn) * d)
}

/// Sorted null distribution of the fitted-parameter KS distance for a
/// sample size. Reusable across samples of the same size.
#[derive(Debug, Clone)]
pub struct LillieforsNull {
    pub n: usize,
    stats: Vec<f64>,
}

impl LillieforsNull {
    /// Each replicate draws from its own ChaCha stream, so the table does
    /// not depend on thread scheduling.
    pub fn simulate(n: usize, resamples: usize, seed: u64) -> Result<Self, StatsError> {
        if n < 3 {
            return Err(StatsError::SampleSize {
                n,
                min: 3,
                max: usize::MAX,
            });
        }
        if resamples == 0 {
            return Err(StatsError::InvalidConfig(
                "resamples must be positive".into(),
            ));
        }
        let mut stats: Vec<f64> = (0..resamples)
            .into_par_iter()
            .map(|b| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(b as u64);
                let mut x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
                let (m, s) = mean_std(&x);
                ks_distance(&mut x, m, s)
            })
            .collect();
        stats.sort_by(f64::total_cmp);
        Ok(Self { n, stats })
    }

    pub fn resamples(&self) -> usize {
        self.stats.len()
    }

    /// `(1 + #{D_b ≥ d}) / (B + 1)`.
    pub fn p_value(&self, d: f64) -> f64 {
        let below = self.stats.partition_point(|&s| s < d);
        (1 + self.stats.len() - below) as f64 / (self.stats.len() + 1) as f64
    }
}

pub fn ks_normality(sample: &[f64], mode: KsMode) -> Result<TestReport, StatsError> {
    match mode {
        KsMode::FixedParams { mean, std } => {
            check_sample_size(sample)?;
            check_sample(sample)?;
            if !(std > 0.0 && std.is_finite() && mean.is_finite()) {
                return Err(StatsError::InvalidConfig(format!(
                    "reference N({mean}, {std}²) is invalid"
                )));
            }
            if sample.iter().all(|&x| x == sample[0]) {
                return Err(StatsError::ZeroVariance);
            }
            let d = ks_distance(&mut sample.to_vec(), mean, std);
            Ok(TestReport::new(
                d,
                asymptotic_p(d, sample.len()),
                TestMethod::KolmogorovSmirnov,
            ))
        }
        KsMode::EstimatedParamsMc { resamples, seed } => {
            check_sample_size(sample)?;
            let null = LillieforsNull::simulate(sample.len(), resamples, seed)?;
            ks_with_null(sample, &null)
        }
    }
}

/// Fitted-parameter KS test against a precomputed null table.
pub fn ks_with_null(sample: &[f64], null: &LillieforsNull) -> Result<TestReport, StatsError> {
    check_sample_size(sample)?;
    check_sample(sample)?;
    if sample.len() != null.n {
        return Err(StatsError::InvalidConfig(format!(
            "null table is for n={}, sample has n={}",
            null.n,
            sample.len()
        )));
    }
    let (m, s) = mean_std(sample);
    if !(s > 0.0) {
        return Err(StatsError::ZeroVariance);
    }
    let d = ks_distance(&mut sample.to_vec(), m, s);
    Ok(TestReport::new(
        d,
        null.p_value(d),
        TestMethod::LillieforsMc,
    ))
}

fn check_sample_size(sample: &[f64]) -> Result<(), StatsError> {
    if sample.len() < 3 {
        return Err(StatsError::SampleSize {
            n: sample.len(),
            min: 3,
            max: usize::MAX,
        });
    }
    Ok(())
}
