//! Zero-mean GARCH(1,1) with Gaussian quasi-maximum likelihood.
//!
//! ```text
//! r_t = √h_t · z_t,   h_{t+1} = ω + α r_t² + β h_t
//! ```

use serde::{Deserialize, Serialize};

use super::optim::{nelder_mead, NelderMeadOptions};
use super::BaselineError;

pub const MIN_OBSERVATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GarchModel {
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
    pub loglik: f64,
    /// Conditional variance of the first observation.
    pub h0: f64,
    pub iterations: usize,
    /// Best log-likelihood after each optimiser iteration.
    #[serde(skip)]
    pub loglik_trace: Vec<f64>,
}

impl GarchModel {
    pub fn persistence(&self) -> f64 {
        self.alpha + self.beta
    }

    pub fn unconditional_variance(&self) -> f64 {
        self.omega / (1.0 - self.persistence())
    }

    /// Conditional variances `h_1 ..= h_{n+1}`; the last entry is the
    /// forecast for the observation after `returns`.
    pub fn filter(&self, returns: &[f64]) -> Vec<f64> {
        let mut h = Vec::with_capacity(returns.len() + 1);
        h.push(self.h0);
        for &r in returns {
            let prev = *h.last().expect("non-empty");
            h.push(garch_forecast_one_step(self, r, prev));
        }
        h
    }
}

/// `ω + α r_t² + β h_t`.
pub fn garch_forecast_one_step(model: &GarchModel, r_t: f64, h_t: f64) -> f64 {
    model.omega + model.alpha * r_t * r_t + model.beta * h_t
}

fn log_likelihood(returns: &[f64], omega: f64, alpha: f64, beta: f64, h0: f64) -> f64 {
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();
    let mut h = h0;
    let mut ll = 0.0;
    for &r in returns {
        if !(h > 0.0) {
            return f64::NEG_INFINITY;
        }
        ll -= 0.5 * (ln_2pi + h.ln() + r * r / h);
        h = omega + alpha * r * r + beta * h;
    }
    ll
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Unconstrained coordinates: `ln ω`, logit of the persistence `α + β`,
/// and logit of the share `α / (α + β)`.
fn params(theta: &[f64]) -> (f64, f64, f64) {
    let omega = theta[0].exp();
    let persistence = sigmoid(theta[1]);
    let share = sigmoid(theta[2]);
    (omega, persistence * share, persistence * (1.0 - share))
}

/// Fits `(ω, α, β)` by Gaussian QMLE, starting from variance targeting
/// (`α = 0.05`, `β = 0.90`, `ω = var·(1 − α − β)`) with `h0` set to the
/// sample second moment.
pub fn fit_garch11(returns: &[f64]) -> Result<GarchModel, BaselineError> {
    if returns.len() < MIN_OBSERVATIONS {
        return Err(BaselineError::TooFewObservations {
            n: returns.len(),
            min: MIN_OBSERVATIONS,
        });
    }
    if returns.iter().any(|r| !r.is_finite()) {
        return Err(BaselineError::NonFinite);
    }
    let var = returns.iter().map(|r| r * r).sum::<f64>() / returns.len() as f64;
    if !(var > 0.0) {
        return Err(BaselineError::ZeroVariance);
    }
    let (alpha0, beta0) = (0.05, 0.90);
    let theta0 = [
        (var * (1.0 - alpha0 - beta0)).ln(),
        logit(alpha0 + beta0),
        logit(alpha0 / (alpha0 + beta0)),
    ];
    let objective = |theta: &[f64]| {
        let (omega, alpha, beta) = params(theta);
        -log_likelihood(returns, omega, alpha, beta, var)
    };

    // Restart from the incumbent until a fresh simplex stops improving.
    let opts = NelderMeadOptions::default();
    let mut theta = theta0.to_vec();
    let mut best = f64::INFINITY;
    let mut iterations = 0;
    let mut trace: Vec<f64> = Vec::new();
    let converged = loop {
        let budget = opts.max_iter.saturating_sub(iterations);
        let run = nelder_mead(
            &objective,
            &theta,
            &NelderMeadOptions {
                max_iter: budget,
                ..opts
            },
        );
        iterations += run.iterations;
        trace.extend(run.trace.iter().map(|f| -f));
        let improvement = best - run.f;
        if run.f < best {
            theta = run.x;
            best = run.f;
        }
        if !run.converged {
            break false;
        }
        if improvement < opts.f_tol {
            break true;
        }
    };

    let (omega, alpha, beta) = params(&theta);
    let model = GarchModel {
        omega,
        alpha,
        beta,
        loglik: -best,
        h0: var,
        iterations,
        loglik_trace: trace,
    };
    if converged {
        Ok(model)
    } else {
        Err(BaselineError::NonConvergence {
            iterations,
            best: Box::new(model),
        })
    }
}

/// Expanding-window one-step-ahead variance forecasts: entry `t` uses a
/// model fitted on `returns[..t]` and is `None` while fewer than
/// `min_obs` returns are available.
pub fn rolling_garch_forecasts(
    returns: &[f64],
    min_obs: usize,
) -> Result<Vec<Option<f64>>, BaselineError> {
    let min_obs = min_obs.max(MIN_OBSERVATIONS);
    if returns.len() <= min_obs {
        return Err(BaselineError::TooFewObservations {
            n: returns.len(),
            min: min_obs + 1,
        });
    }
    (0..returns.len())
        .map(|t| {
            if t < min_obs {
                return Ok(None);
            }
            let history = &returns[..t];
            let model = match fit_garch11(history) {
                Ok(m) => m,
                Err(BaselineError::NonConvergence { best, .. }) => *best,
                Err(e) => return Err(e),
            };
            Ok(model.filter(history).last().copied())
        })
        .collect()
}
