//! Synthetic right-censored data with Weibull event times.
//!
//! Covariates: `x1 ~ Exp(rate 0.1)`, `x2 ~ Normal(10, variance 5)`,
//! `x3 ~ Poisson(5)`. The linear score is `-0.5 x1 + 9 x2 + 19 x3`. Event
//! times are Weibull with scale `lambda_coef * risk` and shape `p`;
//! censoring is exponential with a rate tuned to hit a target event rate.

use ndarray::{Array2, ArrayView1};
use rand::Rng;
use rand_distr::{Distribution, Exp, Exp1, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::data::SurvivalDataset;
use crate::error::{Result, SurvError};
use crate::rng;

pub const LINEAR_COEFFICIENTS: [f64; 3] = [-0.5, 9.0, 19.0];
/// Lower bound on risks before they scale the Weibull distribution.
pub const RISK_FLOOR: f64 = 1e-12;
const CALIBRATION_TOLERANCE: f64 = 0.02;
const MAX_BISECTION_STEPS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskKind {
    Linear,
    Square,
    Gaussian,
}

impl RiskKind {
    pub fn default_lambda_coef(self) -> f64 {
        match self {
            RiskKind::Linear => 0.01,
            RiskKind::Square | RiskKind::Gaussian => 0.1,
        }
    }
}

impl std::str::FromStr for RiskKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "linear" => Ok(Self::Linear),
            "square" => Ok(Self::Square),
            "gaussian" => Ok(Self::Gaussian),
            other => Err(format!("unknown risk kind `{other}` (valid: linear, square, gaussian)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub n: usize,
    pub risk: RiskKind,
    #[serde(default = "default_shape")]
    pub weibull_shape: f64,
    /// Defaults to 0.01 for the linear risk and 0.1 otherwise.
    #[serde(default)]
    pub lambda_coef: Option<f64>,
    #[serde(default = "default_event_rate")]
    pub target_event_rate: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_shape() -> f64 {
    2.1
}

fn default_event_rate() -> f64 {
    0.4
}

impl SimConfig {
    pub fn new(n: usize, risk: RiskKind, seed: u64) -> Self {
        Self {
            n,
            risk,
            weibull_shape: default_shape(),
            lambda_coef: None,
            target_event_rate: default_event_rate(),
            seed,
        }
    }

    pub fn lambda_coef(&self) -> f64 {
        self.lambda_coef.unwrap_or_else(|| self.risk.default_lambda_coef())
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(SurvError::Config("n must be at least 1".into()));
        }
        if !(self.weibull_shape > 0.0) || !(self.lambda_coef() > 0.0) {
            return Err(SurvError::Config("weibull_shape and lambda_coef must be positive".into()));
        }
        if !(self.target_event_rate > 0.0 && self.target_event_rate < 1.0) {
            return Err(SurvError::Config("target_event_rate must lie in (0,1)".into()));
        }
        Ok(())
    }
}

pub fn sample_covariates(n: usize, seed: u64) -> Array2<f64> {
    let mut r = rng::stream(seed, "covariates");
    let exp = Exp::new(0.1).expect("positive rate");
    let normal = Normal::new(10.0, 5f64.sqrt()).expect("positive std");
    let poisson = Poisson::new(5.0).expect("positive mean");
    let mut x = Array2::zeros((n, 3));
    for mut row in x.rows_mut() {
        row[0] = exp.sample(&mut r);
        row[1] = normal.sample(&mut r);
        row[2] = poisson.sample(&mut r);
    }
    x
}

pub fn linear_score(x: ArrayView1<'_, f64>) -> f64 {
    x.iter().zip(LINEAR_COEFFICIENTS).map(|(a, b)| a * b).sum()
}

/// Mean and population std of the sample's linear scores. The nonlinear
/// risks are applied to the standardized score `z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskStandardizer {
    pub mean: f64,
    pub std_dev: f64,
}

impl RiskStandardizer {
    pub fn fit(x: &Array2<f64>) -> Self {
        let scores: Vec<f64> = x.rows().into_iter().map(linear_score).collect();
        let n = scores.len() as f64;
        let mean = scores.iter().sum::<f64>() / n;
        let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
        let std_dev = if var > 0.0 { var.sqrt() } else { 1.0 };
        Self { mean, std_dev }
    }
}

/// Risk driving the Weibull scale: the raw linear score, `z^2`, or
/// `exp(-z^2 / 2)`.
pub fn risk_score(x: ArrayView1<'_, f64>, kind: RiskKind, standardizer: &RiskStandardizer) -> f64 {
    let eta = linear_score(x);
    let z = (eta - standardizer.mean) / standardizer.std_dev;
    match kind {
        RiskKind::Linear => eta,
        RiskKind::Square => z * z,
        RiskKind::Gaussian => (-0.5 * z * z).exp(),
    }
}

/// Weibull draw by inversion with scale `lambda`: `lambda * (-ln U)^(1/p)`.
pub fn weibull_from_uniform(lambda: f64, shape: f64, u: f64) -> f64 {
    lambda * (-u.ln()).powf(1.0 / shape)
}

pub fn sample_event_times(risks: &[f64], lambda_coef: f64, shape: f64, seed: u64) -> Vec<f64> {
    let mut r = rng::stream(seed, "event_times");
    risks
        .iter()
        .map(|&risk| {
            // gen() is in [0,1); 1-gen() keeps ln away from 0.
            let u = 1.0 - r.gen::<f64>();
            weibull_from_uniform(lambda_coef * risk.max(RISK_FLOOR), shape, u)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Censored {
    pub times: Vec<f64>,
    pub events: Vec<bool>,
    pub censoring_rate: f64,
    pub event_rate: f64,
}

fn censor_with_rate(event_times: &[f64], unit_draws: &[f64], rate: f64) -> (Vec<f64>, Vec<bool>, f64) {
    let mut events = Vec::with_capacity(event_times.len());
    let times = event_times
        .iter()
        .zip(unit_draws)
        .map(|(&t, &e)| {
            let c = e / rate;
            events.push(t <= c);
            t.min(c)
        })
        .collect();
    let frac = events.iter().filter(|&&e| e).count() as f64 / event_times.len() as f64;
    (times, events, frac)
}

/// Exponential censoring independent of the covariates. The censoring rate
/// is found by bisection on its logarithm so the realized event fraction
/// lands within 0.02 of `target_event_rate`.
pub fn apply_censoring(event_times: &[f64], target_event_rate: f64, seed: u64) -> Result<Censored> {
    if !(target_event_rate > 0.0 && target_event_rate < 1.0) {
        return Err(SurvError::InvalidInput("target event rate must lie in (0,1)".into()));
    }
    if event_times.is_empty() {
        return Err(SurvError::InvalidInput("no event times to censor".into()));
    }
    let mut r = rng::stream(seed, "censoring");
    let unit: Vec<f64> = event_times.iter().map(|_| Exp1.sample(&mut r)).collect();

    // Event fraction decreases in the rate; bracket on a log scale around
    // the typical time.
    let mut sorted = event_times.to_vec();
    sorted.sort_by(f64::total_cmp);
    let scale = sorted[sorted.len() / 2].max(f64::MIN_POSITIVE);
    let (mut lo, mut hi) = ((1e-12 / scale).ln(), (1e12 / scale).ln());
    let n = event_times.len() as f64;
    let mut best: Option<(f64, f64)> = None;
    for _ in 0..MAX_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let (_, _, frac) = censor_with_rate(event_times, &unit, mid.exp());
        let gap = (frac - target_event_rate).abs();
        if best.map_or(true, |(g, _)| gap < g) {
            best = Some((gap, mid));
        }
        if gap <= 0.5 / n {
            break;
        }
        if frac > target_event_rate {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (_, log_rate) = best.expect("at least one bisection step");
    let rate = log_rate.exp();
    let (times, events, frac) = censor_with_rate(event_times, &unit, rate);
    if (frac - target_event_rate).abs() > CALIBRATION_TOLERANCE {
        return Err(SurvError::Calibration { achieved: frac, target: target_event_rate });
    }
    Ok(Censored { times, events, censoring_rate: rate, event_rate: frac })
}

pub fn generate(config: &SimConfig) -> Result<SurvivalDataset> {
    config.validate()?;
    let x = sample_covariates(config.n, config.seed);
    let standardizer = RiskStandardizer::fit(&x);
    let risks: Vec<f64> = x.rows().into_iter().map(|r| risk_score(r, config.risk, &standardizer)).collect();
    let event_times = sample_event_times(&risks, config.lambda_coef(), config.weibull_shape, config.seed);
    let censored = apply_censoring(&event_times, config.target_event_rate, config.seed)?;
    SurvivalDataset::new(
        x,
        censored.times,
        censored.events,
        vec!["x1".into(), "x2".into(), "x3".into()],
    )
}
