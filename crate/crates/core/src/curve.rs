use serde::{Deserialize, Serialize};

use crate::error::{Result, SurvError};

/// Right-continuous step function on `[0, inf)`.
///
/// `knots[0] == 0` and `values[0]` is the value on `[0, knots[1])`. For
/// survival curves the values start at 1 and never increase; the same type
/// holds nondecreasing cumulative hazards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    knots: Vec<f64>,
    values: Vec<f64>,
}

impl StepFunction {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.is_empty() || knots.len() != values.len() {
            return Err(SurvError::InvalidInput("step function needs matching, nonempty knots and values".into()));
        }
        if knots[0] != 0.0 {
            return Err(SurvError::InvalidInput("first knot must be 0".into()));
        }
        if knots.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SurvError::InvalidInput("knots must be strictly increasing".into()));
        }
        Ok(Self { knots, values })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at `t`; for `t < 0` the value at 0.
    pub fn eval(&self, t: f64) -> f64 {
        let i = self.knots.partition_point(|&k| k <= t);
        self.values[i.saturating_sub(1)]
    }

    /// Left limit `F(t-)`. At or before the first knot this is `values[0]`.
    pub fn left_limit(&self, t: f64) -> f64 {
        let i = self.knots.partition_point(|&k| k < t);
        self.values[i.saturating_sub(1)]
    }

    pub fn eval_many(&self, times: &[f64]) -> Vec<f64> {
        times.iter().map(|&t| self.eval(t)).collect()
    }
}

/// A survival function `S(t)`: starts at 1, nonincreasing, within `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SurvivalCurve(StepFunction);

impl SurvivalCurve {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let f = StepFunction::new(knots, values)?;
        let v = f.values();
        if (v[0] - 1.0).abs() > 1e-12 {
            return Err(SurvError::InvalidInput(format!("survival curve must start at 1, got {}", v[0])));
        }
        if v.iter().any(|p| !(-1e-12..=1.0 + 1e-12).contains(p)) || v.windows(2).any(|w| w[1] > w[0] + 1e-12) {
            return Err(SurvError::InvalidInput("survival values must be nonincreasing probabilities".into()));
        }
        Ok(Self(f))
    }

    /// Constant curve at 1.
    pub fn flat() -> Self {
        Self(StepFunction { knots: vec![0.0], values: vec![1.0] })
    }

    pub fn knots(&self) -> &[f64] {
        self.0.knots()
    }

    pub fn values(&self) -> &[f64] {
        self.0.values()
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.0.eval(t)
    }

    /// `S(t-)`; equals 1 at `t = 0`.
    pub fn left_limit(&self, t: f64) -> f64 {
        self.0.left_limit(t)
    }

    pub fn eval_many(&self, times: &[f64]) -> Vec<f64> {
        self.0.eval_many(times)
    }
}
