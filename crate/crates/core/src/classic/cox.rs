//! Cox proportional hazards with Efron or Breslow handling of tied event
//! times, fitted by Newton-Raphson, plus the Breslow baseline hazard.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::curve::{StepFunction, SurvivalCurve};
use crate::data::{Scaler, SurvivalDataset};
use crate::error::{Result, SurvError};
use crate::model::SurvivalModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Ties {
    #[default]
    Efron,
    Breslow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoxConfig {
    pub ties: Ties,
    pub max_iter: usize,
    pub tol: f64,
    /// L2 penalty `ridge/2 * |beta|^2` subtracted from the log partial
    /// likelihood (adds `ridge` to the information diagonal).
    pub ridge: f64,
}

impl Default for CoxConfig {
    fn default() -> Self {
        Self { ties: Ties::Efron, max_iter: 100, tol: 1e-9, ridge: 0.0 }
    }
}

/// Log partial likelihood with its gradient and Hessian (p x p, row-major).
#[derive(Debug, Clone)]
pub struct PartialLikelihood {
    pub log_lik: f64,
    pub gradient: Vec<f64>,
    pub hessian: Vec<f64>,
}

/// Distinct event-time groups, walked from the latest time to the earliest.
fn descending_order(times: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[b].total_cmp(&times[a]));
    order
}

pub fn partial_likelihood(
    x: &Array2<f64>,
    times: &[f64],
    events: &[bool],
    beta: &[f64],
    ties: Ties,
) -> PartialLikelihood {
    let (n, p) = x.dim();
    let eta: Vec<f64> = (0..n).map(|i| x.row(i).iter().zip(beta).map(|(a, b)| a * b).sum()).collect();
    let shift = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max).max(0.0);
    let w: Vec<f64> = eta.iter().map(|e| (e - shift).exp()).collect();

    let mut log_lik = 0.0;
    let mut grad = vec![0.0; p];
    let mut hess = vec![0.0; p * p];

    let mut r0 = 0.0;
    let mut r1 = vec![0.0; p];
    let mut r2 = vec![0.0; p * p];
    let mut d1 = vec![0.0; p];
    let mut d2 = vec![0.0; p * p];
    let mut num1 = vec![0.0; p];

    let order = descending_order(times);
    let mut i = 0;
    while i < n {
        let t = times[order[i]];
        let start = i;
        while i < n && times[order[i]] == t {
            let k = order[i];
            let xk = x.row(k);
            r0 += w[k];
            for a in 0..p {
                r1[a] += w[k] * xk[a];
                for b in 0..p {
                    r2[a * p + b] += w[k] * xk[a] * xk[b];
                }
            }
            i += 1;
        }
        let group = &order[start..i];
        let deaths = group.iter().filter(|&&k| events[k]).count();
        if deaths == 0 {
            continue;
        }
        let mut d0 = 0.0;
        d1.iter_mut().for_each(|v| *v = 0.0);
        d2.iter_mut().for_each(|v| *v = 0.0);
        for &k in group.iter().filter(|&&k| events[k]) {
            let xk = x.row(k);
            log_lik += eta[k];
            d0 += w[k];
            for a in 0..p {
                grad[a] += xk[a];
                d1[a] += w[k] * xk[a];
                for b in 0..p {
                    d2[a * p + b] += w[k] * xk[a] * xk[b];
                }
            }
        }
        let m = deaths as f64;
        for l in 0..deaths {
            let frac = match ties {
                Ties::Efron => l as f64 / m,
                Ties::Breslow => 0.0,
            };
            let den = r0 - frac * d0;
            log_lik -= den.ln() + shift;
            for a in 0..p {
                num1[a] = r1[a] - frac * d1[a];
                grad[a] -= num1[a] / den;
            }
            for a in 0..p {
                for b in 0..p {
                    let num2 = r2[a * p + b] - frac * d2[a * p + b];
                    hess[a * p + b] -= num2 / den - num1[a] * num1[b] / (den * den);
                }
            }
        }
    }
    PartialLikelihood { log_lik, gradient: grad, hessian: hess }
}

/// Breslow estimate of the baseline cumulative hazard,
/// `Lambda_0(t) = sum_{t_j <= t} d_j / sum_{k in R(t_j)} exp(x_k . beta)`.
pub fn breslow_baseline(x: &Array2<f64>, times: &[f64], events: &[bool], beta: &[f64]) -> StepFunction {
    let n = times.len();
    let risk: Vec<f64> = (0..n).map(|i| x.row(i).iter().zip(beta).map(|(a, b)| a * b).sum::<f64>().exp()).collect();
    let order = descending_order(times);
    let mut increments = Vec::new();
    let mut r0 = 0.0;
    let mut i = 0;
    while i < n {
        let t = times[order[i]];
        let mut deaths = 0usize;
        while i < n && times[order[i]] == t {
            r0 += risk[order[i]];
            deaths += usize::from(events[order[i]]);
            i += 1;
        }
        if deaths > 0 {
            increments.push((t, deaths as f64 / r0));
        }
    }
    increments.reverse();
    let mut knots = vec![0.0];
    let mut values = vec![0.0];
    let mut cum = 0.0;
    for (t, dh) in increments {
        cum += dh;
        if t == 0.0 {
            values[0] = cum;
        } else {
            knots.push(t);
            values.push(cum);
        }
    }
    StepFunction::new(knots, values).expect("event times are distinct and positive")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxModel {
    /// Coefficients on the standardized features.
    pub beta: Vec<f64>,
    pub baseline_cumhaz: StepFunction,
    pub scaler: Scaler,
    pub ties: Ties,
    pub log_likelihood: f64,
    pub iterations: usize,
}

fn penalized(pl: &mut PartialLikelihood, beta: &[f64], ridge: f64) {
    let p = beta.len();
    if ridge == 0.0 {
        return;
    }
    pl.log_lik -= 0.5 * ridge * beta.iter().map(|b| b * b).sum::<f64>();
    for a in 0..p {
        pl.gradient[a] -= ridge * beta[a];
        pl.hessian[a * p + a] -= ridge;
    }
}

pub fn coxph_fit(dataset: &SurvivalDataset, config: &CoxConfig) -> Result<CoxModel> {
    dataset.require_events()?;
    let scaler = Scaler::fit(&dataset.features);
    let x = scaler.transform(&dataset.features);
    let (n, p) = x.dim();
    let (times, events) = (&dataset.times, &dataset.events);

    let eval = |beta: &[f64]| {
        let mut pl = partial_likelihood(&x, times, events, beta, config.ties);
        penalized(&mut pl, beta, config.ridge);
        pl
    };

    let mut beta = vec![0.0; p];
    let mut current = eval(&beta);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < config.max_iter {
        let max_score = current.gradient.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if max_score / n as f64 <= config.tol {
            converged = true;
            break;
        }
        iterations += 1;
        let info = DMatrix::from_row_slice(p, p, &current.hessian).map(|v| -v);
        let chol = info.cholesky().ok_or(SurvError::SingularHessian)?;
        let step = chol.solve(&DVector::from_column_slice(&current.gradient));

        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let candidate: Vec<f64> = beta.iter().zip(step.iter()).map(|(b, s)| b + scale * s).collect();
            let next = eval(&candidate);
            if next.log_lik.is_finite() && next.log_lik >= current.log_lik {
                accepted = Some((candidate, next));
                break;
            }
            scale *= 0.5;
        }
        let Some((candidate, next)) = accepted else {
            // No ascent direction left at machine precision.
            converged = true;
            break;
        };
        let rel = (next.log_lik - current.log_lik).abs() / current.log_lik.abs().max(1e-300);
        beta = candidate;
        current = next;
        if rel < config.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        let gradient_norm = current.gradient.iter().map(|g| g * g).sum::<f64>().sqrt();
        return Err(SurvError::NotConverged { iterations, gradient_norm, beta });
    }
    let baseline_cumhaz = breslow_baseline(&x, times, events, &beta);
    Ok(CoxModel {
        beta,
        baseline_cumhaz,
        scaler,
        ties: config.ties,
        log_likelihood: current.log_lik,
        iterations,
    })
}

impl CoxModel {
    /// Linear predictor `x_std . beta`.
    pub fn linear_predictor(&self, x: ArrayView1<'_, f64>) -> f64 {
        self.scaler.transform_row(x).iter().zip(&self.beta).map(|(a, b)| a * b).sum()
    }
}

impl SurvivalModel for CoxModel {
    fn num_features(&self) -> usize {
        self.beta.len()
    }

    fn risk(&self, x: ArrayView1<'_, f64>) -> f64 {
        self.linear_predictor(x)
    }

    /// `S(t | x) = exp(-Lambda_0(t) * exp(x_std . beta))` at the baseline knots.
    fn survival_curve(&self, x: ArrayView1<'_, f64>) -> SurvivalCurve {
        let rel = self.linear_predictor(x).exp();
        // A zero hazard stays at survival 1 even when `rel` overflows.
        let values = self.baseline_cumhaz.values().iter().map(|&h| if h == 0.0 { 1.0 } else { (-h * rel).exp() }).collect();
        SurvivalCurve::new(self.baseline_cumhaz.knots().to_vec(), values)
            .expect("baseline hazard is nondecreasing from 0")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    fn dataset(x: Array2<f64>, times: Vec<f64>, events: Vec<bool>) -> SurvivalDataset {
        let names = (0..x.ncols()).map(|j| format!("x{j}")).collect();
        SurvivalDataset::new(x, times, events, names).unwrap()
    }

    #[test]
    fn zero_column_with_ridge_has_zero_coefficient() {
        let x = array![[0.0, 1.0], [0.0, -0.5], [0.0, 2.0], [0.0, 0.3], [0.0, -1.0]];
        let d = dataset(x, vec![1.0, 4.0, 2.0, 5.0, 3.0], vec![true, true, false, true, true]);
        let cfg = CoxConfig { ridge: 1e-8, ..Default::default() };
        let m = coxph_fit(&d, &cfg).unwrap();
        assert_eq!(m.beta[0], 0.0);

        let err = coxph_fit(&d, &CoxConfig::default()).unwrap_err();
        assert!(matches!(err, SurvError::SingularHessian), "{err}");
    }

    #[test]
    fn efron_equals_breslow_without_ties() {
        let x = array![[0.5, 1.0], [1.5, -0.5], [-0.2, 2.0], [0.0, 0.3], [1.0, -1.0], [2.0, 0.1]];
        let times = vec![1.0, 4.0, 2.0, 5.0, 3.0, 6.0];
        let events = vec![true, true, false, true, true, true];
        let d = dataset(x, times, events);
        let e = coxph_fit(&d, &CoxConfig { ties: Ties::Efron, ..Default::default() }).unwrap();
        let b = coxph_fit(&d, &CoxConfig { ties: Ties::Breslow, ..Default::default() }).unwrap();
        for (a, c) in e.beta.iter().zip(&b.beta) {
            assert!((a - c).abs() < 1e-10, "{a} vs {c}");
        }
    }

    #[test]
    fn ties_change_the_likelihood() {
        let x = array![[1.0], [0.0], [2.0], [0.5]];
        let times = [1.0, 1.0, 2.0, 2.0];
        let events = [true, true, true, false];
        let e = partial_likelihood(&x, &times, &events, &[0.3], Ties::Efron);
        let b = partial_likelihood(&x, &times, &events, &[0.3], Ties::Breslow);
        assert!(e.log_lik > b.log_lik);
    }

    #[test]
    fn zero_relative_risk_gives_baseline_survival() {
        let x = array![[1.0], [-1.0], [0.5], [-0.5]];
        let d = dataset(x, vec![1.0, 2.0, 3.0, 4.0], vec![true, true, true, false]);
        let m = coxph_fit(&d, &CoxConfig::default()).unwrap();
        // The column mean maps to x_std = 0.
        let at_mean = array![0.0];
        let curve = m.survival_curve(at_mean.view());
        for (&t, &s) in curve.knots().iter().zip(curve.values()) {
            assert!((s - (-m.baseline_cumhaz.eval(t)).exp()).abs() < 1e-15);
        }
        assert_eq!(curve.eval(0.5), 1.0);
        assert!(curve.values().windows(2).all(|w| w[1] <= w[0]));
    }
}
