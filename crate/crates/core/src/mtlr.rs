//! Linear multi-task logistic regression.
//!
//! With K finite boundaries there are K+1 intervals and K logistic tasks.
//! Task `j` has logit `u_j = x . theta_j + b_j`; the score of interval `s` is
//! the tail sum `sum_{j >= s} u_j` (zero for the last interval) and the
//! interval density is the softmax of the scores. The likelihood head below
//! works on any logit vector so the neural model reuses it unchanged.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::curve::SurvivalCurve;
use crate::data::{encode_targets, EncodedTargets, Scaler, SurvivalDataset, TimeGrid};
use crate::error::{Result, SurvError};
use crate::model::SurvivalModel;
use crate::net::optim::{OptimizerConfig, OptimizerKind, OptimizerState};

/// Interval scores from task logits: `score[s] = sum_{j >= s} u[j]`, length
/// `u.len() + 1`.
pub fn tail_scores(logits: &[f64]) -> Vec<f64> {
    let k = logits.len();
    let mut scores = vec![0.0; k + 1];
    for s in (0..k).rev() {
        scores[s] = scores[s + 1] + logits[s];
    }
    scores
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Softmax of the tail scores: the probability of each of the K+1 intervals.
pub fn density_from_logits(logits: &[f64]) -> Vec<f64> {
    let scores = tail_scores(logits);
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut dens: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = dens.iter().sum();
    dens.iter_mut().for_each(|d| *d /= z);
    dens
}

/// `S(tau_0) ... S(tau_K)` where `S(tau_{s-1}) = sum_{k >= s} f(k)` and
/// `S(tau_0) = 1`.
pub fn boundary_survival(density: &[f64]) -> Vec<f64> {
    let mut surv = vec![0.0; density.len()];
    let mut acc = 0.0;
    for s in (0..density.len()).rev() {
        acc += density[s];
        surv[s] = acc;
    }
    surv[0] = 1.0;
    surv
}

/// Step survival curve with knots `0, tau_1, ..., tau_K`; constant at the last
/// interval's mass beyond `tau_K`.
pub fn survival_curve_from_density(grid: &TimeGrid, density: &[f64]) -> SurvivalCurve {
    let mut knots = Vec::with_capacity(density.len());
    knots.push(0.0);
    knots.extend_from_slice(grid.boundaries());
    let values = boundary_survival(density).into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
    SurvivalCurve::new(knots, values).expect("tail sums are nonincreasing probabilities")
}

/// Risk score `-sum_{j=1}^{K} S(tau_j)`.
pub fn risk_from_density(density: &[f64]) -> f64 {
    -boundary_survival(density)[1..].iter().sum::<f64>()
}

/// Negative log-likelihood of one observation and its gradient with respect
/// to the task logits. An event in interval `s` contributes `-log f(s)`; a
/// censoring in interval `s` contributes `-log sum_{k >= s} f(k)`.
pub fn sample_loss_and_grad(logits: &[f64], interval: usize, is_event: bool, grad: &mut [f64]) -> f64 {
    let k = logits.len();
    debug_assert!(interval <= k);
    let scores = tail_scores(logits);
    let log_z = log_sum_exp(&scores);
    let (loss, log_num) = if is_event {
        (log_z - scores[interval], scores[interval])
    } else {
        let l = log_sum_exp(&scores[interval..]);
        (log_z - l, l)
    };
    // d score(s) / d u_j = 1[s <= j], so the gradient is a difference of
    // cumulative distributions: CDF_f(j) - CDF_target(j).
    let mut cdf_model = 0.0;
    let mut cdf_target = 0.0;
    for j in 0..k {
        cdf_model += (scores[j] - log_z).exp();
        if is_event {
            if j >= interval {
                cdf_target = 1.0;
            }
        } else if j >= interval {
            cdf_target += (scores[j] - log_num).exp();
        }
        grad[j] = cdf_model - cdf_target;
    }
    loss
}

/// Sum of per-row losses and the N x K logit gradient (unscaled).
pub(crate) fn head_loss_and_grad(logits: &Array2<f64>, targets: &EncodedTargets, rows: &[usize]) -> (f64, Array2<f64>) {
    let k = logits.ncols();
    let mut grad = Array2::zeros((rows.len(), k));
    let mut total = 0.0;
    let mut buf = vec![0.0; k];
    for (r, &i) in rows.iter().enumerate() {
        let u = logits.row(r);
        let u = u.as_slice().map(<[f64]>::to_vec).unwrap_or_else(|| u.to_vec());
        total += sample_loss_and_grad(&u, targets.interval[i], targets.is_event[i], &mut buf);
        grad.row_mut(r).assign(&ArrayView1::from(&buf[..]));
    }
    (total, grad)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MtlrParameters {
    /// p x K, one column per finite boundary.
    pub theta: Array2<f64>,
    pub bias: Array1<f64>,
}

impl MtlrParameters {
    pub fn zeros(p: usize, k: usize) -> Self {
        Self { theta: Array2::zeros((p, k)), bias: Array1::zeros(k) }
    }

    pub fn num_features(&self) -> usize {
        self.theta.nrows()
    }

    pub fn num_boundaries(&self) -> usize {
        self.bias.len()
    }

    pub fn logits(&self, x_std: &[f64]) -> Vec<f64> {
        let x = ArrayView1::from(x_std);
        (x.dot(&self.theta) + &self.bias).to_vec()
    }

    /// Scores of the K+1 intervals for a standardized input.
    pub fn interval_scores(&self, x_std: &[f64]) -> Vec<f64> {
        tail_scores(&self.logits(x_std))
    }

    pub fn density(&self, x_std: &[f64]) -> Vec<f64> {
        density_from_logits(&self.logits(x_std))
    }

    fn batch_logits(&self, x_std: &Array2<f64>) -> Array2<f64> {
        x_std.dot(&self.theta) + &self.bias
    }

    fn norm(&self) -> f64 {
        (self.theta.iter().chain(self.bias.iter()).map(|v| v * v).sum::<f64>()).sqrt()
    }
}

/// Mean negative log-likelihood plus `reg/2 * |theta|_F^2` (biases are not
/// penalized).
pub fn neg_log_likelihood(params: &MtlrParameters, targets: &EncodedTargets, x_std: &Array2<f64>, reg_strength: f64) -> f64 {
    let rows: Vec<usize> = (0..targets.len()).collect();
    let (total, _) = head_loss_and_grad(&params.batch_logits(x_std), targets, &rows);
    total / rows.len() as f64 + 0.5 * reg_strength * params.theta.iter().map(|t| t * t).sum::<f64>()
}

pub fn loss_and_gradient(
    params: &MtlrParameters,
    targets: &EncodedTargets,
    x_std: &Array2<f64>,
    reg_strength: f64,
) -> (f64, MtlrParameters) {
    let n = targets.len();
    let rows: Vec<usize> = (0..n).collect();
    let (total, dlogits) = head_loss_and_grad(&params.batch_logits(x_std), targets, &rows);
    let scale = 1.0 / n as f64;
    let theta = x_std.t().dot(&dlogits) * scale + &params.theta * reg_strength;
    let bias = dlogits.sum_axis(Axis(0)) * scale;
    let loss = total * scale + 0.5 * reg_strength * params.theta.iter().map(|t| t * t).sum::<f64>();
    (loss, MtlrParameters { theta, bias })
}

pub fn gradient(params: &MtlrParameters, targets: &EncodedTargets, x_std: &Array2<f64>, reg_strength: f64) -> MtlrParameters {
    loss_and_gradient(params, targets, x_std, reg_strength).1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MtlrConfig {
    pub reg_strength: f64,
    pub optimizer: OptimizerConfig,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for MtlrConfig {
    fn default() -> Self {
        Self {
            reg_strength: 1e-2,
            optimizer: OptimizerConfig::new(OptimizerKind::Adam, 1e-2),
            max_iter: 2000,
            tol: 1e-7,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MtlrModel {
    pub params: MtlrParameters,
    pub grid: TimeGrid,
    pub scaler: Scaler,
    pub reg_strength: f64,
    pub final_loss: f64,
    pub iterations: usize,
}

const PLATEAU_WINDOW: usize = 10;

/// Full-batch first-order minimization of the penalized likelihood, starting
/// from zero parameters. Stops once the relative loss change stays below
/// `tol` for 10 consecutive iterations.
pub fn mtlr_fit(dataset: &SurvivalDataset, grid: &TimeGrid, config: &MtlrConfig) -> Result<MtlrModel> {
    dataset.require_events()?;
    let scaler = Scaler::fit(&dataset.features);
    let x = scaler.transform(&dataset.features);
    let targets = encode_targets(dataset, grid)?;
    let mut params = MtlrParameters::zeros(dataset.num_features(), grid.num_boundaries());
    let mut opt = OptimizerState::new(config.optimizer.clone());

    let mut prev = f64::INFINITY;
    let mut quiet = 0;
    let mut loss = f64::INFINITY;
    let mut iterations = 0;
    while iterations < config.max_iter {
        let (l, grad) = loss_and_gradient(&params, &targets, &x, config.reg_strength);
        if !l.is_finite() {
            return Err(SurvError::NonFiniteLoss { iteration: iterations, param_norm: params.norm() });
        }
        loss = l;
        let rel = (prev - l).abs() / l.abs().max(1e-12);
        quiet = if rel < config.tol { quiet + 1 } else { 0 };
        if quiet >= PLATEAU_WINDOW {
            break;
        }
        prev = l;
        iterations += 1;
        opt.step(&mut [
            (params.theta.as_slice_mut().expect("standard layout"), grad.theta.as_slice().expect("standard layout")),
            (params.bias.as_slice_mut().expect("contiguous"), grad.bias.as_slice().expect("contiguous")),
        ]);
    }
    if iterations == config.max_iter {
        loss = neg_log_likelihood(&params, &targets, &x, config.reg_strength);
    }
    Ok(MtlrModel {
        params,
        grid: grid.clone(),
        scaler,
        reg_strength: config.reg_strength,
        final_loss: loss,
        iterations,
    })
}

impl MtlrModel {
    pub fn predict_density(&self, x: ArrayView1<'_, f64>) -> Vec<f64> {
        self.params.density(&self.scaler.transform_row(x))
    }

    /// Penalized training objective of this model on `dataset`.
    pub fn training_loss(&self, dataset: &SurvivalDataset) -> Result<f64> {
        let targets = encode_targets(dataset, &self.grid)?;
        Ok(neg_log_likelihood(&self.params, &targets, &self.scaler.transform(&dataset.features), self.reg_strength))
    }
}

impl SurvivalModel for MtlrModel {
    fn num_features(&self) -> usize {
        self.params.num_features()
    }

    fn risk(&self, x: ArrayView1<'_, f64>) -> f64 {
        risk_from_density(&self.predict_density(x))
    }

    fn survival_curve(&self, x: ArrayView1<'_, f64>) -> SurvivalCurve {
        survival_curve_from_density(&self.grid, &self.predict_density(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn tail_scores_unrolled() {
        assert_eq!(tail_scores(&[0.0, 0.0]), vec![0.0, 0.0, 0.0]);
        assert_eq!(tail_scores(&[1.5, -2.0]), vec![-0.5, -2.0, 0.0]);
    }

    #[test]
    fn uniform_density_for_zero_logits() {
        let d = density_from_logits(&[0.0; 3]);
        for v in d {
            close(v, 0.25, 1e-15);
        }
    }

    #[test]
    fn hand_softmax() {
        let d = density_from_logits(&[2f64.ln()]);
        close(d[0], 2.0 / 3.0, 1e-15);
        close(d[1], 1.0 / 3.0, 1e-15);
    }

    #[test]
    fn uniform_survival_curve() {
        let grid = TimeGrid::new(vec![1.0, 2.0, 3.0]).unwrap();
        let c = survival_curve_from_density(&grid, &[0.25; 4]);
        assert_eq!(c.knots(), &[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(c.values(), &[1.0, 0.75, 0.5, 0.25]);
        assert_eq!(c.eval(100.0), 0.25);
        assert_eq!(c.eval(1.5), 0.75);
    }

    #[test]
    fn nll_zero_params() {
        let x = array![[0.3, -1.0]];
        let params = MtlrParameters::zeros(2, 3);
        for s in 0..4 {
            let t = EncodedTargets { interval: vec![s], is_event: vec![true] };
            close(neg_log_likelihood(&params, &t, &x, 0.0), 4f64.ln(), 1e-14);
        }
        // Censored in the second interval (index 1): -ln(3/4).
        let t = EncodedTargets { interval: vec![1], is_event: vec![false] };
        close(neg_log_likelihood(&params, &t, &x, 0.0), -(0.75f64).ln(), 1e-14);
    }

    #[test]
    fn reg_term_is_additive() {
        let x = array![[0.3, -1.0], [1.0, 0.5]];
        let params = MtlrParameters { theta: array![[0.1, -0.2], [0.4, 0.3]], bias: array![0.5, -1.0] };
        let t = EncodedTargets { interval: vec![0, 2], is_event: vec![true, false] };
        let fro: f64 = params.theta.iter().map(|v| v * v).sum();
        let diff = neg_log_likelihood(&params, &t, &x, 0.7) - neg_log_likelihood(&params, &t, &x, 0.0);
        close(diff, 0.35 * fro, 1e-15);
    }

    #[test]
    fn bias_gradient_by_hand() {
        let x = array![[0.0]];
        let t = EncodedTargets { interval: vec![0], is_event: vec![true] };
        let g = gradient(&MtlrParameters::zeros(1, 2), &t, &x, 0.0);
        close(g.bias[0], -2.0 / 3.0, 1e-15);
        close(g.bias[1], -1.0 / 3.0, 1e-15);
    }

    #[test]
    fn risk_limits() {
        close(risk_from_density(&[1.0, 0.0, 0.0, 0.0]), 0.0, 1e-15);
        close(risk_from_density(&[0.0, 0.0, 0.0, 1.0]), -3.0, 1e-15);
    }
}
