//! Neural MTLR: a feedforward network produces the K task logits that the
//! linear model would compute as `x . theta_j + b_j`.

use ndarray::{Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::curve::SurvivalCurve;
use crate::data::{encode_targets, split_indices, EncodedTargets, Scaler, SurvivalDataset, TimeGrid};
use crate::error::{Result, SurvError};
use crate::model::SurvivalModel;
use crate::mtlr::{density_from_logits, head_loss_and_grad, risk_from_density, survival_curve_from_density, tail_scores};
use crate::net::{init_network, Initializer, LayerSpec, Mode, Network, OptimizerConfig, OptimizerKind, OptimizerState};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct Architecture {
    /// Hidden layers; the K-unit identity output layer is implicit.
    pub hidden: Vec<LayerSpec>,
    pub initializer: Initializer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub optimizer: OptimizerConfig,
    pub epochs: usize,
    /// `None` trains full-batch.
    pub batch_size: Option<usize>,
    /// L2 penalty `reg/2 * sum |W_l|_F^2` on weights (not biases).
    pub reg_strength: f64,
    pub seed: u64,
    pub validation_fraction: f64,
    /// Stop after this many epochs without a validation improvement and
    /// restore the best parameters. Ignored without a validation split.
    pub early_stopping_patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: OptimizerConfig::new(OptimizerKind::Adam, 1e-3),
            epochs: 1000,
            batch_size: None,
            reg_strength: 1e-4,
            seed: 0,
            validation_fraction: 0.2,
            early_stopping_patience: Some(50),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct NmtlrConfig {
    pub architecture: Architecture,
    pub training: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmtlrModel {
    pub network: Network,
    pub grid: TimeGrid,
    pub scaler: Scaler,
    pub reg_strength: f64,
    /// Penalized training objective at the returned parameters.
    pub final_loss: f64,
    pub epochs_run: usize,
    pub best_epoch: usize,
}

/// Interval scores `sum_{j >= s} u_j` of the network logits for one
/// standardized input.
pub fn nmtlr_scores(network: &Network, x_std: &[f64]) -> Result<Vec<f64>> {
    let x = ArrayView1::from(x_std).insert_axis(Axis(0)).to_owned();
    let logits = network.predict(&x)?;
    Ok(tail_scores(logits.row(0).as_slice().expect("row of standard layout")))
}

fn mean_loss(network: &Network, x: &Array2<f64>, targets: &EncodedTargets, rows: &[usize]) -> Result<f64> {
    let logits = network.predict(&x.select(Axis(0), rows))?;
    let (total, _) = head_loss_and_grad(&logits, targets, rows);
    Ok(total / rows.len() as f64)
}

/// Penalized objective of `network` on standardized features.
pub fn objective(network: &Network, x_std: &Array2<f64>, targets: &EncodedTargets, reg_strength: f64) -> Result<f64> {
    let rows: Vec<usize> = (0..targets.len()).collect();
    Ok(mean_loss(network, x_std, targets, &rows)? + 0.5 * reg_strength * network.weight_sq_norm())
}

/// Gradient of [`objective`] (without dropout) for every weight and bias.
pub fn objective_gradient(
    network: &Network,
    x_std: &Array2<f64>,
    targets: &EncodedTargets,
    reg_strength: f64,
) -> Result<crate::net::Gradients> {
    let rows: Vec<usize> = (0..targets.len()).collect();
    batch_gradient(network, x_std, targets, &rows, reg_strength, Mode::Infer, 0).map(|(_, g)| g)
}

fn batch_gradient(
    network: &Network,
    x_batch: &Array2<f64>,
    targets: &EncodedTargets,
    rows: &[usize],
    reg_strength: f64,
    mode: Mode,
    seed: u64,
) -> Result<(f64, crate::net::Gradients)> {
    let acts = network.forward(x_batch, mode, seed)?;
    let (total, dlogits) = head_loss_and_grad(acts.logits(), targets, rows);
    let scale = 1.0 / rows.len() as f64;
    let mut grads = network.backward(&acts, &(dlogits * scale))?;
    if reg_strength > 0.0 {
        for (g, layer) in grads.weights.iter_mut().zip(&network.layers) {
            g.scaled_add(reg_strength, &layer.weights);
        }
    }
    let loss = total * scale + 0.5 * reg_strength * network.weight_sq_norm();
    Ok((loss, grads))
}

pub fn nmtlr_fit(dataset: &SurvivalDataset, grid: &TimeGrid, config: &NmtlrConfig) -> Result<NmtlrModel> {
    dataset.require_events()?;
    let train_cfg = &config.training;
    let scaler = Scaler::fit(&dataset.features);
    let x = scaler.transform(&dataset.features);
    let targets = encode_targets(dataset, grid)?;
    let seed = train_cfg.seed;

    let n = dataset.len();
    let (fit_rows, val_rows) = if train_cfg.validation_fraction > 0.0 && n >= 5 {
        split_indices(&dataset.events, train_cfg.validation_fraction, rng::derive_seed(seed, "validation"))?
    } else {
        ((0..n).collect(), Vec::new())
    };

    let mut network = init_network(
        dataset.num_features(),
        &config.architecture.hidden,
        grid.num_boundaries(),
        config.architecture.initializer,
        rng::derive_seed(seed, "init"),
    )?;
    let mut opt = OptimizerState::new(train_cfg.optimizer.clone());
    let batch_size = train_cfg.batch_size.unwrap_or(fit_rows.len()).clamp(1, fit_rows.len());
    let full_batch = batch_size == fit_rows.len();
    let x_full_batch = full_batch.then(|| x.select(Axis(0), &fit_rows));
    let patience = train_cfg.early_stopping_patience.filter(|_| !val_rows.is_empty());

    let mut order = fit_rows.clone();
    let mut best: Option<(f64, usize, Network)> = None;
    let mut epochs_run = 0;
    for epoch in 0..train_cfg.epochs {
        if !full_batch {
            order.shuffle(&mut rng::indexed_stream(seed, "shuffle", epoch as u64));
        }
        for (b, rows) in order.chunks(batch_size).enumerate() {
            let owned;
            let xb = match &x_full_batch {
                Some(xb) => xb,
                None => {
                    owned = x.select(Axis(0), rows);
                    &owned
                }
            };
            let step_seed = rng::derive_indexed(seed, "dropout", ((epoch as u64) << 32) | b as u64);
            let (loss, grads) = batch_gradient(&network, xb, &targets, rows, train_cfg.reg_strength, Mode::Train, step_seed)
                .map_err(|e| match e {
                    SurvError::NonFiniteActivation { .. } => {
                        SurvError::NonFiniteLoss { iteration: epoch, param_norm: network.param_norm() }
                    }
                    other => other,
                })?;
            if !loss.is_finite() {
                return Err(SurvError::NonFiniteLoss { iteration: epoch, param_norm: network.param_norm() });
            }
            network.apply_step(&mut opt, &grads);
        }
        epochs_run = epoch + 1;

        if let Some(patience) = patience {
            let val = mean_loss(&network, &x, &targets, &val_rows)?;
            if !val.is_finite() {
                return Err(SurvError::NonFiniteLoss { iteration: epoch, param_norm: network.param_norm() });
            }
            match &best {
                Some((best_val, _, _)) if val >= *best_val => {
                    if epoch - best.as_ref().map(|b| b.1).unwrap_or(0) >= patience {
                        break;
                    }
                }
                _ => best = Some((val, epoch, network.clone())),
            }
        }
    }
    let best_epoch = match best {
        Some((_, epoch, net)) => {
            network = net;
            epoch + 1
        }
        None => epochs_run,
    };
    let fit_x = x.select(Axis(0), &fit_rows);
    let fit_targets = EncodedTargets {
        interval: fit_rows.iter().map(|&i| targets.interval[i]).collect(),
        is_event: fit_rows.iter().map(|&i| targets.is_event[i]).collect(),
    };
    let final_loss = objective(&network, &fit_x, &fit_targets, train_cfg.reg_strength)?;
    Ok(NmtlrModel {
        network,
        grid: grid.clone(),
        scaler,
        reg_strength: train_cfg.reg_strength,
        final_loss,
        epochs_run,
        best_epoch,
    })
}

impl NmtlrModel {
    fn densities(&self, features: &Array2<f64>) -> Vec<Vec<f64>> {
        let logits = self
            .network
            .predict(&self.scaler.transform(features))
            .expect("model input width checked at construction");
        logits.rows().into_iter().map(|u| density_from_logits(&u.to_vec())).collect()
    }

    pub fn predict_density(&self, x: ArrayView1<'_, f64>) -> Vec<f64> {
        self.densities(&x.insert_axis(Axis(0)).to_owned()).pop().expect("one row")
    }

    pub fn training_loss(&self, dataset: &SurvivalDataset) -> Result<f64> {
        let targets = encode_targets(dataset, &self.grid)?;
        objective(&self.network, &self.scaler.transform(&dataset.features), &targets, self.reg_strength)
    }
}

impl SurvivalModel for NmtlrModel {
    fn num_features(&self) -> usize {
        self.network.input_dim()
    }

    fn risk(&self, x: ArrayView1<'_, f64>) -> f64 {
        risk_from_density(&self.predict_density(x))
    }

    fn survival_curve(&self, x: ArrayView1<'_, f64>) -> SurvivalCurve {
        survival_curve_from_density(&self.grid, &self.predict_density(x))
    }

    fn risks(&self, features: &Array2<f64>) -> Vec<f64> {
        self.densities(features).iter().map(|d| risk_from_density(d)).collect()
    }

    fn survival_matrix(&self, features: &Array2<f64>, times: &[f64]) -> Array2<f64> {
        let dens = self.densities(features);
        let mut out = Array2::zeros((features.nrows(), times.len()));
        for (i, d) in dens.iter().enumerate() {
            let curve = survival_curve_from_density(&self.grid, d);
            for (j, &t) in times.iter().enumerate() {
                out[[i, j]] = curve.eval(t);
            }
        }
        out
    }
}
