//! Small dense feedforward network with reverse-mode gradients.
//!
//! Weights are stored `fan_in x fan_out` so a batch forward pass is
//! `H_l = act(H_{l-1} W_l + c_l)`. The final layer is always an identity
//! layer; the likelihood head on top of it owns any normalization.

pub mod optim;

use ndarray::{Array1, Array2, Axis, Zip};
use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SurvError};
use crate::rng;

pub use optim::{OptimizerConfig, OptimizerKind, OptimizerState};

const SELU_LAMBDA: f64 = 1.050_700_987_355_480_5;
const SELU_ALPHA: f64 = 1.673_263_242_354_377_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Tanh,
    Relu,
    Softmax,
    Selu,
    Softplus,
}

impl Activation {
    pub const ALL: [Activation; 6] = [
        Activation::Identity,
        Activation::Tanh,
        Activation::Relu,
        Activation::Softmax,
        Activation::Selu,
        Activation::Softplus,
    ];

    /// Apply to a batch of pre-activations (rows are samples).
    pub fn apply(self, z: &Array2<f64>) -> Array2<f64> {
        match self {
            Activation::Identity => z.clone(),
            Activation::Tanh => z.mapv(f64::tanh),
            Activation::Relu => z.mapv(|v| v.max(0.0)),
            Activation::Selu => z.mapv(|v| if v > 0.0 { SELU_LAMBDA * v } else { SELU_LAMBDA * SELU_ALPHA * v.exp_m1() }),
            Activation::Softplus => z.mapv(|v| if v > 0.0 { v + (-v).exp().ln_1p() } else { v.exp().ln_1p() }),
            Activation::Softmax => {
                let mut out = z.clone();
                for mut row in out.rows_mut() {
                    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    row.mapv_inplace(|v| (v - max).exp());
                    let sum = row.sum();
                    row.mapv_inplace(|v| v / sum);
                }
                out
            }
        }
    }

    /// Gradient with respect to the pre-activation given the gradient with
    /// respect to the output `a = act(z)`.
    fn backprop(self, z: &Array2<f64>, a: &Array2<f64>, grad_a: &Array2<f64>) -> Array2<f64> {
        match self {
            Activation::Identity => grad_a.clone(),
            Activation::Tanh => Zip::from(a).and(grad_a).map_collect(|&a, &g| g * (1.0 - a * a)),
            Activation::Relu => Zip::from(z).and(grad_a).map_collect(|&z, &g| if z > 0.0 { g } else { 0.0 }),
            Activation::Selu => Zip::from(z).and(a).and(grad_a).map_collect(|&z, &a, &g| {
                if z > 0.0 {
                    g * SELU_LAMBDA
                } else {
                    g * (a + SELU_LAMBDA * SELU_ALPHA)
                }
            }),
            Activation::Softplus => Zip::from(z).and(grad_a).map_collect(|&z, &g| g / (1.0 + (-z).exp())),
            Activation::Softmax => {
                let mut out = grad_a.clone();
                Zip::from(out.rows_mut()).and(a.rows()).for_each(|mut o, s| {
                    let dot: f64 = o.iter().zip(s.iter()).map(|(g, s)| g * s).sum();
                    Zip::from(&mut o).and(&s).for_each(|o, &s| *o = s * (*o - dot));
                });
                out
            }
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| format!("unknown activation `{s}`"))
    }
}

/// A hidden layer: width, activation and output dropout rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    pub units: usize,
    pub activation: Activation,
    #[serde(default)]
    pub dropout_rate: f64,
}

impl LayerSpec {
    pub fn new(units: usize, activation: Activation) -> Self {
        Self { units, activation, dropout_rate: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Initializer {
    #[default]
    XavierUniform,
    XavierGaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// fan_in x fan_out.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
    pub dropout_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub layers: Vec<Dense>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Everything the backward pass needs from a forward pass.
#[derive(Debug, Clone)]
pub struct Activations {
    pub input: Array2<f64>,
    pre: Vec<Array2<f64>>,
    act: Vec<Array2<f64>>,
    /// Inverted-dropout multipliers (0 or 1/(1-rate)), if dropout was applied.
    masks: Vec<Option<Array2<f64>>>,
    /// Layer outputs after dropout; the last one is the logit matrix.
    pub outputs: Vec<Array2<f64>>,
}

impl Activations {
    pub fn logits(&self) -> &Array2<f64> {
        self.outputs.last().expect("network has at least one layer")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

pub fn init_network(
    input_dim: usize,
    hidden: &[LayerSpec],
    output_dim: usize,
    scheme: Initializer,
    seed: u64,
) -> Result<Network> {
    if input_dim == 0 || output_dim == 0 || hidden.iter().any(|l| l.units == 0) {
        return Err(SurvError::InvalidInput("layer dimensions must be positive".into()));
    }
    if let Some(l) = hidden.iter().find(|l| !(0.0..1.0).contains(&l.dropout_rate)) {
        return Err(SurvError::InvalidInput(format!("dropout rate {} not in [0,1)", l.dropout_rate)));
    }
    let mut rng = rng::stream(seed, "init_network");
    let mut layers = Vec::with_capacity(hidden.len() + 1);
    let mut fan_in = input_dim;
    let specs = hidden.iter().cloned().chain(std::iter::once(LayerSpec::new(output_dim, Activation::Identity)));
    for spec in specs {
        let fan_out = spec.units;
        let weights = match scheme {
            Initializer::XavierUniform => {
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let dist = Uniform::new_inclusive(-limit, limit);
                Array2::from_shape_simple_fn((fan_in, fan_out), || dist.sample(&mut rng))
            }
            Initializer::XavierGaussian => {
                let sd = (2.0 / (fan_in + fan_out) as f64).sqrt();
                let dist = Normal::new(0.0, sd).expect("positive std");
                Array2::from_shape_simple_fn((fan_in, fan_out), || dist.sample(&mut rng))
            }
        };
        layers.push(Dense {
            weights,
            bias: Array1::zeros(fan_out),
            activation: spec.activation,
            dropout_rate: spec.dropout_rate,
        });
        fan_in = fan_out;
    }
    Ok(Network { layers })
}

impl Network {
    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("nonempty").weights.ncols()
    }

    pub fn num_parameters(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn forward(&self, x: &Array2<f64>, mode: Mode, seed: u64) -> Result<Activations> {
        if x.ncols() != self.input_dim() {
            return Err(SurvError::Dimension { expected: self.input_dim(), actual: x.ncols() });
        }
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut act = Vec::with_capacity(self.layers.len());
        let mut masks = Vec::with_capacity(self.layers.len());
        let mut outputs: Vec<Array2<f64>> = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate() {
            let h_prev = if l == 0 { x } else { &outputs[l - 1] };
            let z = h_prev.dot(&layer.weights) + &layer.bias;
            let a = layer.activation.apply(&z);
            if a.iter().any(|v| !v.is_finite()) {
                return Err(SurvError::NonFiniteActivation { layer: l });
            }
            let (out, mask) = if mode == Mode::Train && layer.dropout_rate > 0.0 {
                let keep = 1.0 - layer.dropout_rate;
                let mut r = rng::indexed_stream(seed, "dropout", l as u64);
                let mask = Array2::from_shape_simple_fn(a.raw_dim(), || {
                    if r.gen::<f64>() < keep {
                        1.0 / keep
                    } else {
                        0.0
                    }
                });
                (&a * &mask, Some(mask))
            } else {
                (a.clone(), None)
            };
            pre.push(z);
            act.push(a);
            masks.push(mask);
            outputs.push(out);
        }
        Ok(Activations { input: x.clone(), pre, act, masks, outputs })
    }

    /// Logits in inference mode.
    pub fn predict(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward(x, Mode::Infer, 0)?.outputs.pop().expect("nonempty"))
    }

    /// Gradients of a scalar loss given its gradient with respect to the
    /// logits of the paired forward pass.
    pub fn backward(&self, acts: &Activations, logit_grad: &Array2<f64>) -> Result<Gradients> {
        let out_shape = acts.logits().dim();
        if logit_grad.dim() != out_shape {
            return Err(SurvError::Dimension { expected: out_shape.1, actual: logit_grad.ncols() });
        }
        let n_layers = self.layers.len();
        let mut weights = vec![Array2::zeros((0, 0)); n_layers];
        let mut biases = vec![Array1::zeros(0); n_layers];
        let mut grad_out = logit_grad.clone();
        for l in (0..n_layers).rev() {
            let layer = &self.layers[l];
            if let Some(mask) = &acts.masks[l] {
                grad_out = grad_out * mask;
            }
            let grad_z = layer.activation.backprop(&acts.pre[l], &acts.act[l], &grad_out);
            let h_prev = if l == 0 { &acts.input } else { &acts.outputs[l - 1] };
            weights[l] = h_prev.t().dot(&grad_z);
            biases[l] = grad_z.sum_axis(Axis(0));
            if l > 0 {
                grad_out = grad_z.dot(&layer.weights.t());
            }
        }
        Ok(Gradients { weights, biases })
    }

    /// Flat views of every parameter tensor paired with its gradient, in a
    /// fixed order, for the optimizers.
    pub fn apply_step(&mut self, opt: &mut OptimizerState, grads: &Gradients) {
        let mut groups: Vec<(&mut [f64], &[f64])> = Vec::with_capacity(2 * self.layers.len());
        for (layer, (gw, gb)) in self.layers.iter_mut().zip(grads.weights.iter().zip(&grads.biases)) {
            groups.push((layer.weights.as_slice_mut().expect("standard layout"), gw.as_slice().expect("standard layout")));
            groups.push((layer.bias.as_slice_mut().expect("contiguous"), gb.as_slice().expect("contiguous")));
        }
        opt.step(&mut groups);
    }

    pub fn weight_sq_norm(&self) -> f64 {
        self.layers.iter().flat_map(|l| l.weights.iter()).map(|w| w * w).sum()
    }

    pub fn param_norm(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()))
            .map(|w| w * w)
            .sum::<f64>()
            .sqrt()
    }
}
