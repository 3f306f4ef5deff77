//! First-order optimizers over groups of flat parameter slices.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
    Adamax,
    Rmsprop,
}

impl std::str::FromStr for OptimizerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sgd" => Ok(Self::Sgd),
            "adam" => Ok(Self::Adam),
            "adamax" => Ok(Self::Adamax),
            "rmsprop" => Ok(Self::Rmsprop),
            other => Err(format!("unknown optimizer `{other}` (expected sgd, adam, adamax or rmsprop)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub name: OptimizerKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// RMSprop accumulator decay.
    pub rho: f64,
    pub epsilon: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self::new(OptimizerKind::Adam, 1e-3)
    }
}

impl OptimizerConfig {
    pub fn new(name: OptimizerKind, learning_rate: f64) -> Self {
        Self { name, learning_rate, beta1: 0.9, beta2: 0.999, rho: 0.9, epsilon: 1e-8 }
    }
}

/// Optimizer accumulators. Group `g` of every `step` call must keep the same
/// length across calls.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub config: OptimizerConfig,
    pub steps: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(config: OptimizerConfig) -> Self {
        Self { config, steps: 0, first: Vec::new(), second: Vec::new() }
    }

    pub fn step(&mut self, groups: &mut [(&mut [f64], &[f64])]) {
        self.steps += 1;
        if self.first.len() < groups.len() {
            for (p, _) in &groups[self.first.len()..] {
                self.first.push(vec![0.0; p.len()]);
                self.second.push(vec![0.0; p.len()]);
            }
        }
        let c = &self.config;
        let lr = c.learning_rate;
        let t = self.steps as i32;
        for (gi, (params, grads)) in groups.iter_mut().enumerate() {
            assert_eq!(params.len(), grads.len(), "parameter and gradient shapes differ");
            let m = &mut self.first[gi];
            let v = &mut self.second[gi];
            assert_eq!(m.len(), params.len(), "parameter group changed shape");
            match c.name {
                OptimizerKind::Sgd => {
                    for (p, g) in params.iter_mut().zip(grads.iter()) {
                        *p -= lr * g;
                    }
                }
                OptimizerKind::Adam => {
                    let bc1 = 1.0 - c.beta1.powi(t);
                    let bc2 = 1.0 - c.beta2.powi(t);
                    for i in 0..params.len() {
                        let g = grads[i];
                        m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
                        v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
                        let mhat = m[i] / bc1;
                        let vhat = v[i] / bc2;
                        params[i] -= lr * mhat / (vhat.sqrt() + c.epsilon);
                    }
                }
                OptimizerKind::Adamax => {
                    let step = lr / (1.0 - c.beta1.powi(t));
                    for i in 0..params.len() {
                        let g = grads[i];
                        m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
                        v[i] = (c.beta2 * v[i]).max(g.abs());
                        params[i] -= step * m[i] / (v[i] + c.epsilon);
                    }
                }
                OptimizerKind::Rmsprop => {
                    for i in 0..params.len() {
                        let g = grads[i];
                        v[i] = c.rho * v[i] + (1.0 - c.rho) * g * g;
                        params[i] -= lr * g / (v[i].sqrt() + c.epsilon);
                    }
                }
            }
        }
    }
}
