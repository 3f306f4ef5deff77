//! Random model construction shared by the property and acceptance suites.
#![allow(dead_code)]

pub mod checks;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use survkit::classic::{CoxModel, Ties};
use survkit::curve::{StepFunction, SurvivalCurve};
use survkit::data::{Scaler, TimeGrid};
use survkit::model::SurvivalModel;
use survkit::mtlr::{MtlrModel, MtlrParameters};
use survkit::net::{init_network, Activation, Initializer, LayerSpec};
use survkit::nmtlr::NmtlrModel;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_grid(rng: &mut ChaCha8Rng, k: usize) -> TimeGrid {
    let mut t = 0.0;
    let bounds = (0..k)
        .map(|_| {
            t += rng.gen_range(0.01..3.0);
            t
        })
        .collect();
    TimeGrid::new(bounds).unwrap()
}

fn random_scaler(rng: &mut ChaCha8Rng, p: usize) -> Scaler {
    Scaler {
        means: (0..p).map(|_| rng.gen_range(-5.0..5.0)).collect(),
        std_devs: (0..p).map(|_| rng.gen_range(0.1..10.0)).collect(),
        zero_variance: vec![false; p],
    }
}

pub fn random_mtlr(rng: &mut ChaCha8Rng, p: usize, k: usize, scale: f64) -> MtlrModel {
    MtlrModel {
        params: MtlrParameters {
            theta: Array2::from_shape_simple_fn((p, k), || rng.gen_range(-scale..scale)),
            bias: Array1::from_shape_simple_fn(k, || rng.gen_range(-scale..scale)),
        },
        grid: random_grid(rng, k),
        scaler: random_scaler(rng, p),
        reg_strength: 0.0,
        final_loss: 0.0,
        iterations: 0,
    }
}

pub fn random_nmtlr(rng: &mut ChaCha8Rng, p: usize, k: usize, scale: f64) -> NmtlrModel {
    let kinds = [
        Activation::Identity,
        Activation::Tanh,
        Activation::Relu,
        Activation::Softmax,
        Activation::Selu,
        Activation::Softplus,
    ];
    let hidden: Vec<LayerSpec> = (0..rng.gen_range(0..3))
        .map(|_| LayerSpec::new(rng.gen_range(1..12), kinds[rng.gen_range(0..kinds.len())]))
        .collect();
    let mut network = init_network(p, &hidden, k, Initializer::XavierGaussian, rng.gen()).unwrap();
    for layer in &mut network.layers {
        layer.weights.mapv_inplace(|w| w * scale);
        layer.bias.mapv_inplace(|_| rng.gen_range(-scale..scale));
    }
    NmtlrModel {
        network,
        grid: random_grid(rng, k),
        scaler: random_scaler(rng, p),
        reg_strength: 0.0,
        final_loss: 0.0,
        epochs_run: 0,
        best_epoch: 0,
    }
}

pub fn random_cox(rng: &mut ChaCha8Rng, p: usize, scale: f64) -> CoxModel {
    let m = rng.gen_range(1..20);
    let mut knots = vec![0.0];
    let mut values = vec![0.0];
    for _ in 0..m {
        knots.push(knots.last().unwrap() + rng.gen_range(0.01..2.0));
        values.push(values.last().unwrap() + rng.gen_range(0.0..0.5));
    }
    CoxModel {
        beta: (0..p).map(|_| rng.gen_range(-scale..scale)).collect(),
        baseline_cumhaz: StepFunction::new(knots, values).unwrap(),
        scaler: random_scaler(rng, p),
        ties: Ties::Efron,
        log_likelihood: 0.0,
        iterations: 0,
    }
}

/// One of the three model families with random parameters. `scale` controls
/// how extreme the weights are.
pub fn random_model(rng: &mut ChaCha8Rng, p: usize, scale: f64) -> Box<dyn SurvivalModel> {
    let k = rng.gen_range(1..15);
    match rng.gen_range(0..3) {
        0 => Box::new(random_cox(rng, p, scale)),
        1 => Box::new(random_mtlr(rng, p, k, scale)),
        _ => Box::new(random_nmtlr(rng, p, k, scale)),
    }
}

/// Checks that a survival curve is a probability, equals 1 at time 0 and
/// never increases over `times` (which must be sorted).
pub fn curve_violation(curve: &SurvivalCurve, times: &[f64]) -> Option<String> {
    if curve.eval(0.0) != 1.0 {
        return Some(format!("S(0) = {}", curve.eval(0.0)));
    }
    let values = curve.eval_many(times);
    if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Some(format!("value {v} outside [0,1]"));
    }
    values
        .windows(2)
        .position(|w| w[1] > w[0])
        .map(|i| format!("increase at t={}: {} -> {}", times[i + 1], values[i], values[i + 1]))
}
