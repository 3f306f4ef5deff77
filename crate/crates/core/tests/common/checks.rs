//! Brute-force and finite-difference oracles. Each check returns a
//! description of the first violation, or a summary of what it covered.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use survkit::classic::{censoring_km, km_fit};
use survkit::data::EncodedTargets;
use survkit::metrics::{brier, c_index, weighted_brier};
use survkit::mtlr::{loss_and_gradient, neg_log_likelihood, MtlrParameters};
use survkit::net::{init_network, Activation, Initializer, LayerSpec, Mode, Network};
use survkit::nmtlr::{objective, objective_gradient};

pub type Check = Result<String, String>;

pub fn rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic.iter().zip(numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt() + numeric.iter().map(|b| b * b).sum::<f64>().sqrt();
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

pub fn central_diff(mut f: impl FnMut(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || scale * (2.0 * rng.gen::<f64>() - 1.0))
}

pub fn random_targets(rng: &mut ChaCha8Rng, n: usize, k: usize) -> EncodedTargets {
    EncodedTargets {
        interval: (0..n).map(|_| rng.gen_range(0..=k)).collect(),
        is_event: (0..n).map(|_| rng.gen_bool(0.6)).collect(),
    }
}

/// Product over event times `u <= t` in {1,2,3} of `1 - d(u)/r(u)`.
pub fn km_by_hand(times: &[f64], events: &[bool], t: f64) -> f64 {
    let mut s = 1.0;
    for u in [1.0, 2.0, 3.0] {
        if u > t {
            break;
        }
        let d = times.iter().zip(events).filter(|(&ti, &e)| ti == u && e).count();
        let r = times.iter().filter(|&&ti| ti >= u).count();
        if d > 0 {
            s *= 1.0 - d as f64 / r as f64;
        }
    }
    s
}

/// Every dataset of size 1..=5 with times in {1,2,3} and every censoring
/// pattern.
pub fn km_enumeration() -> Check {
    let probe = [0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 7.0];
    let mut checked = 0;
    for n in 1..=5u32 {
        for time_code in 0..3usize.pow(n) {
            let times: Vec<f64> = (0..n).map(|i| (time_code / 3usize.pow(i) % 3 + 1) as f64).collect();
            for event_code in 0..(1usize << n) {
                let events: Vec<bool> = (0..n).map(|i| event_code >> i & 1 == 1).collect();
                let curve = km_fit(&times, &events);
                for &t in &probe {
                    let expected = km_by_hand(&times, &events, t);
                    if (curve.eval(t) - expected).abs() >= 1e-14 {
                        return Err(format!("times {times:?} events {events:?} t {t}: {} vs {expected}", curve.eval(t)));
                    }
                }
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} datasets"))
}

/// Pairwise enumeration over all ordered pairs.
pub fn c_index_by_pairs(times: &[f64], events: &[bool], risks: &[f64]) -> Option<f64> {
    let n = times.len();
    let (mut num, mut den) = (0.0, 0.0);
    for early in 0..n {
        for late in 0..n {
            if events[early] && times[late] > times[early] {
                den += 1.0;
                num += match risks[early].partial_cmp(&risks[late]).unwrap() {
                    std::cmp::Ordering::Greater => 1.0,
                    std::cmp::Ordering::Equal => 0.5,
                    std::cmp::Ordering::Less => 0.0,
                };
            }
        }
    }
    (den > 0.0).then(|| num / den)
}

pub fn c_index_enumeration(instances: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..instances {
        let n = rng.gen_range(2..=50);
        // Coarse values produce ties in both times and risks.
        let times: Vec<f64> = (0..n).map(|_| rng.gen_range(1..15) as f64).collect();
        let events: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.6)).collect();
        let risks: Vec<f64> = (0..n).map(|_| rng.gen_range(0..8) as f64 * 0.5).collect();
        let ok = match (c_index_by_pairs(&times, &events, &risks), c_index(&times, &events, &risks)) {
            (Some(expected), Ok(got)) => (got - expected).abs() < 1e-12,
            (None, Err(_)) => true,
            _ => false,
        };
        if !ok {
            return Err(format!("instance {i} (n={n}) disagrees"));
        }
    }
    Ok(format!("{instances} instances"))
}

/// Weighted equals plain Brier without censoring; constant 0.5 gives 0.25.
pub fn brier_identities(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..50 {
        let n = rng.gen_range(1..40);
        let times: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..10.0)).collect();
        let events = vec![true; n];
        let preds: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let g = censoring_km(&times, &events);
        for t in [0.0, 1.0, 4.0, 9.0, 20.0] {
            let plain = brier(t, &times, &events, &preds).unwrap();
            let weighted = weighted_brier(t, &times, &events, &preds, &g).unwrap();
            if (weighted - plain).abs() >= 1e-12 {
                return Err(format!("t={t}: weighted {weighted} vs plain {plain}"));
            }
            let half = brier(t, &times, &events, &vec![0.5; n]).unwrap();
            if half != 0.25 {
                return Err(format!("constant 0.5 gave {half}"));
            }
        }
    }
    Ok("50 uncensored samples".into())
}

/// Relative gradient error of the linear MTLR objective at random points.
pub fn mtlr_gradient_errors(draws: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..draws)
        .map(|draw| {
            let n = rng.gen_range(3..25);
            let p = rng.gen_range(1..5);
            let k = rng.gen_range(1..7);
            let x = random_matrix(&mut rng, n, p, 2.0);
            let targets = random_targets(&mut rng, n, k);
            let reg = if draw % 2 == 0 { 0.0 } else { rng.gen_range(0.0..0.5) };
            let params = MtlrParameters {
                theta: random_matrix(&mut rng, p, k, 1.0),
                bias: Array1::from_shape_simple_fn(k, || rng.gen_range(-1.0..1.0)),
            };
            let (loss, grad) = loss_and_gradient(&params, &targets, &x, reg);
            assert!((loss - neg_log_likelihood(&params, &targets, &x, reg)).abs() < 1e-12);

            let h = 1e-6;
            let mut analytic = Vec::new();
            let mut numeric = Vec::new();
            for idx in 0..p * k {
                let (r, c) = (idx / k, idx % k);
                let f = |v: f64| {
                    let mut q = params.clone();
                    q.theta[[r, c]] = v;
                    neg_log_likelihood(&q, &targets, &x, reg)
                };
                analytic.push(grad.theta[[r, c]]);
                numeric.push(central_diff(f, params.theta[[r, c]], h));
            }
            for j in 0..k {
                let f = |v: f64| {
                    let mut q = params.clone();
                    q.bias[j] = v;
                    neg_log_likelihood(&q, &targets, &x, reg)
                };
                analytic.push(grad.bias[j]);
                numeric.push(central_diff(f, params.bias[j], h));
            }
            rel_err(&analytic, &numeric)
        })
        .collect()
}

pub const ACTIVATIONS: [Activation; 6] = [
    Activation::Identity,
    Activation::Tanh,
    Activation::Relu,
    Activation::Softmax,
    Activation::Selu,
    Activation::Softplus,
];

/// Every activation alone and every ordered pair of activations.
pub fn architectures() -> Vec<Vec<LayerSpec>> {
    let mut out = Vec::new();
    for &a in &ACTIVATIONS {
        out.push(vec![LayerSpec::new(5, a)]);
        for &b in &ACTIVATIONS {
            out.push(vec![LayerSpec::new(4, a), LayerSpec::new(3, b)]);
        }
    }
    out
}

/// Every parameter of `net` as (layer, is_bias, flat index).
fn parameter_slots(net: &Network) -> Vec<(usize, bool, usize)> {
    let mut slots = Vec::new();
    for (l, layer) in net.layers.iter().enumerate() {
        slots.extend((0..layer.weights.len()).map(|i| (l, false, i)));
        slots.extend((0..layer.bias.len()).map(|i| (l, true, i)));
    }
    slots
}

fn get(net: &Network, (l, bias, i): (usize, bool, usize)) -> f64 {
    if bias {
        net.layers[l].bias[i]
    } else {
        net.layers[l].weights.as_slice().unwrap()[i]
    }
}

fn set(net: &mut Network, (l, bias, i): (usize, bool, usize), v: f64) {
    if bias {
        net.layers[l].bias[i] = v;
    } else {
        net.layers[l].weights.as_slice_mut().unwrap()[i] = v;
    }
}

fn relu_kink_nearby(net: &Network, x: &Array2<f64>) -> bool {
    let mut h = x.clone();
    for layer in &net.layers {
        let z = h.dot(&layer.weights) + &layer.bias;
        if layer.activation == Activation::Relu && z.iter().any(|v| v.abs() < 1e-3) {
            return true;
        }
        h = layer.activation.apply(&z);
    }
    false
}

/// Finite-difference gradient of `loss` over every parameter of `net`.
fn numeric_gradient(net: &mut Network, mut loss: impl FnMut(&Network) -> f64) -> Vec<f64> {
    let h = 1e-6;
    parameter_slots(net)
        .into_iter()
        .map(|slot| {
            let base = get(net, slot);
            set(net, slot, base + h);
            let up = loss(net);
            set(net, slot, base - h);
            let down = loss(net);
            set(net, slot, base);
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn flatten(net: &Network, weights: &[Array2<f64>], biases: &[Array1<f64>]) -> Vec<f64> {
    parameter_slots(net)
        .into_iter()
        .map(|(l, bias, i)| if bias { biases[l][i] } else { weights[l].as_slice().unwrap()[i] })
        .collect()
}

/// Backprop through a linear functional of the logits, for every
/// architecture; returns (description, relative error).
pub fn network_gradient_errors(seed: u64) -> Vec<(String, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    architectures()
        .into_iter()
        .map(|hidden| {
            let (n, p, k) = (4, 3, 3);
            let (mut net, x) = loop {
                let mut net = init_network(p, &hidden, k, Initializer::XavierGaussian, rng.gen()).unwrap();
                for layer in &mut net.layers {
                    layer.bias.mapv_inplace(|_| rng.gen_range(-0.5..0.5));
                }
                let x = random_matrix(&mut rng, n, p, 1.5);
                if !relu_kink_nearby(&net, &x) {
                    break (net, x);
                }
            };
            // Loss = sum(c * logits) so the logit gradient is c.
            let c = random_matrix(&mut rng, n, k, 1.0);
            let acts = net.forward(&x, Mode::Infer, 0).unwrap();
            let grads = net.backward(&acts, &c).unwrap();
            let analytic = flatten(&net, &grads.weights, &grads.biases);
            let numeric = numeric_gradient(&mut net, |m| (&m.predict(&x).unwrap() * &c).sum());
            let name = hidden.iter().map(|l| format!("{:?}", l.activation)).collect::<Vec<_>>().join("-");
            (name, rel_err(&analytic, &numeric))
        })
        .collect()
}

/// Gradient of the full penalized N-MTLR objective (network plus MTLR
/// likelihood) for a few deep architectures.
pub fn nmtlr_objective_errors(seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, p, k) = (5, 3, 3);
    [
        vec![LayerSpec::new(6, Activation::Tanh), LayerSpec::new(4, Activation::Softmax)],
        vec![LayerSpec::new(6, Activation::Softplus), LayerSpec::new(4, Activation::Selu)],
        vec![LayerSpec::new(6, Activation::Softmax), LayerSpec::new(4, Activation::Tanh)],
    ]
    .into_iter()
    .map(|hidden| {
        let mut net = init_network(p, &hidden, k, Initializer::XavierUniform, rng.gen()).unwrap();
        let x = random_matrix(&mut rng, n, p, 1.0);
        let targets = random_targets(&mut rng, n, k);
        let reg = 0.05;
        let grads = objective_gradient(&net, &x, &targets, reg).unwrap();
        let analytic = flatten(&net, &grads.weights, &grads.biases);
        let numeric = numeric_gradient(&mut net, |m| objective(m, &x, &targets, reg).unwrap());
        rel_err(&analytic, &numeric)
    })
    .collect()
}
