//! Estimators and metrics checked against independent brute-force or
//! closed-form computations.

mod common;

use ndarray::{array, Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::checks;
use survkit::classic::cox::breslow_baseline;
use survkit::classic::{coxph_fit, CoxConfig, Ties};
use survkit::data::EncodedTargets;
use survkit::mtlr::{
    boundary_survival, density_from_logits, mtlr_fit, risk_from_density, survival_curve_from_density, tail_scores,
    MtlrConfig, MtlrParameters,
};
use survkit::net::{Activation, Dense, Network, OptimizerConfig, OptimizerKind};
use survkit::nmtlr::nmtlr_scores;
use survkit::{SurvivalDataset, SurvivalModel, TimeGrid};

fn dataset(x: Array2<f64>, times: Vec<f64>, events: Vec<bool>) -> SurvivalDataset {
    let names = (0..x.ncols()).map(|j| format!("x{j}")).collect();
    SurvivalDataset::new(x, times, events, names).unwrap()
}

#[test]
fn km_matches_enumeration_of_all_small_datasets() {
    assert_eq!(checks::km_enumeration().unwrap(), format!("{} datasets", 6 + 36 + 216 + 1296 + 7776));
}

#[test]
fn c_index_matches_pair_enumeration() {
    checks::c_index_enumeration(100, 2024).unwrap();
}

#[test]
fn brier_identities() {
    checks::brier_identities(8).unwrap();
}

fn golden_section_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    while hi - lo > 1e-11 {
        let a = hi - ratio * (hi - lo);
        let b = lo + ratio * (hi - lo);
        if f(a) < f(b) {
            lo = a;
        } else {
            hi = b;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn cox_single_binary_covariate_matches_grid_search() {
    let x = [1.0, 0.0, 1.0, 1.0, 0.0, 0.0];
    let times = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
    let events = vec![true, true, false, false, false, false];
    let log_lik = |beta: f64| {
        let mut ll = 0.0;
        for i in 0..6 {
            if events[i] {
                let denom: f64 = (0..6).filter(|&j| times[j] >= times[i]).map(|j| (beta * x[j]).exp()).sum();
                ll += beta * x[i] - denom.ln();
            }
        }
        ll
    };
    let expected = golden_section_max(log_lik, -10.0, 10.0);

    let ds = dataset(Array2::from_shape_vec((6, 1), x.to_vec()).unwrap(), times.clone(), events.clone());
    for ties in [Ties::Efron, Ties::Breslow] {
        let model = coxph_fit(&ds, &CoxConfig { ties, ..CoxConfig::default() }).unwrap();
        let raw_beta = model.beta[0] / model.scaler.std_devs[0];
        assert!((raw_beta - expected).abs() < 1e-6, "{ties:?}: {raw_beta} vs {expected}");
    }
}

#[test]
fn breslow_baseline_increments() {
    // Distinct times, beta = 0: increments are 1 / (number at risk).
    let x = Array2::zeros((4, 1));
    let times = [1.0, 2.0, 3.0, 4.0];
    let events = [true, false, true, true];
    let h = breslow_baseline(&x, &times, &events, &[0.0]);
    assert!((h.eval(1.0) - 0.25).abs() < 1e-15);
    assert!((h.eval(2.5) - 0.25).abs() < 1e-15);
    assert!((h.eval(3.0) - (0.25 + 0.5)).abs() < 1e-15);
    assert!((h.eval(4.0) - (0.25 + 0.5 + 1.0)).abs() < 1e-15);
}

/// K x (K+1) lower-triangular ones with a zero last column.
fn delta_matrix(k: usize) -> Array2<f64> {
    Array2::from_shape_fn((k, k + 1), |(j, c)| if c <= j { 1.0 } else { 0.0 })
}

#[test]
fn interval_scores_match_delta_matrix_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..50 {
        let k = rng.gen_range(1..=6);
        let p = rng.gen_range(1..4);
        let params = MtlrParameters {
            theta: Array2::from_shape_simple_fn((p, k), || rng.gen_range(-2.0..2.0)),
            bias: Array1::from_shape_simple_fn(k, || rng.gen_range(-2.0..2.0)),
        };
        let x: Vec<f64> = (0..p).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let u = Array1::from(x.clone()).dot(&params.theta) + &params.bias;
        let scores = params.interval_scores(&x);
        let delta = delta_matrix(k);
        for s in 0..=k {
            let mut y = Array1::zeros(k + 1);
            y[s] = 1.0;
            let expected = u.dot(&delta).dot(&y);
            assert!((scores[s] - expected).abs() < 1e-12);
        }
    }
}

#[test]
fn boundary_survival_is_tail_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..100 {
        let k = rng.gen_range(1..8);
        let logits: Vec<f64> = (0..k).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let density = density_from_logits(&logits);
        let grid = TimeGrid::new((1..=k).map(|j| j as f64).collect()).unwrap();
        let curve = survival_curve_from_density(&grid, &density);
        let surv = boundary_survival(&density);
        for j in 1..=k {
            let tail: f64 = density[j..].iter().sum();
            assert!((surv[j] - tail).abs() < 1e-12);
            assert!((curve.eval(j as f64) - tail).abs() < 1e-12);
        }
        assert_eq!(curve.eval(0.0), 1.0);
    }
}

#[test]
fn risk_ranks_by_expected_interval() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..100 {
        let k = rng.gen_range(1..=4);
        let densities: Vec<Vec<f64>> = (0..6)
            .map(|_| density_from_logits(&(0..k).map(|_| rng.gen_range(-3.0..3.0)).collect::<Vec<_>>()))
            .collect();
        let expected_index = |d: &[f64]| d.iter().enumerate().map(|(i, f)| i as f64 * f).sum::<f64>();
        for a in &densities {
            for b in &densities {
                let (ea, eb) = (expected_index(a), expected_index(b));
                if (ea - eb).abs() > 1e-9 {
                    assert_eq!(risk_from_density(a) > risk_from_density(b), ea < eb);
                }
            }
        }
    }
}

#[test]
fn heavy_penalty_leaves_intercept_solution() {
    // K = 1, uncensored: 30% of events fall in the first interval.
    let n = 20;
    let times: Vec<f64> = (0..n).map(|i| if i < 6 { 1.0 } else { 3.0 }).collect();
    let x = Array2::from_shape_fn((n, 2), |(i, j)| ((i * 7 + j * 3) % 5) as f64);
    let ds = dataset(x, times, vec![true; n]);
    let grid = TimeGrid::new(vec![2.0]).unwrap();
    let cfg = MtlrConfig {
        reg_strength: 1e3,
        optimizer: OptimizerConfig::new(OptimizerKind::Sgd, 1e-3),
        max_iter: 100_000,
        tol: 0.0,
        seed: 0,
    };
    let model = mtlr_fit(&ds, &grid, &cfg).unwrap();
    assert!(model.params.theta.iter().all(|t| t.abs() < 1e-3), "{:?}", model.params.theta);
    let b = model.params.bias[0];
    let f0 = b.exp() / (b.exp() + 1.0);
    assert!((f0 - 0.3).abs() < 1e-3, "{f0}");
}

#[test]
fn separable_pair_is_learned_monotonically() {
    let ds = dataset(array![[1.0], [-1.0]], vec![1.0, 2.0], vec![true, true]);
    let grid = TimeGrid::new(vec![1.5]).unwrap();
    let cfg = |max_iter| MtlrConfig {
        reg_strength: 1e-4,
        optimizer: OptimizerConfig::new(OptimizerKind::Adam, 0.01),
        max_iter,
        tol: 0.0,
        seed: 0,
    };
    let losses: Vec<f64> = (450..=500).map(|m| mtlr_fit(&ds, &grid, &cfg(m)).unwrap().final_loss).collect();
    assert!(losses.windows(2).all(|w| w[1] < w[0]), "{losses:?}");

    let model = mtlr_fit(&ds, &grid, &cfg(500)).unwrap();
    assert!(model.predict_density(ds.row(0))[0] > 0.9);
    assert!(model.predict_density(ds.row(1))[1] > 0.9);
}

#[test]
fn identity_network_reproduces_linear_scores() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let k = 4;
    let network = Network {
        layers: vec![Dense {
            weights: Array2::eye(k),
            bias: Array1::zeros(k),
            activation: Activation::Identity,
            dropout_rate: 0.0,
        }],
    };
    let linear = MtlrParameters { theta: Array2::eye(k), bias: Array1::zeros(k) };
    for _ in 0..20 {
        let x: Vec<f64> = (0..k).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let net_density = {
            let scores = nmtlr_scores(&network, &x).unwrap();
            let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = scores.iter().map(|s| (s - m).exp()).sum();
            scores.iter().map(|s| (s - m).exp() / z).collect::<Vec<_>>()
        };
        for (a, b) in net_density.iter().zip(linear.density(&x)) {
            assert!((a - b).abs() < 1e-14);
        }
        assert_eq!(tail_scores(&x), linear.interval_scores(&x));
    }
}

#[test]
fn response_vector_shape() {
    let targets = EncodedTargets { interval: vec![0, 2, 3], is_event: vec![true, true, false] };
    assert_eq!(targets.response(0, 4), vec![1, 1, 1, 1]);
    assert_eq!(targets.response(1, 4), vec![0, 0, 1, 1]);
    assert_eq!(targets.response(2, 4), vec![0, 0, 0, 1]);
}

#[test]
fn cox_survival_is_baseline_power() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let n = 60;
    let x = Array2::from_shape_simple_fn((n, 2), || rng.gen_range(-1.0..1.0));
    let times: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..5.0)).collect();
    let events: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.7)).collect();
    let ds = dataset(x, times, events);
    let model = coxph_fit(&ds, &CoxConfig::default()).unwrap();
    for i in 0..5 {
        let eta = model.risk(ds.row(i));
        let curve = model.survival_curve(ds.row(i));
        for t in [0.7, 1.5, 3.0, 4.9] {
            let expected = (-model.baseline_cumhaz.eval(t) * eta.exp()).exp();
            assert!((curve.eval(t) - expected).abs() < 1e-12);
        }
    }
}
