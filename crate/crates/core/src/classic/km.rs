use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

use crate::curve::SurvivalCurve;
use crate::data::SurvivalDataset;
use crate::model::SurvivalModel;

/// Product-limit estimate `S(t) = prod_{t_j <= t} (1 - d_j / r_j)` over the
/// distinct event times.
pub fn km_fit(times: &[f64], events: &[bool]) -> SurvivalCurve {
    assert_eq!(times.len(), events.len(), "times and events differ in length");
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));

    let mut knots = vec![0.0];
    let mut values = vec![1.0];
    let mut at_risk = times.len();
    let mut surv = 1.0;
    let mut i = 0;
    while i < order.len() {
        let t = times[order[i]];
        let mut deaths = 0usize;
        let mut leaving = 0usize;
        while i < order.len() && times[order[i]] == t {
            deaths += usize::from(events[order[i]]);
            leaving += 1;
            i += 1;
        }
        if deaths > 0 {
            surv *= 1.0 - deaths as f64 / at_risk as f64;
            if t == 0.0 {
                values[0] = surv;
            } else {
                knots.push(t);
                values.push(surv);
            }
        }
        at_risk -= leaving;
    }
    if values[0] != 1.0 {
        // Events at time 0 would break the S(0) = 1 convention; shift them
        // into the first step instead.
        let first = values[0];
        knots.insert(1, f64::MIN_POSITIVE);
        values.insert(1, first);
        values[0] = 1.0;
    }
    SurvivalCurve::new(knots, values).expect("product-limit estimate is a valid survival curve")
}

/// Kaplan-Meier estimate of the censoring distribution `G(t) = P[C > t]`:
/// the product-limit estimator with the event indicators flipped.
pub fn censoring_km(times: &[f64], events: &[bool]) -> SurvivalCurve {
    let flipped: Vec<bool> = events.iter().map(|e| !e).collect();
    km_fit(times, &flipped)
}

/// Covariate-free reference model: every unit gets the cohort curve and the
/// same risk score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KaplanMeierModel {
    pub curve: SurvivalCurve,
    pub num_features: usize,
}

impl KaplanMeierModel {
    pub fn fit(dataset: &SurvivalDataset, num_features: usize) -> Self {
        Self { curve: km_fit(&dataset.times, &dataset.events), num_features }
    }
}

impl SurvivalModel for KaplanMeierModel {
    fn num_features(&self) -> usize {
        self.num_features
    }

    fn risk(&self, _x: ArrayView1<'_, f64>) -> f64 {
        0.0
    }

    fn survival_curve(&self, _x: ArrayView1<'_, f64>) -> SurvivalCurve {
        self.curve.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn three_events() {
        let s = km_fit(&[1.0, 2.0, 3.0], &[true, true, true]);
        assert_abs_diff_eq!(s.eval(1.0), 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.eval(2.0), 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.eval(3.0), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn all_censored_is_flat() {
        let s = km_fit(&[1.0, 2.0, 5.0], &[false; 3]);
        assert_eq!(s.knots(), &[0.0]);
        assert_eq!(s.eval(100.0), 1.0);
    }

    #[test]
    fn tied_events() {
        let s = km_fit(&[1.0, 1.0, 2.0], &[true, true, false]);
        assert_abs_diff_eq!(s.eval(1.0), 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.eval(2.0), 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn censoring_distribution() {
        let g = censoring_km(&[1.0, 2.0], &[false, true]);
        assert_eq!(g.eval(1.0), 0.5);
        assert_eq!(g.eval(2.0), 0.5);
        assert_eq!(g.left_limit(1.0), 1.0);

        let none = censoring_km(&[1.0, 2.0, 3.0], &[true; 3]);
        assert_eq!(none.eval(10.0), 1.0);
    }

    #[test]
    fn double_flip_is_km() {
        let times = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0];
        let events = [true, false, true, true, false, true, false, true];
        let flipped: Vec<bool> = events.iter().map(|e| !e).collect();
        assert_eq!(censoring_km(&times, &flipped), km_fit(&times, &events));
    }
}
