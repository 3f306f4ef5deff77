use ndarray::{Array2, ArrayView1};

use crate::curve::SurvivalCurve;

/// Common prediction surface of the fitted models. Inputs are raw feature
/// rows; each model applies the scaler it was fitted with.
pub trait SurvivalModel: Send + Sync {
    fn num_features(&self) -> usize;

    /// Higher means an earlier expected event.
    fn risk(&self, x: ArrayView1<'_, f64>) -> f64;

    fn survival_curve(&self, x: ArrayView1<'_, f64>) -> SurvivalCurve;

    fn predict_survival(&self, x: ArrayView1<'_, f64>, times: &[f64]) -> Vec<f64> {
        self.survival_curve(x).eval_many(times)
    }

    fn risks(&self, features: &Array2<f64>) -> Vec<f64> {
        features.rows().into_iter().map(|r| self.risk(r)).collect()
    }

    /// N x T matrix of `S(times[j] | x_i)`.
    fn survival_matrix(&self, features: &Array2<f64>, times: &[f64]) -> Array2<f64> {
        let mut out = Array2::zeros((features.nrows(), times.len()));
        for (i, row) in features.rows().into_iter().enumerate() {
            let curve = self.survival_curve(row);
            for (j, &t) in times.iter().enumerate() {
                out[[i, j]] = curve.eval(t);
            }
        }
        out
    }
}
