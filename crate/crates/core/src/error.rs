use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SurvError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("dataset has no observed events")]
    NoEvents,

    #[error("could not place an event in the training split after {attempts} attempts")]
    SplitFailed { attempts: usize },

    #[error("Cox model did not converge after {iterations} iterations (gradient norm {gradient_norm:.3e}, last beta {beta:?})")]
    NotConverged {
        iterations: usize,
        gradient_norm: f64,
        beta: Vec<f64>,
    },

    #[error("singular information matrix; retry with ridge > 0")]
    SingularHessian,

    #[error("non-finite loss at iteration {iteration} (parameter norm {param_norm:.3e})")]
    NonFiniteLoss { iteration: usize, param_norm: f64 },

    #[error("non-finite activation in layer {layer}")]
    NonFiniteActivation { layer: usize },

    #[error("C-index undefined: no comparable pairs")]
    NoComparablePairs,

    #[error("censored observation at or before t={0}; use weighted_brier")]
    CensoredBeforeTime(f64),

    #[error("censoring calibration failed: achieved event rate {achieved:.4} for target {target:.4}")]
    Calibration { achieved: f64, target: f64 },

    #[error("{failed} of {total} repetitions failed")]
    TooManyFailures { failed: usize, total: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("model file error: {0}")]
    ModelFile(String),
}

pub type Result<T> = std::result::Result<T, SurvError>;

impl SurvError {
    /// Errors caused by bad user input (flags, config, schema) rather than a
    /// failure while fitting or evaluating.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            SurvError::Schema(_) | SurvError::Config(_) | SurvError::Parse { .. }
        )
    }
}
