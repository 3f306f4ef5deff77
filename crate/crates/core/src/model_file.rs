//! On-disk model format and the training config read by the CLI.
//!
//! A model file is a JSON document:
//!
//! ```json
//! { "format": "survkit-model", "version": 1,
//!   "encoding": { "schema": {...}, "features": [...] },
//!   "model": { "kind": "mtlr", "params": { ... } } }
//! ```
//!
//! Every model embeds the scaler fitted on its training data, so evaluation
//! never re-derives preprocessing.

use std::path::Path;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::bench::GridConfig;
use crate::classic::{CoxConfig, CoxModel};
use crate::curve::SurvivalCurve;
use crate::data::{CsvSchema, FeatureEncoding};
use crate::error::{Result, SurvError};
use crate::model::SurvivalModel;
use crate::mtlr::{MtlrConfig, MtlrModel};
use crate::nmtlr::{NmtlrConfig, NmtlrModel};

pub const FORMAT_TAG: &str = "survkit-model";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Coxph,
    Mtlr,
    Nmtlr,
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "coxph" => Ok(Self::Coxph),
            "mtlr" => Ok(Self::Mtlr),
            "nmtlr" => Ok(Self::Nmtlr),
            other => Err(format!("unknown model `{other}` (valid: coxph, mtlr, nmtlr)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum FittedModel {
    Coxph(CoxModel),
    Mtlr(MtlrModel),
    Nmtlr(NmtlrModel),
}

impl FittedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            FittedModel::Coxph(_) => ModelKind::Coxph,
            FittedModel::Mtlr(_) => ModelKind::Mtlr,
            FittedModel::Nmtlr(_) => ModelKind::Nmtlr,
        }
    }

    fn inner(&self) -> &dyn SurvivalModel {
        match self {
            FittedModel::Coxph(m) => m,
            FittedModel::Mtlr(m) => m,
            FittedModel::Nmtlr(m) => m,
        }
    }

    /// One-line JSON training summary.
    pub fn summary(&self) -> serde_json::Value {
        match self {
            FittedModel::Coxph(m) => serde_json::json!({
                "model": "coxph", "log_partial_likelihood": m.log_likelihood, "iterations": m.iterations,
            }),
            FittedModel::Mtlr(m) => serde_json::json!({
                "model": "mtlr", "final_loss": m.final_loss, "iterations": m.iterations,
                "intervals": m.grid.num_intervals(),
            }),
            FittedModel::Nmtlr(m) => serde_json::json!({
                "model": "nmtlr", "final_loss": m.final_loss, "epochs": m.epochs_run,
                "best_epoch": m.best_epoch, "intervals": m.grid.num_intervals(),
            }),
        }
    }
}

impl SurvivalModel for FittedModel {
    fn num_features(&self) -> usize {
        self.inner().num_features()
    }

    fn risk(&self, x: ArrayView1<'_, f64>) -> f64 {
        self.inner().risk(x)
    }

    fn survival_curve(&self, x: ArrayView1<'_, f64>) -> SurvivalCurve {
        self.inner().survival_curve(x)
    }

    fn risks(&self, features: &Array2<f64>) -> Vec<f64> {
        self.inner().risks(features)
    }

    fn survival_matrix(&self, features: &Array2<f64>, times: &[f64]) -> Array2<f64> {
        self.inner().survival_matrix(features, times)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    /// How CSV columns map to model features; absent for models built from
    /// in-memory arrays.
    pub encoding: Option<FeatureEncoding>,
    pub model: FittedModel,
}

impl ModelFile {
    pub fn new(model: FittedModel, encoding: Option<FeatureEncoding>) -> Self {
        Self { format: FORMAT_TAG.into(), version: FORMAT_VERSION, encoding, model }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| SurvError::ModelFile(e.to_string()))?;
        if file.format != FORMAT_TAG {
            return Err(SurvError::ModelFile(format!("unexpected format tag `{}`", file.format)));
        }
        if file.version != FORMAT_VERSION {
            return Err(SurvError::ModelFile(format!("unsupported version {}", file.version)));
        }
        Ok(file)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|source| SurvError::Io { path: path.to_path_buf(), source })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| SurvError::Io { path: path.to_path_buf(), source })?;
        Self::from_json(&text)
    }
}

/// Config for `survkit train`: the CSV schema plus hyperparameters for each
/// model kind (defaults apply to omitted sections).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainFileConfig {
    pub schema: CsvSchema,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub coxph: CoxConfig,
    #[serde(default)]
    pub mtlr: MtlrConfig,
    #[serde(default)]
    pub nmtlr: NmtlrConfig,
}

impl TrainFileConfig {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| SurvError::Io { path: path.to_path_buf(), source })?;
        serde_json::from_str(&text).map_err(|e| SurvError::Config(e.to_string()))
    }
}
