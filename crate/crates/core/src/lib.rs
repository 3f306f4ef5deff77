//! Survival analysis toolkit: Kaplan-Meier, Cox proportional hazards, linear
//! and neural multi-task logistic regression (MTLR), censoring-aware metrics,
//! a Weibull data simulator and a repeated-split benchmark runner.

pub mod bench;
pub mod classic;
pub mod curve;
pub mod data;
pub mod error;
pub mod metrics;
pub mod model;
pub mod model_file;
pub mod mtlr;
pub mod net;
pub mod nmtlr;
pub mod rng;
pub mod simulate;

pub use curve::{StepFunction, SurvivalCurve};
pub use data::{SurvivalDataset, TimeGrid};
pub use error::{Result, SurvError};
pub use model::SurvivalModel;
