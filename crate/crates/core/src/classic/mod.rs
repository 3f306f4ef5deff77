//! Kaplan-Meier and Cox proportional hazards.

pub mod cox;
pub mod km;

pub use cox::{coxph_fit, CoxConfig, CoxModel, Ties};
pub use km::{censoring_km, km_fit};
