//! Numerical laboratory for relative anti-concentration inequalities
//! `P{|<α,X>| <= |<β,X>|} <= C‖β‖/‖α‖ + C/LCD(α)`.

// `!(x > 0.0)` style comparisons reject NaN on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod distributions;
pub mod error;
pub mod estimators;
pub mod lcd;
pub mod logconcave;
pub mod quad;
pub mod report;
pub mod rng;
pub mod sodin;
pub mod stress;
pub mod verify;

pub use error::{Error, Result};
pub use lcd::CoefficientVector;
