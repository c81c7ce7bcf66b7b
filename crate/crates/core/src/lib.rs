//! Multi-area weighted-least-squares state estimation for bus-branch
//! power networks, with boundary condensation and a centralized baseline.

// `!(x > 0.0)` is used on purpose so that NaN fails validation too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod measurement;
pub mod network;
pub mod partition;
pub mod solver;

pub use error::{Error, Result};
