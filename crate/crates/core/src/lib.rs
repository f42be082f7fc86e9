//! Privacy masks for a scalar cloud-controlled LQG loop.
//!
//! A plant sends noisy measurements up to a cloud controller and receives
//! noisy commands back. This crate computes the steady-state information
//! leaked through both links, the resulting control cost, the mask
//! variances that minimize leakage, exact finite-horizon information
//! quantities, and Monte Carlo trajectories of the loop.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod design;
pub mod error;
pub mod metrics;
pub mod oracle;
pub mod params;
pub mod riccati;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
pub use params::{closed_loop_stable, nnr_of, MaskParams, Nnr, Stability, SystemParams};
