//! Ergodic linear-quadratic control of supOU-driven streamflow.
//!
//! The crate covers the stationary model (moments, ACF, characteristic
//! function), its finite-dimensional Markovian lift, periodic Riccati and
//! backward Kolmogorov solvers for the lifted control problem, calibration
//! from discharge data, and Monte-Carlo simulation used as an independent
//! check on the solvers.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod identify;
pub mod kbe;
pub mod lift;
pub mod mms;
pub mod model;
pub mod oracle_d;
pub mod presets;
pub mod problem;
pub mod riccati;
pub mod simulate;
pub mod special;
pub mod units;

pub use error::{Error, Result};
