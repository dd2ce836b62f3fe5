//! Age-of-infection SIS dynamics on uncorrelated scale-free networks with
//! degree-dependent demography.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod demography;
pub mod error;
pub mod kernels;
pub mod network;
pub mod simulator;
pub mod threshold;

pub use error::{Error, Result};
