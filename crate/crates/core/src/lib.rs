#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beamforming;
pub mod campaign;
pub mod ccs;
pub mod channel;
pub mod config;
pub mod dump;
pub mod error;
pub mod exec;
pub mod grid;
pub mod learner;
pub mod gs;
pub mod mask;
pub mod prior;
pub mod rng;

pub use error::{Error, Result};
