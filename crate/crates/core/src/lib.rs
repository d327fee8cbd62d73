//! Spiking-network model of the heat-evoked nociceptive withdrawal reflex.

// `!(x > 0.0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arc;
pub mod baselines;
pub mod config;
pub mod detector;
pub mod error;
pub mod experiments;
pub mod learning;
pub mod neuron;
pub mod sensory;
pub mod stimulus;
pub mod stream;

pub use error::{Error, Result};
