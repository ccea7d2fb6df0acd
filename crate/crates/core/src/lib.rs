//! Event-driven training of time-to-first-spike networks with sparse-firing
//! regularizers.
//!
//! Each neuron fires at most once. Firing times come from closed forms per
//! causal input set, so forward and backward passes are exact and driven by
//! input events rather than time steps.

pub mod backprop;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod experiments;
pub mod network;
pub mod neuron;
pub mod objectives;
pub mod training;

pub use error::{Error, Result};
