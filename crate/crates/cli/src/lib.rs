//! Command-line support for the `eqvit` library: run configuration, synthetic
//! datasets, training loops and the desk-scale experiments.

pub mod config;
pub mod experiments;
pub mod synthetic;
pub mod train;
