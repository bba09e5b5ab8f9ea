//! Experiment runner for the multiprecision Schwarz library.

pub mod plan;
pub mod runner;
pub mod snapshot;
