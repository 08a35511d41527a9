//! Experiment driver around the `fairauc` library: config parsing, single
//! training runs with snapshot selection, budget sweeps with aggregation and
//! plotting, and the score post-processing baseline.

pub mod config;
pub mod experiment;
pub mod plot;
pub mod postprocess;
pub mod sweep;
