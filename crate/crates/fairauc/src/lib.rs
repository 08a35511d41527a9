//! Training binary scoring models for AUC under AUC-based fairness
//! constraints.
//!
//! The library turns the pairwise objective "maximize AUC subject to two
//! subset-AUC fairness surrogates staying within a budget" into a
//! saddle-point problem over per-sample kernels, then solves it with
//! stochastic mirror descent inside a feasible level-set loop — plus a
//! proximal-point outer loop when the scorer is a nonconvex network.
//!
//! Module map, roughly bottom-up:
//!
//! - [`dataset`]: sparse/CSV parsing, group selectors, splits, sampling, and
//!   a synthetic biased-Gaussian generator.
//! - [`model`]: linear and one-hidden-layer scorers, score gradients, the
//!   weight-ball domain, and text checkpoints.
//! - [`metrics`]: tie-aware empirical AUC, the fairness metric family, and
//!   gap reports.
//! - [`reformulation`]: the per-sample min/max kernels, the saddle
//!   integrand and its gradients, and full-batch objective values.
//! - [`bregman`]: the primal/dual geometries, both prox maps in closed
//!   form, and the exact inner dual maximization.
//! - [`smd`]: the mirror descent oracle — averaged iterates and a
//!   stochastic upper bound at a fixed level.
//! - [`levelset`]: the feasible level-set loop driving the oracle.
//! - [`iqrc`]: the proximal-point outer loop for weakly convex scorers.

pub mod bregman;
pub mod dataset;
pub mod error;
pub mod iqrc;
pub mod levelset;
pub mod metrics;
pub mod model;
pub mod reformulation;
pub mod smd;
mod vecops;

pub use error::{Error, Result};
