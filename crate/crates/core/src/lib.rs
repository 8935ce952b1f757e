//! Federated label-mixture regularization (FLR) for noisy-label federated learning.
//!
//! This crate is the pure algorithmic core. It is `no_std` (it needs `alloc`)
//! and owns no IO: file formats, configuration and the command line live in the
//! `flr-sim` companion crate.
//!
//! - [`mlp`], [`loss`], [`optim`], [`gradcheck`]: a small ReLU classifier with
//!   analytic gradients for cross entropy and the FLR regularizer
//!   `log(1 - <p, t>)`, plus a central-difference oracle.
//! - [`data`], [`partition`], [`noise`]: synthetic Gaussian-cluster datasets,
//!   i.i.d. and Bernoulli/Dirichlet client partitions, symmetric and
//!   asymmetric label corruption with ground truth retained.
//! - [`state`]: per-example global/local running averages and the
//!   mixture target, with the round schedulers for their coefficients.
//! - [`engine`]: two-phase FedAvg (CE warmup, then FLR) with an optional
//!   FedProx proximal term.
//! - [`metrics`]: clean/noisy x correct/wrong/memorized taxonomy at server and
//!   client granularity.
//!
//! All arithmetic is `f64`. Every random draw comes from a ChaCha stream whose
//! seed is derived from the master seed and a purpose tag (see [`rng`]), so a
//! run is a pure function of its configuration.

#![no_std]
#![warn(missing_docs)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod data;
pub mod engine;
mod error;
pub mod gradcheck;
pub mod loss;
pub mod metrics;
pub mod mlp;
pub mod noise;
pub mod optim;
pub mod partition;
pub mod prob;
pub mod rng;
pub mod state;

pub use error::{Error, Result};

/// Crate version.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use mlp::{Gradient, ModelParams};
pub use prob::{OneHotLabel, ProbVector};
