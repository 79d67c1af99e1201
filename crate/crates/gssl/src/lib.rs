//! Learning graph hyperparameters for graph-based semi-supervised learning.
//!
//! Instances carry distance data and a partially labeled node set. A kernel
//! family turns distances into a weighted graph `G(rho)`; a labeler (harmonic,
//! min-cut or local-global) predicts the unlabeled nodes. The loss as a
//! function of `rho` is piecewise constant, and the crate computes that
//! structure exactly (threshold breakpoints, feedback intervals) and learns
//! `rho` online, in batch, and under an active-query budget.

pub mod active;
pub mod batch;
pub mod error;
pub mod feedback;
pub mod instances;
pub mod kernels;
pub mod labeling;
pub mod maxflow;
pub mod online;
pub mod rng;
pub mod roots;

pub use error::{Error, Result};
