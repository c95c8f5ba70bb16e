//! Continual-learning evaluation where the trainable-parameter subspace (the
//! fine-tuning regime) is a first-class experimental variable.
//!
//! The crate is organised bottom-up:
//!
//! - [`nn`]: a small residual MLP with exact manual backpropagation and a
//!   multi-head task-incremental classifier, exposed through one flat
//!   [`ParamVector`].
//! - [`regime`]: fixed trainable subspaces and their coordinate projector.
//! - [`methods`]: online EWC, SI, LwF and GEM as preservation signals or
//!   gradient transforms.
//! - [`trainer`]: projected SGD with per-step decomposition of the update
//!   into current-task and preservation components.
//! - [`metrics`]: accuracy / forgetting, rankings, Kendall tau-b and
//!   regime-agreement matrices.
//! - [`data`]: IDX ingestion, synthetic task generation, task splits and
//!   task orders.
//! - [`verifier`]: an executable check of the projected-descent progress
//!   bound on quadratic objectives.
//! - [`runner`]: experiment configs, the regime x method x order matrix and
//!   CSV reports.

// `!(x >= 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod methods;
pub mod metrics;
pub mod nn;
pub mod regime;
pub mod rng;
pub mod runner;
pub mod trainer;
pub mod verifier;

pub use error::{Error, Result};
pub use nn::{Batch, Network, NetworkSpec, ParamVector};
pub use regime::TrainableSubspace;
