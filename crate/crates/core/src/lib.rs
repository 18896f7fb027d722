//! Differentially private training of linear classification heads on
//! fixed feature matrices.
//!
//! Four full-batch trainers share one privacy model: every Gaussian release
//! is charged to a [`ZcdpLedger`](accountant::ZcdpLedger) in zCDP units,
//! and budgets are converted to and from (ε, δ) by the
//! [`accountant`] module.
//!
//! - [`solvers::train_dp_first_order`]: per-example clipped gradients fed to Adam or SGD
//! - [`solvers::train_dp_newton`]: Newton steps from noised per-class gradients and Hessians
//! - [`solvers::train_dp_ls`]: one-shot least squares from noised sufficient statistics
//! - [`solvers::train_dp_fc`]: clipped gradients preconditioned by a noised feature covariance

// `!(x > 0.0)` style range checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod accountant;
pub mod data;
pub mod error;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod loss;
pub mod model;
pub mod sanitize;
pub mod solvers;
pub mod synth;

pub use accountant::{Method, PrivacyBudget, ZcdpLedger};
pub use data::FeatureDataset;
pub use error::{DataError, Error, Result};
pub use linalg::Matrix;
pub use loss::Loss;
pub use model::WeightMatrix;
pub use sanitize::ClipConfig;
pub use solvers::{SolverConfig, TrainReport};
