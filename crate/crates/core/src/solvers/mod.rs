//! The four private training algorithms.
//!
//! All of them train full-batch and route every Gaussian release through
//! [`sanitize_sum`](crate::sanitize::sanitize_sum), so after a run the
//! ledger total equals the method's closed-form cost `coefficient / σ²`.
//!
//! | method | releases per run | ρ |
//! |--------|------------------|---|
//! | first-order (DP-Adam / DP-SGD) | T clipped gradient sums | T/(2σ²) |
//! | Newton | T·m gradients and T·m Hessians, each at noise multiplier σ√m | T/σ² |
//! | least squares | G, all A_j, all b_j | 3/(2σ²) |
//! | feature covariance | G once, then T clipped gradient sums | (T+1)/(2σ²) |
//!
//! Setting `clip` to `None` turns sanitization off entirely (no clipping,
//! no derivative clamp, no noise); this requires `sigma == 0` and charges
//! nothing.

mod feature_covariance;
mod first_order;
mod least_squares;
mod newton;
pub mod stats;

use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use feature_covariance::train_dp_fc;
pub use first_order::train_dp_first_order;
pub use least_squares::train_dp_ls;
pub use newton::train_dp_newton;

use crate::accountant::{epsilon_from_rho, Method, ZcdpLedger};
use crate::data::FeatureDataset;
use crate::error::{Error, Result};
use crate::loss::Loss;
use crate::model::WeightMatrix;
use crate::sanitize::ClipConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    #[default]
    Adam,
    Sgd,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub method: Method,
    /// Ignored by least squares, which always uses the weighted quadratic
    /// loss with `alpha`.
    #[serde(default)]
    pub loss: Loss,
    /// Number of full-batch steps (equal to epochs). Ignored by least squares.
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_eta")]
    pub eta: f64,
    /// Weight decay (first-order), Hessian damping (Newton, added before the
    /// 1/n normalization), ridge (least squares) or preconditioner shift
    /// (feature covariance).
    #[serde(default)]
    pub lambda: f64,
    /// Weight of the negative-label term; least squares only.
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub optimizer: Optimizer,
    #[serde(default)]
    pub adam: AdamConfig,
    /// `None` switches all sanitization off.
    pub clip: Option<ClipConfig>,
    #[serde(default)]
    pub sigma: f64,
    #[serde(default)]
    pub seed: u64,
    /// Initial per-class bias, trained by the first-order and
    /// feature-covariance methods. The second-order methods take a constant
    /// feature instead.
    #[serde(default)]
    pub bias_init: Option<f64>,
    /// Return the average of the iterates θ_1..θ_T instead of θ_T
    /// (first-order only).
    #[serde(default)]
    pub average_iterates: bool,
}

fn default_iterations() -> usize {
    1
}

fn default_eta() -> f64 {
    1.0
}

impl SolverConfig {
    pub fn new(method: Method) -> Self {
        SolverConfig {
            method,
            loss: Loss::Logistic,
            iterations: 1,
            eta: 1.0,
            lambda: 0.0,
            alpha: 0.0,
            optimizer: Optimizer::Adam,
            adam: AdamConfig::default(),
            clip: None,
            sigma: 0.0,
            seed: 0,
            bias_init: None,
            average_iterates: false,
        }
    }

    pub fn is_private(&self) -> bool {
        self.sigma > 0.0
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.method != Method::LeastSquares {
            if self.iterations == 0 {
                return bad("iterations must be at least 1".into());
            }
            if !(self.eta > 0.0 && self.eta.is_finite()) {
                return bad(format!("learning rate must be positive, got {}", self.eta));
            }
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be non-negative, got {}", self.lambda));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be non-negative, got {}", self.alpha));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be finite and non-negative, got {}", self.sigma));
        }
        match &self.clip {
            Some(c) => c.validate()?,
            None if self.sigma > 0.0 => {
                return bad("a positive sigma needs clip norms".into());
            }
            None => {}
        }
        if let Some(b) = self.bias_init {
            if !b.is_finite() {
                return bad("bias_init must be finite".into());
            }
            if matches!(self.method, Method::Newton | Method::LeastSquares) {
                return bad(format!(
                    "{} has no bias term; append a constant feature instead",
                    self.method
                ));
            }
        }
        if let Loss::WeightedQuadratic { alpha } = self.loss {
            if !(alpha >= 0.0) {
                return bad("alpha must be non-negative".into());
            }
        }
        if self.method == Method::Newton && matches!(self.loss, Loss::WeightedQuadratic { .. }) {
            return bad("Newton supports the logistic and squared losses".into());
        }
        Ok(())
    }

    fn initial_weights(&self, data: &FeatureDataset) -> WeightMatrix {
        let w = WeightMatrix::zeros(data.classes(), data.dim());
        match self.bias_init {
            Some(b) => w.with_bias(b),
            None => w,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub method: Method,
    /// Training objective (non-private diagnostic) after each iteration.
    pub objective: Vec<f64>,
    pub weights: WeightMatrix,
    pub rho: f64,
    pub releases: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// ε at `delta`; `None` for non-private runs (ε = ∞) or when no delta
    /// was given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    pub seed: u64,
    pub wall_time_secs: f64,
    pub config: SolverConfig,
}

impl TrainReport {
    fn new(config: &SolverConfig, weights: WeightMatrix, objective: Vec<f64>, ledger: &ZcdpLedger, started: Instant) -> Self {
        TrainReport {
            method: config.method,
            objective,
            weights,
            rho: ledger.total_rho(),
            releases: ledger.len(),
            delta: None,
            epsilon: None,
            seed: config.seed,
            wall_time_secs: started.elapsed().as_secs_f64(),
            config: config.clone(),
        }
    }

    /// Records ε at `delta` for private runs.
    pub fn set_reporting_delta(&mut self, delta: f64) -> Result<()> {
        self.delta = Some(delta);
        self.epsilon = if self.config.is_private() {
            Some(epsilon_from_rho(self.rho, delta)?)
        } else {
            None
        };
        Ok(())
    }
}

/// Runs the method selected in `config`.
pub fn train(data: &FeatureDataset, config: &SolverConfig, ledger: &mut ZcdpLedger) -> Result<TrainReport> {
    match config.method {
        Method::FirstOrder => train_dp_first_order(data, config, ledger),
        Method::Newton => train_dp_newton(data, config, ledger),
        Method::LeastSquares => train_dp_ls(data, config, ledger),
        Method::FeatureCovariance => train_dp_fc(data, config, ledger),
    }
}

/// Fraction of examples whose top-scoring class is their (single) label.
pub fn evaluate_top1(weights: &WeightMatrix, data: &FeatureDataset) -> Result<f64> {
    weights.check_compatible(data)?;
    let mut correct = 0usize;
    for i in 0..data.len() {
        let label = match data.positives(i) {
            [j] => *j as usize,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "evaluation needs exactly one positive per example; row {i} has {}",
                    other.len()
                )))
            }
        };
        if weights.predict(data.features().row(i)) == label {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}
