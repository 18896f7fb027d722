//! zCDP bookkeeping: conversions to and from (ε, δ)-DP, noise calibration
//! for each training method, and the per-run ledger of Gaussian releases.
//!
//! Conversions use the standard bound `ε = ρ + 2√(ρ ln(1/δ))`, whose
//! inverse has the closed form `ρ = (√(L + ε) − √L)²` with `L = ln(1/δ)`.
//! Tighter Rényi-order-optimized converters report smaller ρ for the same
//! (ε, δ); this module does not attempt to match them.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sanitize::NoiseKey;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    pub epsilon: f64,
    pub delta: f64,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        let budget = PrivacyBudget { epsilon, delta };
        budget.validate()?;
        Ok(budget)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be finite and positive, got {}",
                self.epsilon
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        Ok(())
    }

    pub fn rho(&self) -> f64 {
        rho_from_epsilon_delta(self)
    }
}

/// ρ such that `ε = ρ + 2√(ρ ln(1/δ))`.
pub fn rho_from_epsilon_delta(budget: &PrivacyBudget) -> f64 {
    let l = (1.0 / budget.delta).ln();
    // (√(L+ε) − √L)² written as ε² / (√(L+ε) + √L)² to avoid cancellation for small ε
    let denom = (l + budget.epsilon).sqrt() + l.sqrt();
    (budget.epsilon / denom).powi(2)
}

pub fn epsilon_from_rho(rho: f64, delta: f64) -> Result<f64> {
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "rho must be finite and non-negative, got {rho}"
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    Ok(rho + 2.0 * (rho * (1.0 / delta).ln()).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[serde(alias = "dp_adam", alias = "dp-adam", alias = "dp_sgd")]
    FirstOrder,
    #[serde(alias = "dp_newton", alias = "dp-newton")]
    Newton,
    #[serde(alias = "dp_ls", alias = "dp-ls")]
    LeastSquares,
    #[serde(alias = "dp_fc", alias = "dp-fc")]
    FeatureCovariance,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::FirstOrder,
        Method::Newton,
        Method::LeastSquares,
        Method::FeatureCovariance,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::FirstOrder => "first_order",
            Method::Newton => "newton",
            Method::LeastSquares => "least_squares",
            Method::FeatureCovariance => "feature_covariance",
        }
    }

    /// Short name used in tables.
    pub fn label(&self) -> &'static str {
        match self {
            Method::FirstOrder => "DP-Adam",
            Method::Newton => "DP-Newton",
            Method::LeastSquares => "DP-LS",
            Method::FeatureCovariance => "DP-FC",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_ascii_lowercase()))
            .map_err(|_| Error::InvalidArgument(format!("unknown method {s:?}")))
    }
}

/// Total zCDP cost of one run of a method, as `rho_coefficient / σ²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MechanismCost {
    pub method: Method,
    pub iterations: usize,
}

impl MechanismCost {
    pub fn new(method: Method, iterations: usize) -> Self {
        MechanismCost { method, iterations }
    }

    pub fn rho_coefficient(&self) -> f64 {
        let t = self.iterations as f64;
        match self.method {
            Method::FirstOrder => t / 2.0,
            Method::Newton => t,
            Method::LeastSquares => 1.5,
            Method::FeatureCovariance => (t + 1.0) / 2.0,
        }
    }

    pub fn rho(&self, sigma: f64) -> f64 {
        self.rho_coefficient() / (sigma * sigma)
    }
}

/// Noise multiplier that makes a run of `cost` spend exactly the budget's ρ.
pub fn calibrate_sigma(cost: &MechanismCost, budget: &PrivacyBudget) -> Result<f64> {
    budget.validate()?;
    calibrate_sigma_for_rho(cost, rho_from_epsilon_delta(budget))
}

pub fn calibrate_sigma_for_rho(cost: &MechanismCost, rho: f64) -> Result<f64> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "target rho must be positive and finite, got {rho}"
        )));
    }
    let coef = cost.rho_coefficient();
    if coef <= 0.0 {
        return Err(Error::InvalidArgument(
            "method needs at least one iteration".into(),
        ));
    }
    Ok((coef / rho).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub label: String,
    pub rho: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub key: Option<NoiseKey>,
}

/// Append-only record of every Gaussian release in a run.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ZcdpLedger {
    entries: Vec<LedgerEntry>,
    total_rho: f64,
    #[serde(skip)]
    keys: HashSet<NoiseKey>,
}

impl ZcdpLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn charge(&mut self, label: impl Into<String>, rho: f64) -> Result<()> {
        self.push(label.into(), rho, None)
    }

    /// Charges a release drawn from `key`; a key may be charged only once.
    pub fn charge_release(&mut self, key: NoiseKey, label: impl Into<String>, rho: f64) -> Result<()> {
        if self.keys.contains(&key) {
            return Err(Error::KeyReuse(key));
        }
        self.push(label.into(), rho, Some(key))?;
        self.keys.insert(key);
        Ok(())
    }

    fn push(&mut self, label: String, rho: f64, key: Option<NoiseKey>) -> Result<()> {
        if !(rho >= 0.0 && rho.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "charge must be finite and non-negative, got {rho}"
            )));
        }
        self.entries.push(LedgerEntry { label, rho, key });
        self.total_rho += rho;
        Ok(())
    }

    pub fn total_rho(&self) -> f64 {
        self.total_rho
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn epsilon(&self, delta: f64) -> Result<f64> {
        epsilon_from_rho(self.total_rho, delta)
    }
}
