use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{epsilon_serde, RunConfig, Splits};
use crate::accountant::{calibrate_sigma, MechanismCost, Method, PrivacyBudget, ZcdpLedger};
use crate::data::FeatureDataset;
use crate::error::{DataError, Result};
use crate::io;
use crate::model::WeightMatrix;
use crate::solvers::{evaluate_top1, train, TrainReport};
use crate::synth::{generate_synthetic, SyntheticSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub method: Method,
    pub iterations: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub rho: f64,
    pub coefficient: f64,
    pub sigma: f64,
}

impl Calibration {
    pub fn render(&self) -> String {
        format!(
            "method {} (T = {}), epsilon {}, delta {:e}\nrho   = {:.10}\nsigma = {:.10}\n",
            self.method, self.iterations, self.epsilon, self.delta, self.rho, self.sigma
        )
    }
}

pub fn cmd_calibrate(epsilon: f64, delta: f64, method: Method, iterations: usize) -> Result<Calibration> {
    let budget = PrivacyBudget::new(epsilon, delta)?;
    let cost = MechanismCost::new(method, iterations);
    Ok(Calibration {
        method,
        iterations,
        epsilon,
        delta,
        rho: budget.rho(),
        coefficient: cost.rho_coefficient(),
        sigma: calibrate_sigma(&cost, &budget)?,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub method: Method,
    #[serde(with = "epsilon_serde::option")]
    pub epsilon: Option<f64>,
    pub delta: f64,
    pub sigma: f64,
    pub rho: f64,
    pub train_accuracy: Option<f64>,
    pub test_accuracy: Option<f64>,
    pub report: TrainReport,
}

fn accuracy(weights: &WeightMatrix, data: &FeatureDataset) -> Result<Option<f64>> {
    if data.is_single_label() {
        evaluate_top1(weights, data).map(Some)
    } else {
        Ok(None)
    }
}

/// Trains on already loaded splits; the data source in `config` is ignored.
pub fn run_on(config: &RunConfig, splits: &Splits) -> Result<RunOutcome> {
    let solver = config.solver_config()?;
    let mut ledger = ZcdpLedger::new();
    let mut report = train(&splits.train, &solver, &mut ledger)?;
    report.set_reporting_delta(config.delta)?;
    let test_accuracy = match &splits.test {
        Some(t) => accuracy(&report.weights, t)?,
        None => None,
    };
    Ok(RunOutcome {
        method: config.method,
        epsilon: report.epsilon.or(config.is_non_private().then_some(f64::INFINITY)),
        delta: config.delta,
        sigma: solver.sigma,
        rho: report.rho,
        train_accuracy: accuracy(&report.weights, &splits.train)?,
        test_accuracy,
        report,
    })
}

pub fn cmd_train(config: &RunConfig) -> Result<RunOutcome> {
    // reject a bad config before touching the data
    config.solver_config()?;
    let outcome = run_on(config, &config.data.load()?)?;
    if let Some(out) = &config.out {
        write_json(out, &outcome)?;
    }
    Ok(outcome)
}

impl RunOutcome {
    pub fn render(&self) -> String {
        let pct = |a: Option<f64>| a.map_or("n/a".to_string(), |a| format!("{:.4}", a));
        let eps = match self.epsilon {
            Some(e) if e.is_infinite() => "inf".to_string(),
            Some(e) => format!("{e:.6}"),
            None => "n/a".to_string(),
        };
        format!(
            "method {}\ntrain top-1 {}\ntest top-1  {}\nrho {:.10}  epsilon {} at delta {:e}  sigma {:.6}\n",
            self.method.label(),
            pct(self.train_accuracy),
            pct(self.test_accuracy),
            self.rho,
            eps,
            self.delta,
            self.sigma
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthOutput {
    pub train_features: PathBuf,
    pub train_labels: PathBuf,
    pub test_features: PathBuf,
    pub test_labels: PathBuf,
    pub n_train: usize,
    pub n_test: usize,
}

/// Writes `train.fmat`, `train.lpos`, `test.fmat`, `test.lpos` into `dir`.
pub fn cmd_synth(spec: &SyntheticSpec, dir: &Path) -> Result<SynthOutput> {
    let (train, test) = generate_synthetic(spec)?;
    std::fs::create_dir_all(dir).map_err(|source| DataError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let out = SynthOutput {
        train_features: dir.join("train.fmat"),
        train_labels: dir.join("train.lpos"),
        test_features: dir.join("test.fmat"),
        test_labels: dir.join("test.lpos"),
        n_train: train.len(),
        n_test: test.len(),
    };
    io::save_dataset(&train, &out.train_features, &out.train_labels)?;
    io::save_dataset(&test, &out.test_features, &out.test_labels)?;
    Ok(out)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|source| {
        DataError::Io {
            path: path.to_path_buf(),
            source,
        }
        .into()
    })
}
