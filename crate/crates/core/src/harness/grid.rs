use std::cmp::Ordering;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{RunConfig, Splits};
use super::run::run_on;
use super::sweep::mean_std;
use crate::error::{Error, Result};

/// `points` values spaced log-uniformly over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) || points == 0 {
        return Err(Error::InvalidArgument(format!(
            "log grid needs 0 < lo <= hi and at least one point, got [{lo}, {hi}] x {points}"
        )));
    }
    if points == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.log10(), hi.log10());
    let step = (b - a) / (points - 1) as f64;
    Ok((0..points)
        .map(|i| if i + 1 == points { hi } else { 10f64.powf(a + step * i as f64) })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub etas: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub alphas: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub eta: f64,
    pub lambda: f64,
    pub alpha: f64,
    /// Mean validation accuracy over the seeds; `None` if any seed failed.
    pub accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best: GridRow,
    pub validation_size: usize,
    pub rows: Vec<GridRow>,
}

/// Higher accuracy first; ties go to smaller λ, then smaller η, then smaller α.
fn rank(a: &GridRow, b: &GridRow) -> Ordering {
    let acc = |r: &GridRow| r.accuracy.unwrap_or(f64::NEG_INFINITY);
    acc(b)
        .total_cmp(&acc(a))
        .then(a.lambda.total_cmp(&b.lambda))
        .then(a.eta.total_cmp(&b.eta))
        .then(a.alpha.total_cmp(&b.alpha))
}

/// Holds out the last `validation_fraction` of the training split.
pub fn holdout(splits: &Splits, validation_fraction: f64) -> Result<Splits> {
    let n = splits.train.len();
    if !(validation_fraction > 0.0 && validation_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "validation fraction must lie in (0, 1), got {validation_fraction}"
        )));
    }
    let n_val = ((n as f64) * validation_fraction).round() as usize;
    if n_val == 0 || n_val >= n {
        return Err(Error::InvalidArgument(format!(
            "cannot hold out {validation_fraction} of {n} examples"
        )));
    }
    let (fit, val) = splits.train.split_at(n - n_val)?;
    Ok(Splits {
        train: fit,
        test: Some(val),
    })
}

/// Evaluates every (η, λ, α) on a validation split carved from the training
/// data, averaging over `seeds`.
pub fn cmd_grid(config: &RunConfig, grid: &GridSpec, seeds: &[u64], validation_fraction: f64) -> Result<GridResult> {
    if grid.etas.is_empty() || grid.lambdas.is_empty() || grid.alphas.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidArgument("grid and seed lists must be nonempty".into()));
    }
    config.solver_config()?;
    let splits = holdout(&config.data.load()?, validation_fraction)?;
    grid_on(config, grid, seeds, &splits)
}

pub fn grid_on(config: &RunConfig, grid: &GridSpec, seeds: &[u64], splits: &Splits) -> Result<GridResult> {
    let mut points = Vec::new();
    for &eta in &grid.etas {
        for &lambda in &grid.lambdas {
            for &alpha in &grid.alphas {
                points.push((eta, lambda, alpha));
            }
        }
    }
    if points.is_empty() {
        return Err(Error::InvalidArgument("empty grid".into()));
    }
    let rows: Vec<GridRow> = points
        .par_iter()
        .map(|&(eta, lambda, alpha)| {
            let mut accs = Vec::with_capacity(seeds.len());
            for &seed in seeds {
                let mut c = config.clone();
                c.eta = eta;
                c.lambda = lambda;
                c.alpha = alpha;
                c.seed = seed;
                match run_on(&c, splits).and_then(|o| {
                    o.test_accuracy
                        .ok_or_else(|| Error::InvalidArgument("grid needs single-label data".into()))
                }) {
                    Ok(a) => accs.push(a),
                    Err(e) => {
                        return GridRow {
                            eta,
                            lambda,
                            alpha,
                            accuracy: None,
                            error: Some(e.to_string()),
                        }
                    }
                }
            }
            GridRow {
                eta,
                lambda,
                alpha,
                accuracy: mean_std(&accs).map(|s| s.0),
                error: None,
            }
        })
        .collect();
    let best = rows.iter().min_by(|a, b| rank(a, b)).cloned().expect("nonempty grid");
    Ok(GridResult {
        best,
        validation_size: splits.test.as_ref().map_or(0, |t| t.len()),
        rows,
    })
}

impl GridResult {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:>12}  {:>12}  {:>12}  {:>8}", "eta", "lambda", "alpha", "accuracy");
        for r in &self.rows {
            let acc = r.accuracy.map_or("failed".to_string(), |a| format!("{a:.4}"));
            let _ = writeln!(out, "{:>12.4e}  {:>12.4e}  {:>12.4e}  {:>8}", r.eta, r.lambda, r.alpha, acc);
        }
        let _ = writeln!(
            out,
            "best: eta {:e}, lambda {:e}, alpha {:e} ({} validation examples)",
            self.best.eta, self.best.lambda, self.best.alpha, self.validation_size
        );
        out
    }
}
