use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{epsilon_serde, RunConfig, Splits};
use super::run::run_on;
use crate::accountant::{calibrate_sigma, MechanismCost, Method, PrivacyBudget};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub seed: u64,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub method: Method,
    #[serde(with = "epsilon_serde")]
    pub epsilon: f64,
    pub mean_accuracy: Option<f64>,
    /// Sample standard deviation over the successful seeds.
    pub std_accuracy: Option<f64>,
    pub sigma: f64,
    pub rho: f64,
    pub seeds: Vec<u64>,
    /// Per-seed accuracy, aligned with `seeds`; `None` where the run failed.
    pub accuracies: Vec<Option<f64>>,
    pub failures: Vec<CellFailure>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub delta: f64,
    pub rows: Vec<SweepRow>,
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Some((mean, 0.0));
    }
    let ss = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    Some((mean, (ss / (n - 1.0)).sqrt()))
}

/// Runs every (method, ε, seed) combination on the data of `config`. The
/// seed drives the noise only; data are loaded once. Failed runs are
/// recorded in their cell and the sweep carries on.
pub fn cmd_sweep(config: &RunConfig, epsilons: &[f64], seeds: &[u64], methods: &[Method]) -> Result<SweepResult> {
    if epsilons.is_empty() || seeds.is_empty() || methods.is_empty() {
        return Err(Error::InvalidArgument(
            "sweep needs at least one epsilon, seed and method".into(),
        ));
    }
    let splits = config.data.load()?;
    sweep_on(config, &splits, epsilons, seeds, methods)
}

pub fn sweep_on(
    config: &RunConfig,
    splits: &Splits,
    epsilons: &[f64],
    seeds: &[u64],
    methods: &[Method],
) -> Result<SweepResult> {
    let mut methods = methods.to_vec();
    methods.sort();
    methods.dedup();
    let mut epsilons = epsilons.to_vec();
    if epsilons.iter().any(|e| e.is_nan() || *e <= 0.0) {
        return Err(Error::InvalidArgument("epsilons must be positive".into()));
    }
    epsilons.sort_by(f64::total_cmp);
    epsilons.dedup();

    let mut cells = Vec::new();
    for &method in &methods {
        for &eps in &epsilons {
            let mut c = config.for_method(method);
            c.epsilon = Some(eps);
            c.sigma = None;
            // surfaces an invalid budget or config as a usage error up front
            c.solver_config()?;
            cells.push(c);
        }
    }

    let runs: Vec<Result<f64, String>> = cells
        .par_iter()
        .flat_map_iter(|c| seeds.iter().map(move |&s| (c, s)))
        .map(|(c, seed)| {
            let mut c = c.clone();
            c.seed = seed;
            run_on(&c, splits)
                .and_then(|o| {
                    o.test_accuracy
                        .or(o.train_accuracy)
                        .ok_or_else(|| Error::InvalidArgument("sweep needs single-label data".into()))
                })
                .map_err(|e| e.to_string())
        })
        .collect();

    let rows = cells
        .iter()
        .zip(runs.chunks(seeds.len()))
        .map(|(c, results)| {
            let eps = c.epsilon.expect("set above");
            let (sigma, rho) = if eps.is_infinite() {
                (0.0, 0.0)
            } else {
                let budget = PrivacyBudget::new(eps, c.delta)?;
                let cost = MechanismCost::new(c.method, c.iters);
                let sigma = calibrate_sigma(&cost, &budget)?;
                (sigma, cost.rho(sigma))
            };
            let accuracies: Vec<Option<f64>> = results.iter().map(|r| r.as_ref().ok().copied()).collect();
            let failures = seeds
                .iter()
                .zip(results)
                .filter_map(|(&seed, r)| r.as_ref().err().map(|e| CellFailure { seed, error: e.clone() }))
                .collect();
            let ok: Vec<f64> = accuracies.iter().flatten().copied().collect();
            let stats = mean_std(&ok);
            Ok(SweepRow {
                method: c.method,
                epsilon: eps,
                mean_accuracy: stats.map(|s| s.0),
                std_accuracy: stats.map(|s| s.1),
                sigma,
                rho,
                seeds: seeds.to_vec(),
                accuracies,
                failures,
            })
        })
        .collect::<Result<_>>()?;
    Ok(SweepResult {
        delta: config.delta,
        rows,
    })
}

impl SweepResult {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn render(&self) -> String {
        let header = ["method", "epsilon", "mean", "std", "sigma", "rho", "runs", "failed"];
        let mut table: Vec<[String; 8]> = vec![header.map(String::from)];
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
        for r in &self.rows {
            table.push([
                r.method.label().to_string(),
                if r.epsilon.is_infinite() {
                    "inf".to_string()
                } else {
                    format!("{}", r.epsilon)
                },
                opt(r.mean_accuracy),
                opt(r.std_accuracy),
                format!("{:.4}", r.sigma),
                format!("{:.6}", r.rho),
                r.seeds.len().to_string(),
                r.failures.len().to_string(),
            ]);
        }
        let widths: Vec<usize> = (0..8).map(|c| table.iter().map(|row| row[c].len()).max().unwrap_or(0)).collect();
        let mut out = String::new();
        for row in &table {
            let line: Vec<String> = row
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(c, (cell, w))| if c == 0 { format!("{cell:<w$}") } else { format!("{cell:>w$}") })
                .collect();
            let _ = writeln!(out, "{}", line.join("  ").trim_end());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::accountant::rho_from_epsilon_delta;
    use crate::harness::config::DataSource;
    use crate::synth::SyntheticSpec;

    fn config() -> RunConfig {
        let spec = SyntheticSpec::new(300, 4, 3, 6.0, 1.0, 1);
        let mut c = RunConfig::new(Method::LeastSquares, DataSource::Synthetic(spec));
        c.lambda = 1.0;
        c.iters = 2;
        c.eta = 0.5;
        c
    }

    #[test]
    fn rows_sorted_and_rho_matches_budget() {
        let r = cmd_sweep(
            &config(),
            &[8.0, 0.5],
            &[1, 2, 3],
            &[Method::LeastSquares, Method::FirstOrder, Method::Newton],
        )
        .unwrap();
        let keys: Vec<(Method, f64)> = r.rows.iter().map(|r| (r.method, r.epsilon)).collect();
        let mut sorted = keys.clone();
        sorted.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
        assert_eq!(keys, sorted);
        for row in &r.rows {
            let want = rho_from_epsilon_delta(&PrivacyBudget::new(row.epsilon, 1e-5).unwrap());
            assert!((row.rho - want).abs() < 1e-10);
            let ok: Vec<f64> = row.accuracies.iter().flatten().copied().collect();
            let (m, s) = mean_std(&ok).unwrap();
            assert_eq!(Some(m), row.mean_accuracy);
            assert_eq!(Some(s), row.std_accuracy);
        }
    }

    #[test]
    fn single_cell_matches_train() {
        let c = config();
        let r = cmd_sweep(&c, &[1.0], &[7], &[Method::LeastSquares]).unwrap();
        let mut t = c.clone();
        t.epsilon = Some(1.0);
        t.seed = 7;
        let out = super::super::run::cmd_train(&t).unwrap();
        assert_eq!(r.rows[0].accuracies, vec![out.test_accuracy]);
        assert_eq!(r.rows[0].std_accuracy, Some(0.0));
    }

    #[test]
    fn failures_are_recorded_per_cell() {
        let mut c = config();
        // no damping and one class without positives can't be solved
        c.lambda = 0.0;
        c.data = DataSource::Synthetic(SyntheticSpec::new(10, 40, 3, 1.0, 1.0, 0));
        let r = cmd_sweep(&c, &[f64::INFINITY], &[0, 1], &[Method::LeastSquares]).unwrap();
        assert_eq!(r.rows[0].failures.len(), 2);
        assert_eq!(r.rows[0].mean_accuracy, None);
    }

    #[test]
    fn empty_lists_rejected() {
        assert_eq!(
            cmd_sweep(&config(), &[], &[1], &[Method::Newton]).unwrap_err().exit_code(),
            1
        );
    }

    #[test]
    fn text_table_is_aligned() {
        let r = cmd_sweep(&config(), &[1.0, 8.0], &[1], &[Method::LeastSquares]).unwrap();
        let text = r.render();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("method"));
        assert_eq!(lines[1].len(), lines[2].len());
    }
}
