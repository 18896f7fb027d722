use std::time::Instant;

use rayon::prelude::*;

use super::stats::clip_features;
use super::{SolverConfig, TrainReport};
use crate::accountant::ZcdpLedger;
use crate::data::FeatureDataset;
use crate::error::{Error, Result};
use crate::linalg::{symmetrize, LuFactor, Matrix};
use crate::loss::{batch_objective, Loss, QuadraticStats};
use crate::sanitize::{sanitize_sum, NoiseKey, Release, Statistic};

/// Sufficient-statistics perturbation for the weighted quadratic loss.
///
/// Releases the unnormalized `G` (sensitivity C²), every `A_j` (jointly
/// √k·C²) and every `b_j` (jointly √k·C), each concatenation at cost
/// 1/(2σ²) regardless of m, then solves
/// `θⱼ = sym(Ãⱼ + αG̃ + λI)⁻¹ b̃ⱼ` per class.
///
/// A class with no positives gets `Ãⱼ`, `b̃ⱼ` of pure noise, so its θⱼ is
/// ridge-damped noise.
pub fn train_dp_ls(data: &FeatureDataset, config: &SolverConfig, ledger: &mut ZcdpLedger) -> Result<TrainReport> {
    config.validate()?;
    let started = Instant::now();
    let (m, d) = (data.classes(), data.dim());
    let c = config.clip.map_or(1.0, |c| c.feature);
    let root_k = (data.max_positives().max(1) as f64).sqrt();
    let sigma = config.sigma;
    let share = 1.0 / m as f64;
    let key = |j: usize, s: Statistic| NoiseKey::new(config.seed, 0, j, s);

    let clipped = clip_features(data.features(), config.clip.map(|c| c.feature));
    let stats = QuadraticStats::from_rows(&clipped, data);

    let gram = sanitize_sum(
        stats.gram.into_vec(),
        &Release::new(c * c, sigma, 1.0, key(0, Statistic::Gram)),
        ledger,
    )?;
    let gram = Matrix::from_row_major(d, d, gram)?;

    let mut systems = Vec::with_capacity(m);
    for (j, (a, b)) in stats.class_gram.into_iter().zip(stats.class_rhs).enumerate() {
        let a_rel = Release::new(root_k * c * c, sigma, 1.0, key(j, Statistic::ClassGram)).with_share(share);
        let b_rel = Release::new(root_k * c, sigma, 1.0, key(j, Statistic::ClassRhs)).with_share(share);
        let mut lhs = Matrix::from_row_major(d, d, sanitize_sum(a.into_vec(), &a_rel, ledger)?)?;
        let rhs = sanitize_sum(b, &b_rel, ledger)?;
        lhs.add_scaled(&gram, config.alpha)?;
        systems.push((lhs, rhs));
    }

    let rows: Vec<Vec<f64>> = systems
        .into_par_iter()
        .enumerate()
        .map(|(j, (lhs, rhs))| {
            symmetrize(&lhs)
                .and_then(|mut a| {
                    a.add_diagonal(config.lambda);
                    LuFactor::new(&a)
                })
                .and_then(|lu| lu.solve_vec(&rhs))
                .map_err(|e| Error::SolveFailed {
                    iteration: 0,
                    class: j,
                    source: Box::new(e),
                })
        })
        .collect::<Result<_>>()?;

    let mut weights = config.initial_weights(data);
    for (j, row) in rows.iter().enumerate() {
        weights.theta.row_mut(j).copy_from_slice(row);
    }
    let loss = Loss::WeightedQuadratic { alpha: config.alpha };
    let objective = vec![batch_objective(&loss, &weights, data)?];
    Ok(TrainReport::new(config, weights, objective, ledger, started))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::accountant::Method;
    use crate::sanitize::ClipConfig;

    #[test]
    fn one_dimensional_hand_solution() {
        // ½(θ−1)² + ½αθ² + ½αθ² with α=1 → θ = 1/(1+2α)
        let f = Matrix::from_rows(&[vec![1.0], vec![1.0]]).unwrap();
        let ds = FeatureDataset::new(f, &[vec![0], vec![]], 1, 1).unwrap();
        let mut cfg = SolverConfig::new(Method::LeastSquares);
        cfg.alpha = 1.0;
        let r = train_dp_ls(&ds, &cfg, &mut ZcdpLedger::new()).unwrap();
        assert!((r.weights.theta[(0, 0)] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn cost_does_not_grow_with_classes() {
        for m in [1usize, 10, 200] {
            let n = 2 * m;
            let f = Matrix::from_fn(n, 3, |i, j| ((i + 2 * j) % 5) as f64 - 2.0);
            let labels: Vec<u32> = (0..n).map(|i| (i % m) as u32).collect();
            let ds = FeatureDataset::single_label(f, &labels, m).unwrap();
            let mut cfg = SolverConfig::new(Method::LeastSquares);
            cfg.sigma = 2.0;
            cfg.lambda = 1.0;
            cfg.clip = Some(ClipConfig::uniform(1.0).unwrap());
            let mut ledger = ZcdpLedger::new();
            train_dp_ls(&ds, &cfg, &mut ledger).unwrap();
            assert!((ledger.total_rho() - 3.0 / 8.0).abs() < 1e-12, "m={m}");
            assert_eq!(ledger.len(), 1 + 2 * m);
        }
    }

    #[test]
    fn singular_system_names_class() {
        let f = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        // class 1 has no positives and α = λ = 0: A_1 = 0
        let ds = FeatureDataset::new(f, &[vec![0], vec![0]], 2, 1).unwrap();
        let cfg = SolverConfig::new(Method::LeastSquares);
        match train_dp_ls(&ds, &cfg, &mut ZcdpLedger::new()) {
            Err(Error::SolveFailed { class: 1, .. }) => {}
            other => panic!("expected failure on class 1, got {other:?}"),
        }
    }
}
