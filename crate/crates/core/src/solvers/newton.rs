use std::time::Instant;

use rayon::prelude::*;

use super::stats::{clip_features, newton_class_stats};
use super::{SolverConfig, TrainReport};
use crate::accountant::ZcdpLedger;
use crate::data::FeatureDataset;
use crate::error::{Error, Result};
use crate::linalg::{symmetrize, LuFactor, Matrix};
use crate::loss::{batch_objective, Loss};
use crate::sanitize::{sanitize_sum, NoiseKey, Release, Statistic};

/// Private Newton's method on clipped features.
///
/// Per iteration and class, the gradient sum (sensitivity C) and the damped
/// Hessian sum (sensitivity β_H C²) are each released with noise multiplier
/// σ√m, i.e. at cost 1/(2mσ²), for 1/σ² per iteration in total. The step is
/// `θⱼ ← θⱼ − η · sym(H̃ⱼ)⁻¹ g̃ⱼ`. The gradient carries no `λθ` term, so λ
/// acts purely as damping with effective strength λ/n.
pub fn train_dp_newton(data: &FeatureDataset, config: &SolverConfig, ledger: &mut ZcdpLedger) -> Result<TrainReport> {
    config.validate()?;
    let started = Instant::now();
    let (m, d, n) = (data.classes(), data.dim(), data.len());
    let loss = config.loss;
    let private = config.clip.is_some();
    let c = config.clip.map_or(1.0, |c| c.feature);
    let clipped = clip_features(data.features(), config.clip.map(|c| c.feature));
    // ℓ′ is clamped to [−1, 1] only where the unit bound is not automatic
    let clamp = private && matches!(loss, Loss::Squared);
    let sigma_class = config.sigma * (m as f64).sqrt();
    let beta_h = loss.curvature_bound();

    let mut weights = config.initial_weights(data);
    let mut objective = Vec::with_capacity(config.iterations);

    for t in 0..config.iterations {
        let raw: Vec<(Vec<f64>, Matrix)> = (0..m)
            .into_par_iter()
            .map(|j| newton_class_stats(&clipped, data, weights.theta.row(j), j, &loss, config.lambda, clamp))
            .collect::<Result<_>>()?;

        let mut sanitized = Vec::with_capacity(m);
        for (j, (g, h)) in raw.into_iter().enumerate() {
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::Diverged { iteration: t });
            }
            let g_rel = Release::new(c, sigma_class, n as f64, NoiseKey::new(config.seed, t, j, Statistic::Gradient));
            let h_rel = Release::new(
                beta_h * c * c,
                sigma_class,
                n as f64,
                NoiseKey::new(config.seed, t, j, Statistic::Hessian),
            );
            let g = sanitize_sum(g, &g_rel, ledger)?;
            let h = Matrix::from_row_major(d, d, sanitize_sum(h.into_vec(), &h_rel, ledger)?)?;
            sanitized.push((g, h));
        }

        let steps: Vec<Vec<f64>> = sanitized
            .into_par_iter()
            .enumerate()
            .map(|(j, (g, h))| {
                symmetrize(&h)
                    .and_then(|h| LuFactor::new(&h))
                    .and_then(|lu| lu.solve_vec(&g))
                    .map_err(|e| Error::SolveFailed {
                        iteration: t,
                        class: j,
                        source: Box::new(e),
                    })
            })
            .collect::<Result<_>>()?;
        for (j, step) in steps.iter().enumerate() {
            crate::linalg::axpy(weights.theta.row_mut(j), -config.eta, step);
        }
        objective.push(batch_objective(&loss, &weights, data)?);
    }
    Ok(TrainReport::new(config, weights, objective, ledger, started))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::accountant::Method;
    use crate::sanitize::ClipConfig;

    fn data() -> FeatureDataset {
        let f = Matrix::from_rows(&[
            vec![1.0, 0.2],
            vec![0.3, -1.0],
            vec![-0.7, 0.4],
            vec![0.9, 0.9],
            vec![-0.2, -0.6],
        ])
        .unwrap();
        FeatureDataset::single_label(f, &[0, 1, 2, 0, 1], 3).unwrap()
    }

    #[test]
    fn ledger_total_is_t_over_sigma_squared() {
        let mut cfg = SolverConfig::new(Method::Newton);
        cfg.iterations = 4;
        cfg.sigma = 3.0;
        cfg.lambda = 1.0;
        cfg.clip = Some(ClipConfig::uniform(1.0).unwrap());
        let mut ledger = ZcdpLedger::new();
        train_dp_newton(&data(), &cfg, &mut ledger).unwrap();
        assert_eq!(ledger.len(), 4 * 3 * 2);
        assert!((ledger.total_rho() - 4.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn singular_hessian_names_iteration_and_class() {
        // all features along one axis: the 2x2 Hessian has rank one
        let f = Matrix::from_rows(&[vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap();
        let ds = FeatureDataset::single_label(f, &[0, 1], 2).unwrap();
        let cfg = SolverConfig::new(Method::Newton);
        match train_dp_newton(&ds, &cfg, &mut ZcdpLedger::new()) {
            Err(Error::SolveFailed { iteration: 0, class: 0, .. }) => {}
            other => panic!("expected solve failure, got {other:?}"),
        }
    }

    #[test]
    fn rejects_weighted_quadratic() {
        let mut cfg = SolverConfig::new(Method::Newton);
        cfg.loss = Loss::WeightedQuadratic { alpha: 1.0 };
        assert!(train_dp_newton(&data(), &cfg, &mut ZcdpLedger::new()).is_err());
    }
}
