use std::time::Instant;

use super::first_order::gradient_release;
use super::stats::{clip_features, clipped_gradient_sum, gram};
use super::{SolverConfig, TrainReport};
use crate::accountant::ZcdpLedger;
use crate::data::FeatureDataset;
use crate::error::{Error, Result};
use crate::linalg::{symmetrize, LuFactor, Matrix};
use crate::loss::batch_objective;
use crate::sanitize::{sanitize_sum, NoiseKey, Release, Statistic};

/// First-order training preconditioned by a private feature covariance.
///
/// `G̃ = (1/n)Σx̃ᵢx̃ᵢᵀ + noise(σC_G²/n) + λI` is released once (features
/// clipped to `C_G`), symmetrized and factored. Each step then releases the
/// jointly clipped gradient sum exactly as the first-order method does and
/// updates `θ ← θ − η g̃ G̃⁻¹`, acting on the feature dimension. A bias, if
/// present, takes the plain gradient step.
pub fn train_dp_fc(data: &FeatureDataset, config: &SolverConfig, ledger: &mut ZcdpLedger) -> Result<TrainReport> {
    config.validate()?;
    let started = Instant::now();
    let (m, d, n) = (data.classes(), data.dim(), data.len());
    let c_feat = config.clip.map_or(1.0, |c| c.feature);

    let clipped = clip_features(data.features(), config.clip.map(|c| c.feature));
    let cov = sanitize_sum(
        gram(&clipped).into_vec(),
        &Release::new(
            c_feat * c_feat,
            config.sigma,
            n as f64,
            NoiseKey::new(config.seed, 0, 0, Statistic::Gram),
        ),
        ledger,
    )?;
    let mut cov = symmetrize(&Matrix::from_row_major(d, d, cov)?)?;
    cov.add_diagonal(config.lambda);
    let precond = LuFactor::new(&cov).map_err(|e| Error::SolveFailed {
        iteration: 0,
        class: 0,
        source: Box::new(e),
    })?;

    let mut weights = config.initial_weights(data);
    let clip = config.clip.map(|c| c.gradient);
    let mut objective = Vec::with_capacity(config.iterations);
    for t in 0..config.iterations {
        let raw = clipped_gradient_sum(data, &weights, &config.loss, clip)?;
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { iteration: t });
        }
        let grad = sanitize_sum(raw, &gradient_release(config, n, t), ledger)?;
        // (g̃ G̃⁻¹)ᵀ = G̃⁻¹ g̃ᵀ since G̃ is symmetric
        let g_t = Matrix::from_fn(d, m, |a, j| grad[j * d + a]);
        let step = precond.solve_matrix(&g_t)?;
        for j in 0..m {
            for a in 0..d {
                weights.theta[(j, a)] -= config.eta * step[(a, j)];
            }
        }
        if let Some(b) = &mut weights.bias {
            crate::linalg::axpy(b, -config.eta, &grad[m * d..]);
        }
        if !weights.is_finite() {
            return Err(Error::Diverged { iteration: t });
        }
        objective.push(batch_objective(&config.loss, &weights, data)?);
    }
    Ok(TrainReport::new(config, weights, objective, ledger, started))
}
