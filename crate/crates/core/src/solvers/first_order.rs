use std::time::Instant;

use super::stats::clipped_gradient_sum;
use super::{AdamConfig, Optimizer, SolverConfig, TrainReport};
use crate::accountant::ZcdpLedger;
use crate::data::FeatureDataset;
use crate::error::{Error, Result};
use crate::loss::batch_objective;
use crate::model::WeightMatrix;
use crate::sanitize::{sanitize_sum, NoiseKey, Release, Statistic};

/// Optimizer state over the flattened parameter vector (θ row-major, then bias).
pub(super) enum Stepper {
    Sgd,
    Adam {
        cfg: AdamConfig,
        first: Vec<f64>,
        second: Vec<f64>,
        step: i32,
    },
}

impl Stepper {
    pub(super) fn new(kind: Optimizer, cfg: AdamConfig, len: usize) -> Self {
        match kind {
            Optimizer::Sgd => Stepper::Sgd,
            Optimizer::Adam => Stepper::Adam {
                cfg,
                first: vec![0.0; len],
                second: vec![0.0; len],
                step: 0,
            },
        }
    }

    /// Turns a gradient into the update direction, in place.
    pub(super) fn direction(&mut self, grad: &mut [f64]) {
        if let Stepper::Adam {
            cfg,
            first,
            second,
            step,
        } = self
        {
            *step += 1;
            let c1 = 1.0 - cfg.beta1.powi(*step);
            let c2 = 1.0 - cfg.beta2.powi(*step);
            for ((g, m), v) in grad.iter_mut().zip(first.iter_mut()).zip(second.iter_mut()) {
                *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * *g;
                *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * *g * *g;
                *g = (*m / c1) / ((*v / c2).sqrt() + cfg.eps);
            }
        }
    }
}

pub(super) fn apply_flat(weights: &mut WeightMatrix, step: &[f64], eta: f64) {
    let md = weights.theta.rows() * weights.theta.cols();
    for (t, s) in weights.theta.as_mut_slice().iter_mut().zip(&step[..md]) {
        *t -= eta * s;
    }
    if let Some(b) = &mut weights.bias {
        for (bj, s) in b.iter_mut().zip(&step[md..]) {
            *bj -= eta * s;
        }
    }
}

pub(super) fn gradient_release(config: &SolverConfig, n: usize, iteration: usize) -> Release {
    let sensitivity = config.clip.map_or(1.0, |c| c.gradient);
    Release::new(
        sensitivity,
        config.sigma,
        n as f64,
        NoiseKey::new(config.seed, iteration, 0, Statistic::Gradient),
    )
}

/// DP-SGD generalized to any first-order optimizer: per-example gradients
/// are clipped jointly to `C_g`, summed, noised with std `σC_g`, divided by
/// n, and handed to SGD or Adam. Weight decay `λθ` is added to the
/// sanitized gradient.
pub fn train_dp_first_order(data: &FeatureDataset, config: &SolverConfig, ledger: &mut ZcdpLedger) -> Result<TrainReport> {
    config.validate()?;
    let started = Instant::now();
    let mut weights = config.initial_weights(data);
    let clip = config.clip.map(|c| c.gradient);
    let md = data.classes() * data.dim();
    let mut stepper = Stepper::new(config.optimizer, config.adam, md + weights.bias.as_ref().map_or(0, Vec::len));
    let mut average = config.average_iterates.then(|| WeightMatrix {
        theta: crate::linalg::Matrix::zeros(data.classes(), data.dim()),
        bias: weights.bias.as_ref().map(|b| vec![0.0; b.len()]),
    });
    let mut objective = Vec::with_capacity(config.iterations);

    for t in 0..config.iterations {
        let raw = clipped_gradient_sum(data, &weights, &config.loss, clip)?;
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { iteration: t });
        }
        let mut grad = sanitize_sum(raw, &gradient_release(config, data.len(), t), ledger)?;
        if config.lambda > 0.0 {
            for (g, w) in grad[..md].iter_mut().zip(weights.theta.as_slice()) {
                *g += config.lambda * w;
            }
        }
        stepper.direction(&mut grad);
        apply_flat(&mut weights, &grad, config.eta);
        if !weights.is_finite() {
            return Err(Error::Diverged { iteration: t });
        }
        if let Some(avg) = &mut average {
            avg.theta.add_scaled(&weights.theta, 1.0)?;
            if let (Some(a), Some(b)) = (&mut avg.bias, &weights.bias) {
                crate::linalg::axpy(a, 1.0, b);
            }
        }
        objective.push(batch_objective(&config.loss, &weights, data)?);
    }

    if let Some(avg) = average {
        weights = avg.scaled(1.0 / config.iterations as f64);
    }
    Ok(TrainReport::new(config, weights, objective, ledger, started))
}
