//! Norm clipping and Gaussian noise.
//!
//! Every noise tensor is drawn from its own ChaCha20 stream whose 256-bit
//! seed is `SHA-256(tag ‖ seed ‖ iteration ‖ class ‖ statistic)`, so a draw
//! depends only on its [`NoiseKey`] and never on the order in which classes
//! or iterations are processed. Normals come from the Box–Muller transform
//! applied to consecutive pairs of uniforms from that stream.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::accountant::ZcdpLedger;
use crate::error::{Error, Result};
use crate::linalg::norm2;

const STREAM_TAG: &[u8] = b"dplp-noise-v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    Gradient,
    Hessian,
    Gram,
    ClassGram,
    ClassRhs,
}

impl Statistic {
    fn id(self) -> u8 {
        match self {
            Statistic::Gradient => 0,
            Statistic::Hessian => 1,
            Statistic::Gram => 2,
            Statistic::ClassGram => 3,
            Statistic::ClassRhs => 4,
        }
    }
}

/// Identifies exactly one noise draw within a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NoiseKey {
    pub seed: u64,
    pub iteration: u64,
    pub class: u64,
    pub statistic: Statistic,
}

impl NoiseKey {
    pub fn new(seed: u64, iteration: usize, class: usize, statistic: Statistic) -> Self {
        NoiseKey {
            seed,
            iteration: iteration as u64,
            class: class as u64,
            statistic,
        }
    }

    fn rng(&self) -> ChaCha20Rng {
        let mut h = Sha256::new();
        h.update(STREAM_TAG);
        h.update(self.seed.to_le_bytes());
        h.update(self.iteration.to_le_bytes());
        h.update(self.class.to_le_bytes());
        h.update([self.statistic.id()]);
        ChaCha20Rng::from_seed(h.finalize().into())
    }
}

/// Per-example clip norms. Feature clipping bounds ‖x‖ (Newton, least
/// squares, the covariance in DP-FC); gradient clipping bounds the joint
/// m×d per-example gradient (first-order, DP-FC).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClipConfig {
    pub feature: f64,
    pub gradient: f64,
}

impl ClipConfig {
    pub fn new(feature: f64, gradient: f64) -> Result<Self> {
        let c = ClipConfig { feature, gradient };
        c.validate()?;
        Ok(c)
    }

    pub fn uniform(c: f64) -> Result<Self> {
        Self::new(c, c)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("feature", self.feature), ("gradient", self.gradient)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "{name} clip norm must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }
}

fn check_clip(c: f64) -> Result<()> {
    if c > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "clip norm must be positive, got {c}"
        )))
    }
}

/// Scales `v` in place to norm at most `c` and returns the factor applied.
pub fn clip_in_place(v: &mut [f64], c: f64) -> Result<f64> {
    check_clip(c)?;
    let norm = norm2(v);
    if !norm.is_finite() {
        return Err(Error::NonFinite("vector to clip".into()));
    }
    let scale = clip_factor(norm, c);
    if scale < 1.0 {
        v.iter_mut().for_each(|x| *x *= scale);
    }
    Ok(scale)
}

/// `min(1, c / norm)`, with zero vectors left alone.
pub fn clip_factor(norm: f64, c: f64) -> f64 {
    if norm > c {
        c / norm
    } else {
        1.0
    }
}

/// `v · min{1, C/‖v‖₂}`
pub fn clip_l2(v: &[f64], c: f64) -> Result<Vec<f64>> {
    let mut out = v.to_vec();
    clip_in_place(&mut out, c)?;
    Ok(out)
}

/// `len` i.i.d. N(0, std²) draws from the stream for `key`.
pub fn gaussian_noise(len: usize, std: f64, key: &NoiseKey) -> Result<Vec<f64>> {
    if !(std >= 0.0 && std.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "noise standard deviation must be finite and non-negative, got {std}"
        )));
    }
    if std == 0.0 {
        return Ok(vec![0.0; len]);
    }
    let mut rng = key.rng();
    let mut out = Vec::with_capacity(len + 1);
    while out.len() < len {
        let u1 = 1.0 - rng.gen::<f64>(); // (0, 1]
        let u2: f64 = rng.gen();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (2.0 * PI * u2).sin_cos();
        out.push(std * r * c);
        out.push(std * r * s);
    }
    out.truncate(len);
    Ok(out)
}

/// Parameters of one Gaussian release of a summed statistic.
#[derive(Clone, Copy, Debug)]
pub struct Release {
    /// L2 (or Frobenius) sensitivity of the raw sum.
    pub sensitivity: f64,
    /// Noise multiplier: noise std is `sigma * sensitivity`.
    pub sigma: f64,
    /// The noised sum is divided by this.
    pub divisor: f64,
    /// Fraction of `1/(2σ²)` charged by this call, for statistics released
    /// class by class whose privacy cost is that of the whole concatenation.
    pub share: f64,
    pub key: NoiseKey,
}

impl Release {
    pub fn new(sensitivity: f64, sigma: f64, divisor: f64, key: NoiseKey) -> Self {
        Release {
            sensitivity,
            sigma,
            divisor,
            share: 1.0,
            key,
        }
    }

    pub fn with_share(mut self, share: f64) -> Self {
        self.share = share;
        self
    }

    pub fn noise_std(&self) -> f64 {
        self.sigma * self.sensitivity
    }

    pub fn rho(&self) -> f64 {
        if self.sigma == 0.0 {
            0.0
        } else {
            self.share / (2.0 * self.sigma * self.sigma)
        }
    }
}

/// Adds calibrated noise to `raw_sum`, divides by the release divisor and
/// records the cost in `ledger`. With `sigma == 0` nothing is drawn or
/// charged and the result is exactly `raw_sum / divisor`.
pub fn sanitize_sum(mut raw_sum: Vec<f64>, release: &Release, ledger: &mut ZcdpLedger) -> Result<Vec<f64>> {
    if !(release.sensitivity > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sensitivity must be positive, got {}",
            release.sensitivity
        )));
    }
    if !(release.divisor > 0.0) {
        return Err(Error::InvalidArgument("release divisor must be positive".into()));
    }
    if !(release.sigma >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "noise multiplier must be non-negative, got {}",
            release.sigma
        )));
    }
    if release.sigma > 0.0 {
        let noise = gaussian_noise(raw_sum.len(), release.noise_std(), &release.key)?;
        let key = release.key;
        ledger.charge_release(
            key,
            format!("{:?} t={} j={}", key.statistic, key.iteration, key.class),
            release.rho(),
        )?;
        for (v, z) in raw_sum.iter_mut().zip(noise) {
            *v += z;
        }
    }
    raw_sum.iter_mut().for_each(|v| *v /= release.divisor);
    Ok(raw_sum)
}
