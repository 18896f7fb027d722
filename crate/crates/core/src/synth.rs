//! Gaussian-cluster stand-ins for extracted features.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::data::FeatureDataset;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    pub m: usize,
    /// Minimum pairwise distance between class means.
    pub margin: f64,
    /// Per-coordinate standard deviation around each mean.
    pub noise: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
}

fn default_train_fraction() -> f64 {
    0.8
}

impl SyntheticSpec {
    pub fn new(n: usize, d: usize, m: usize, margin: f64, noise: f64, seed: u64) -> Self {
        SyntheticSpec {
            n,
            d,
            m,
            margin,
            noise,
            seed,
            train_fraction: default_train_fraction(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.d == 0 || self.m == 0 {
            return Err(Error::InvalidArgument("need d >= 1 and m >= 1".into()));
        }
        if self.m > self.n {
            return Err(Error::InvalidArgument(format!(
                "cannot place {} classes in {} examples",
                self.m, self.n
            )));
        }
        if !(self.margin >= 0.0 && self.margin.is_finite() && self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::InvalidArgument(
                "margin and noise must be finite and non-negative".into(),
            ));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidArgument("train_fraction must lie in (0, 1)".into()));
        }
        let n_train = self.n_train();
        if n_train == 0 || n_train == self.n {
            return Err(Error::InvalidArgument(format!(
                "n={} too small for a train/test split",
                self.n
            )));
        }
        Ok(())
    }

    pub fn n_train(&self) -> usize {
        (self.n as f64 * self.train_fraction).round() as usize
    }
}

fn normal(rng: &mut ChaCha20Rng) -> f64 {
    let u1 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// Class means with minimum pairwise distance exactly `margin`.
fn class_means(spec: &SyntheticSpec, rng: &mut ChaCha20Rng) -> Vec<Vec<f64>> {
    let mut means: Vec<Vec<f64>> = (0..spec.m)
        .map(|_| (0..spec.d).map(|_| normal(rng)).collect())
        .collect();
    let min_dist = if spec.m > 1 {
        let mut best = f64::INFINITY;
        for a in 0..spec.m {
            for b in a + 1..spec.m {
                let d2: f64 = means[a].iter().zip(&means[b]).map(|(x, y)| (x - y).powi(2)).sum();
                best = best.min(d2.sqrt());
            }
        }
        best
    } else {
        crate::linalg::norm2(&means[0])
    };
    let scale = if min_dist > 0.0 { spec.margin / min_dist } else { 0.0 };
    for mu in &mut means {
        mu.iter_mut().for_each(|v| *v *= scale);
    }
    means
}

/// Draws `n` single-label examples from `m` Gaussian clusters and splits
/// them into train and test sets. Classes are balanced up to one example,
/// features are rounded to f32 so that a save/load round trip is lossless.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(FeatureDataset, FeatureDataset)> {
    spec.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let means = class_means(spec, &mut rng);
    let mut labels: Vec<u32> = (0..spec.n).map(|i| (i % spec.m) as u32).collect();
    labels.shuffle(&mut rng);
    let mut feats = Vec::with_capacity(spec.n * spec.d);
    for &y in &labels {
        for &mu in &means[y as usize] {
            let v = mu + spec.noise * normal(&mut rng);
            feats.push(v as f32 as f64);
        }
    }
    let features = Matrix::from_row_major(spec.n, spec.d, feats)?;
    let all = FeatureDataset::single_label(features, &labels, spec.m)?;
    all.split_at(spec.n_train())
}
