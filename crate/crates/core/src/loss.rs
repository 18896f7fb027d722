//! Per-logit losses `ℓ(z, y)` with their first and second derivatives in `z`.

use serde::{Deserialize, Serialize};

use crate::data::FeatureDataset;
use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::model::WeightMatrix;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Loss {
    /// Sigmoid cross-entropy, `−y log σ(z) − (1−y) log(1−σ(z))`.
    #[default]
    Logistic,
    /// `½(z − y)²`
    Squared,
    /// `½(y(z − y)² + αz²)` for binary `y`.
    WeightedQuadratic { alpha: f64 },
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Loss {
    pub fn parse(name: &str, alpha: f64) -> Result<Self> {
        match name {
            "logistic" => Ok(Loss::Logistic),
            "squared" => Ok(Loss::Squared),
            "weighted_quadratic" => Ok(Loss::WeightedQuadratic { alpha }),
            other => Err(Error::InvalidArgument(format!("unknown loss {other:?}"))),
        }
    }

    /// Certified bound on `|ℓ″|`. For the weighted quadratic this is `1 + α`,
    /// which only matters as a diagnostic: that loss is solved in closed form.
    pub fn curvature_bound(&self) -> f64 {
        match self {
            Loss::Logistic => 0.25,
            Loss::Squared => 1.0,
            Loss::WeightedQuadratic { alpha } => 1.0 + alpha,
        }
    }

    fn check_label(&self, y: f64) -> Result<()> {
        let ok = match self {
            Loss::WeightedQuadratic { .. } => y == 0.0 || y == 1.0,
            _ => (0.0..=1.0).contains(&y),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "label {y} out of range for {self:?}"
            )))
        }
    }

    pub fn value(&self, z: f64, y: f64) -> Result<f64> {
        self.check_label(y)?;
        Ok(self.value_unchecked(z, y))
    }

    pub fn grad(&self, z: f64, y: f64) -> Result<f64> {
        self.check_label(y)?;
        Ok(self.grad_unchecked(z, y))
    }

    pub fn curv(&self, z: f64, y: f64) -> Result<f64> {
        self.check_label(y)?;
        Ok(self.curv_unchecked(z, y))
    }

    // The *_unchecked variants sit in the training hot loops, where labels
    // come from a validated dataset and are always 0 or 1.

    pub(crate) fn value_unchecked(&self, z: f64, y: f64) -> f64 {
        match *self {
            Loss::Logistic => z.max(0.0) - z * y + (-z.abs()).exp().ln_1p(),
            Loss::Squared => 0.5 * (z - y) * (z - y),
            Loss::WeightedQuadratic { alpha } => 0.5 * (y * (z - y) * (z - y) + alpha * z * z),
        }
    }

    pub(crate) fn grad_unchecked(&self, z: f64, y: f64) -> f64 {
        match *self {
            Loss::Logistic => sigmoid(z) - y,
            Loss::Squared => z - y,
            Loss::WeightedQuadratic { alpha } => y * (z - y) + alpha * z,
        }
    }

    pub(crate) fn curv_unchecked(&self, z: f64, y: f64) -> f64 {
        match *self {
            // σ(z)σ(−z) avoids the cancellation in 1 − σ(z)
            Loss::Logistic => sigmoid(z) * sigmoid(-z),
            Loss::Squared => 1.0,
            Loss::WeightedQuadratic { alpha } => y + alpha,
        }
    }
}

/// `(1/n) Σᵢ Σⱼ ℓ(⟨θⱼ, xᵢ⟩ + bⱼ, y_ij)`
pub fn batch_objective(loss: &Loss, weights: &WeightMatrix, data: &FeatureDataset) -> Result<f64> {
    weights.check_compatible(data)?;
    let mut labels = vec![0.0; data.classes()];
    let mut total = 0.0;
    for i in 0..data.len() {
        data.dense_labels_into(i, &mut labels);
        let x = data.features().row(i);
        for (j, &y) in labels.iter().enumerate() {
            total += loss.value_unchecked(weights.logit(j, x), y);
        }
    }
    Ok(total / data.len() as f64)
}

/// Unnormalized sufficient statistics of the weighted quadratic loss:
/// `A_j = Σ_{i: y_ij=1} xᵢxᵢᵀ`, `b_j = Σ_{i: y_ij=1} xᵢ`, `G = Σᵢ xᵢxᵢᵀ`.
#[derive(Clone, Debug)]
pub struct QuadraticStats {
    pub gram: Matrix,
    pub class_gram: Vec<Matrix>,
    pub class_rhs: Vec<Vec<f64>>,
}

impl QuadraticStats {
    pub fn from_rows(features: &Matrix, data: &FeatureDataset) -> Self {
        let (d, m) = (features.cols(), data.classes());
        let mut gram = Matrix::zeros(d, d);
        let mut class_gram = vec![Matrix::zeros(d, d); m];
        let mut class_rhs = vec![vec![0.0; d]; m];
        for (i, x) in features.row_iter().enumerate() {
            gram.add_outer(x, 1.0);
            for &j in data.positives(i) {
                let j = j as usize;
                class_gram[j].add_outer(x, 1.0);
                crate::linalg::axpy(&mut class_rhs[j], 1.0, x);
            }
        }
        QuadraticStats {
            gram,
            class_gram,
            class_rhs,
        }
    }

    /// `½ Σⱼ (θⱼᵀAⱼθⱼ − 2θⱼᵀbⱼ + αθⱼᵀGθⱼ)`, which equals
    /// `n · batch_objective − ½ Σᵢⱼ y_ij` for the weighted quadratic loss
    /// without bias.
    pub fn quadratic_form(&self, theta: &Matrix, alpha: f64) -> Result<f64> {
        let mut total = 0.0;
        for (j, (a, b)) in self.class_gram.iter().zip(&self.class_rhs).enumerate() {
            let t = theta.row(j);
            let at = a.matvec(t)?;
            let gt = self.gram.matvec(t)?;
            total += dot(t, &at) - 2.0 * dot(t, b) + alpha * dot(t, &gt);
        }
        Ok(0.5 * total)
    }
}
