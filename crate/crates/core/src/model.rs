use serde::{Deserialize, Serialize};

use crate::data::FeatureDataset;
use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};

/// The `m × d` linear head θ and an optional per-class bias.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightMatrix {
    pub theta: Matrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias: Option<Vec<f64>>,
}

impl WeightMatrix {
    pub fn zeros(classes: usize, dim: usize) -> Self {
        WeightMatrix {
            theta: Matrix::zeros(classes, dim),
            bias: None,
        }
    }

    pub fn with_bias(mut self, value: f64) -> Self {
        self.bias = Some(vec![value; self.theta.rows()]);
        self
    }

    pub fn classes(&self) -> usize {
        self.theta.rows()
    }

    pub fn dim(&self) -> usize {
        self.theta.cols()
    }

    pub fn check_compatible(&self, data: &FeatureDataset) -> Result<()> {
        if self.classes() != data.classes() || self.dim() != data.dim() {
            return Err(Error::dim(
                "weights vs dataset",
                format!("{}x{}", data.classes(), data.dim()),
                format!("{}x{}", self.classes(), self.dim()),
            ));
        }
        if let Some(b) = &self.bias {
            if b.len() != self.classes() {
                return Err(Error::dim("bias length", self.classes(), b.len()));
            }
        }
        Ok(())
    }

    /// `⟨θⱼ, x⟩ + bⱼ`
    pub fn logit(&self, j: usize, x: &[f64]) -> f64 {
        let z = dot(self.theta.row(j), x);
        match &self.bias {
            Some(b) => z + b[j],
            None => z,
        }
    }

    /// Index of the largest logit; ties go to the smallest class index.
    pub fn predict(&self, x: &[f64]) -> usize {
        let mut best = 0;
        let mut best_z = f64::NEG_INFINITY;
        for j in 0..self.classes() {
            let z = self.logit(j, x);
            if z > best_z {
                best = j;
                best_z = z;
            }
        }
        best
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.theta.scale(c);
        if let Some(b) = &mut out.bias {
            b.iter_mut().for_each(|v| *v *= c);
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.theta.is_finite() && self.bias.iter().flatten().all(|v| v.is_finite())
    }
}
