use serde::{Deserialize, Serialize};

use crate::error::{DataError, Result};
use crate::linalg::Matrix;

/// `n × d` features plus the positive classes of each example, stored as
/// CSR offsets into a flat index array.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureDataset {
    features: Matrix,
    offsets: Vec<usize>,
    indices: Vec<u32>,
    classes: usize,
    max_positives: usize,
}

fn invariant(msg: impl Into<String>) -> DataError {
    DataError::Invariant(msg.into())
}

impl FeatureDataset {
    /// Builds a dataset from per-example positive lists. `max_positives` is
    /// the declared cap `k`; it may exceed the largest list but never be
    /// smaller.
    pub fn new(features: Matrix, positives: &[Vec<u32>], classes: usize, max_positives: usize) -> Result<Self> {
        let mut offsets = Vec::with_capacity(positives.len() + 1);
        offsets.push(0);
        let mut indices = Vec::new();
        for row in positives {
            indices.extend_from_slice(row);
            offsets.push(indices.len());
        }
        Self::from_csr(features, offsets, indices, classes, max_positives)
    }

    pub fn from_csr(
        features: Matrix,
        offsets: Vec<usize>,
        indices: Vec<u32>,
        classes: usize,
        max_positives: usize,
    ) -> Result<Self> {
        let (n, d) = features.shape();
        if n == 0 || d == 0 {
            return Err(invariant(format!("need n >= 1 and d >= 1, got n={n}, d={d}")).into());
        }
        if classes == 0 {
            return Err(invariant("need at least one class").into());
        }
        if offsets.len() != n + 1 || offsets[0] != 0 || offsets[n] != indices.len() {
            return Err(invariant(format!(
                "label offsets must have n+1={} entries spanning {} indices",
                n + 1,
                indices.len()
            ))
            .into());
        }
        if let Some(pos) = features.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(DataError::NonFinite {
                row: pos / d,
                col: pos % d,
            }
            .into());
        }
        for i in 0..n {
            let (lo, hi) = (offsets[i], offsets[i + 1]);
            if hi < lo {
                return Err(invariant(format!("label offsets decrease at row {i}")).into());
            }
            let row = &indices[lo..hi];
            if row.len() > max_positives {
                return Err(invariant(format!(
                    "row {i} has {} positives, more than k={max_positives}",
                    row.len()
                ))
                .into());
            }
            if let Some(&bad) = row.iter().find(|&&j| j as usize >= classes) {
                return Err(invariant(format!("row {i}: class {bad} >= m={classes}")).into());
            }
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(invariant(format!(
                    "row {i}: class indices must be strictly increasing (no duplicates)"
                ))
                .into());
            }
        }
        Ok(FeatureDataset {
            features,
            offsets,
            indices,
            classes,
            max_positives,
        })
    }

    /// Single-label dataset from one class index per example.
    pub fn single_label(features: Matrix, labels: &[u32], classes: usize) -> Result<Self> {
        let rows: Vec<Vec<u32>> = labels.iter().map(|&c| vec![c]).collect();
        if rows.len() != features.rows() {
            return Err(invariant(format!(
                "{} labels for {} feature rows",
                rows.len(),
                features.rows()
            ))
            .into());
        }
        Self::new(features, &rows, classes, 1)
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    /// The positive-class cap `k`.
    pub fn max_positives(&self) -> usize {
        self.max_positives
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn positives(&self, i: usize) -> &[u32] {
        &self.indices[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn label(&self, i: usize, j: usize) -> f64 {
        if self.positives(i).binary_search(&(j as u32)).is_ok() {
            1.0
        } else {
            0.0
        }
    }

    /// Writes `y_i·` into `buf` (length m).
    pub fn dense_labels_into(&self, i: usize, buf: &mut [f64]) {
        buf.iter_mut().for_each(|v| *v = 0.0);
        for &j in self.positives(i) {
            buf[j as usize] = 1.0;
        }
    }

    /// Copy of the dataset restricted to `rows`, in the given order.
    pub fn select(&self, rows: &[usize]) -> Result<Self> {
        let d = self.dim();
        let mut feats = Vec::with_capacity(rows.len() * d);
        let mut positives = Vec::with_capacity(rows.len());
        for &i in rows {
            if i >= self.len() {
                return Err(invariant(format!("row {i} out of range")).into());
            }
            feats.extend_from_slice(self.features.row(i));
            positives.push(self.positives(i).to_vec());
        }
        let features = Matrix::from_row_major(rows.len(), d, feats)?;
        Self::new(features, &positives, self.classes, self.max_positives)
    }

    /// Splits into the first `n_first` rows and the rest.
    pub fn split_at(&self, n_first: usize) -> Result<(Self, Self)> {
        let first: Vec<usize> = (0..n_first.min(self.len())).collect();
        let rest: Vec<usize> = (n_first.min(self.len())..self.len()).collect();
        Ok((self.select(&first)?, self.select(&rest)?))
    }

    /// Appends a constant feature, so a bias can be learned as an ordinary
    /// weight. The constant counts toward any feature clipping.
    pub fn with_constant_feature(&self, value: f64) -> Result<Self> {
        let (n, d) = self.features.shape();
        let features = Matrix::from_fn(n, d + 1, |i, j| {
            if j < d {
                self.features[(i, j)]
            } else {
                value
            }
        });
        Self::from_csr(
            features,
            self.offsets.clone(),
            self.indices.clone(),
            self.classes,
            self.max_positives,
        )
    }

    /// Largest per-example feature norm.
    pub fn max_feature_norm(&self) -> f64 {
        self.features
            .row_iter()
            .map(crate::linalg::norm2)
            .fold(0.0, f64::max)
    }

    /// Whether every example has exactly one positive class.
    pub fn is_single_label(&self) -> bool {
        self.offsets.windows(2).all(|w| w[1] - w[0] == 1)
    }
}
