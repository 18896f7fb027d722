//! Unnoised statistics released by the solvers. These are the quantities
//! whose sensitivities the privacy accounting relies on, exposed so they
//! can be audited on neighboring datasets.

use rayon::prelude::*;

use crate::data::FeatureDataset;
use crate::error::{Error, Result};
use crate::linalg::{axpy, norm2, Matrix};
use crate::loss::Loss;
use crate::model::WeightMatrix;
use crate::sanitize::clip_factor;

/// Examples per block in parallel reductions. Blocks are summed in index
/// order, so results do not depend on the number of threads.
const REDUCE_BLOCK: usize = 256;

/// Copy of `features` with every row clipped to norm `c`; `None` copies.
pub fn clip_features(features: &Matrix, c: Option<f64>) -> Matrix {
    let mut out = features.clone();
    if let Some(c) = c {
        for i in 0..out.rows() {
            let row = out.row_mut(i);
            let s = clip_factor(norm2(row), c);
            if s < 1.0 {
                row.iter_mut().for_each(|v| *v *= s);
            }
        }
    }
    out
}

/// `Σᵢ x̃ᵢx̃ᵢᵀ`
pub fn gram(features: &Matrix) -> Matrix {
    let d = features.cols();
    let mut g = Matrix::zeros(d, d);
    for x in features.row_iter() {
        g.add_outer(x, 1.0);
    }
    g
}

/// Sum over examples of the per-example gradient of `Σⱼ ℓ(θⱼᵀxᵢ + bⱼ, y_ij)`,
/// each clipped jointly (all classes and the bias together) to `clip`.
///
/// Layout: the m×d weight gradient in row-major order, followed by the m
/// bias entries when `weights` has a bias.
pub fn clipped_gradient_sum(
    data: &FeatureDataset,
    weights: &WeightMatrix,
    loss: &Loss,
    clip: Option<f64>,
) -> Result<Vec<f64>> {
    weights.check_compatible(data)?;
    let (m, d) = (data.classes(), data.dim());
    let has_bias = weights.bias.is_some();
    let len = m * d + if has_bias { m } else { 0 };
    let features = data.features();
    let blocks: Vec<Vec<f64>> = (0..data.len())
        .step_by(REDUCE_BLOCK)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|start| {
            let end = (start + REDUCE_BLOCK).min(data.len());
            let mut acc = vec![0.0; len];
            let mut labels = vec![0.0; m];
            let mut dz = vec![0.0; m];
            for i in start..end {
                let x = features.row(i);
                data.dense_labels_into(i, &mut labels);
                for j in 0..m {
                    dz[j] = loss.grad_unchecked(weights.logit(j, x), labels[j]);
                }
                let scale = match clip {
                    Some(c) => {
                        let xx = norm2(x).powi(2) + if has_bias { 1.0 } else { 0.0 };
                        clip_factor(norm2(&dz) * xx.sqrt(), c)
                    }
                    None => 1.0,
                };
                for (j, &g) in dz.iter().enumerate() {
                    if g != 0.0 {
                        axpy(&mut acc[j * d..(j + 1) * d], scale * g, x);
                        if has_bias {
                            acc[m * d + j] += scale * g;
                        }
                    }
                }
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; len];
    for b in &blocks {
        axpy(&mut total, 1.0, b);
    }
    Ok(total)
}

/// `ℓ′` as used by Newton: clamped to [−1, 1] when `clamp` is set, which
/// the squared loss needs for the unit derivative bound (logistic already
/// satisfies it).
fn newton_grad(loss: &Loss, z: f64, y: f64, clamp: bool) -> f64 {
    let g = loss.grad_unchecked(z, y);
    if clamp {
        g.clamp(-1.0, 1.0)
    } else {
        g
    }
}

/// Per-class Newton statistics on pre-clipped features:
/// `g_j = Σᵢ ℓ′(θⱼᵀx̃ᵢ, y_ij) x̃ᵢ` and `H_j = Σᵢ ℓ″(θⱼᵀx̃ᵢ, y_ij) x̃ᵢx̃ᵢᵀ + λI`.
pub fn newton_class_stats(
    clipped: &Matrix,
    data: &FeatureDataset,
    theta_j: &[f64],
    class: usize,
    loss: &Loss,
    lambda: f64,
    clamp: bool,
) -> Result<(Vec<f64>, Matrix)> {
    let d = clipped.cols();
    if theta_j.len() != d || clipped.rows() != data.len() {
        return Err(Error::dim("newton_class_stats", d, theta_j.len()));
    }
    let mut g = vec![0.0; d];
    let mut h = Matrix::zeros(d, d);
    for (i, x) in clipped.row_iter().enumerate() {
        let y = data.label(i, class);
        let z = crate::linalg::dot(theta_j, x);
        axpy(&mut g, newton_grad(loss, z, y, clamp), x);
        h.add_outer(x, loss.curv_unchecked(z, y));
    }
    h.add_diagonal(lambda);
    Ok((g, h))
}
