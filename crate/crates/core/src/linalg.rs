//! Dense row-major matrices and the handful of kernels the solvers need.
//!
//! Sums over examples are always accumulated in index order so that a run
//! is bit-reproducible; nothing here reorders a reduction.

use std::ops::{Index, IndexMut};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(d: usize) -> Self {
        let mut m = Matrix::zeros(d, d);
        for i in 0..d {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major data, rejecting wrong lengths and
    /// non-finite entries.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dim(
                "Matrix::from_row_major",
                rows * cols,
                data.len(),
            ));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "matrix entry ({}, {})",
                pos / cols.max(1),
                pos % cols.max(1)
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::dim("Matrix::from_rows", cols, bad.len()));
        }
        Matrix::from_row_major(rows.len(), cols, rows.concat())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        // not chunks_exact: it panics on zero-width matrices
        let cols = self.cols;
        (0..self.rows).map(move |i| &self.data[i * cols..(i + 1) * cols])
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm2(&self.data)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    pub fn add_diagonal(&mut self, s: f64) {
        for i in 0..self.rows.min(self.cols) {
            self[(i, i)] += s;
        }
    }

    /// `self += s * other`.
    pub fn add_scaled(&mut self, other: &Matrix, s: f64) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::dim(
                "Matrix::add_scaled",
                format!("{:?}", self.shape()),
                format!("{:?}", other.shape()),
            ));
        }
        axpy(&mut self.data, s, &other.data);
        Ok(())
    }

    /// In-place rank-one update `self += weight * x xᵀ`. Both triangles are
    /// written with the same value, so a symmetric accumulator stays exactly
    /// symmetric.
    pub fn add_outer(&mut self, x: &[f64], weight: f64) {
        let d = x.len();
        debug_assert_eq!(self.shape(), (d, d));
        for a in 0..d {
            let wa = weight * x[a];
            if wa == 0.0 {
                continue;
            }
            let row = &mut self.data[a * d..(a + 1) * d];
            for (b, r) in row.iter_mut().enumerate().skip(a) {
                *r += wa * x[b];
            }
        }
        for a in 0..d {
            for b in 0..a {
                self.data[a * d + b] = self.data[b * d + a];
            }
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::dim("Matrix::matvec", self.cols, x.len()));
        }
        Ok(self.row_iter().map(|r| dot(r, x)).collect())
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::dim("Matrix::matmul", self.cols, other.rows));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a != 0.0 {
                    axpy(out.row_mut(i), a, other.row(k));
                }
            }
        }
        Ok(out)
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// `y += a * x`
pub fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Returns `acc + weight * x xᵀ`.
pub fn gram_update(acc: &Matrix, x: &[f64], weight: f64) -> Result<Matrix> {
    if !acc.is_square() || acc.rows() != x.len() {
        return Err(Error::dim(
            "gram_update",
            format!("{0}x{0} accumulator", x.len()),
            format!("{}x{}", acc.rows(), acc.cols()),
        ));
    }
    let mut out = acc.clone();
    out.add_outer(x, weight);
    Ok(out)
}

/// `(A + Aᵀ) / 2`
pub fn symmetrize(a: &Matrix) -> Result<Matrix> {
    if !a.is_square() {
        return Err(Error::dim(
            "symmetrize",
            "square matrix",
            format!("{}x{}", a.rows(), a.cols()),
        ));
    }
    let d = a.rows();
    Ok(Matrix::from_fn(d, d, |i, j| 0.5 * (a[(i, j)] + a[(j, i)])))
}

/// LU factorization with partial pivoting, computed once and reused for
/// many right-hand sides.
pub struct LuFactor {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    dim: usize,
}

impl LuFactor {
    pub fn new(a: &Matrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::dim(
                "LuFactor::new",
                "square matrix",
                format!("{}x{}", a.rows(), a.cols()),
            ));
        }
        if !a.is_finite() {
            return Err(Error::NonFinite("matrix to factor".into()));
        }
        let d = a.rows();
        let lu = DMatrix::from_row_slice(d, d, a.as_slice()).lu();
        let pivots = lu.u().diagonal().map(f64::abs);
        let (lo, hi) = (pivots.min(), pivots.max());
        let pivot_ratio = if hi > 0.0 { lo / hi } else { 0.0 };
        if d > 0 && pivot_ratio <= f64::EPSILON * d as f64 {
            return Err(Error::Singular { pivot_ratio });
        }
        Ok(LuFactor { lu, dim: d })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn solve_vec(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.dim {
            return Err(Error::dim("LuFactor::solve_vec", self.dim, b.len()));
        }
        let rhs = nalgebra::DVector::from_column_slice(b);
        let x = self
            .lu
            .solve(&rhs)
            .ok_or(Error::Singular { pivot_ratio: 0.0 })?;
        Ok(x.iter().copied().collect())
    }

    /// Solves `A X = B` for a `d x c` right-hand side.
    pub fn solve_matrix(&self, b: &Matrix) -> Result<Matrix> {
        if b.rows() != self.dim {
            return Err(Error::dim("LuFactor::solve_matrix", self.dim, b.rows()));
        }
        let rhs = DMatrix::from_row_slice(b.rows(), b.cols(), b.as_slice());
        let x = self
            .lu
            .solve(&rhs)
            .ok_or(Error::Singular { pivot_ratio: 0.0 })?;
        Ok(Matrix::from_fn(b.rows(), b.cols(), |i, j| x[(i, j)]))
    }
}

pub fn solve_linear(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    LuFactor::new(a)?.solve_vec(b)
}

pub fn solve_linear_matrix(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    LuFactor::new(a)?.solve_matrix(b)
}
