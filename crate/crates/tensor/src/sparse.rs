//! Compressed sparse rows for mostly-zero constant inputs.
//!
//! One-hot observation windows are overwhelmingly zero; multiplying them
//! densely wastes most of a training step. A graph constant created with
//! [`Graph::sparse_constant`](crate::Graph::sparse_constant) keeps this form
//! alongside its dense value, and matrix products with it on the left use
//! the sparse kernels below in both passes.

use crate::error::TensorError;
use crate::tensor::{Scalar, Tensor};

/// Row-major CSR matrix `[rows, cols]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseRows<S> {
    cols: usize,
    row_ptr: Vec<usize>,
    idx: Vec<usize>,
    val: Vec<S>,
}

impl<S: Scalar> SparseRows<S> {
    /// Builds from per-row `(column, value)` lists.
    pub fn from_rows<I, R>(cols: usize, rows: I) -> Result<Self, TensorError>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = (usize, S)>,
    {
        let mut out = Self {
            cols,
            row_ptr: vec![0],
            idx: Vec::new(),
            val: Vec::new(),
        };
        for row in rows {
            for (c, v) in row {
                if c >= cols {
                    return Err(TensorError::ShapeMismatch {
                        op: "sparse row",
                        lhs: vec![cols],
                        rhs: vec![c],
                    });
                }
                out.idx.push(c);
                out.val.push(v);
            }
            out.row_ptr.push(out.idx.len());
        }
        Ok(out)
    }

    /// Keeps the non-zero entries of a rank-2 tensor.
    pub fn from_dense(t: &Tensor<S>) -> Result<Self, TensorError> {
        let [_, cols] = t.shape() else {
            return Err(TensorError::ShapeMismatch {
                op: "sparse from dense",
                lhs: t.shape().to_vec(),
                rhs: vec![0, 0],
            });
        };
        let cols = *cols;
        let data = t.data();
        Self::from_rows(
            cols,
            data.chunks(cols.max(1))
                .take(if cols == 0 { 0 } else { data.len() / cols })
                .map(|row| {
                    row.iter()
                        .enumerate()
                        .filter(|(_, &v)| v != S::zero())
                        .map(|(c, &v)| (c, v))
                }),
        )
    }

    pub fn rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.idx.len()
    }

    pub fn to_dense(&self) -> Tensor<S> {
        let mut out = Tensor::zeros([self.rows(), self.cols]);
        let d = out.data_mut();
        for r in 0..self.rows() {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                d[r * self.cols + self.idx[k]] = d[r * self.cols + self.idx[k]] + self.val[k];
            }
        }
        out
    }

    /// Rows `start..start + len`.
    pub fn slice_rows(&self, start: usize, len: usize) -> Self {
        let (lo, hi) = (self.row_ptr[start], self.row_ptr[start + len]);
        Self {
            cols: self.cols,
            row_ptr: self.row_ptr[start..=start + len].iter().map(|p| p - lo).collect(),
            idx: self.idx[lo..hi].to_vec(),
            val: self.val[lo..hi].to_vec(),
        }
    }

    /// `self @ w` for dense `w` of shape `[cols, n]`.
    pub fn matmul(&self, w: &Tensor<S>) -> Tensor<S> {
        let n = w.shape()[1];
        let mut out = Tensor::zeros([self.rows(), n]);
        let (wd, od) = (w.data(), out.data_mut());
        for r in 0..self.rows() {
            let dst = &mut od[r * n..(r + 1) * n];
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let v = self.val[k];
                let src = &wd[self.idx[k] * n..(self.idx[k] + 1) * n];
                for (o, &x) in dst.iter_mut().zip(src) {
                    *o = *o + v * x;
                }
            }
        }
        out
    }

    /// `selfᵀ @ g` for dense `g` of shape `[rows, n]`.
    pub fn t_matmul(&self, g: &Tensor<S>) -> Tensor<S> {
        let n = g.shape()[1];
        let mut out = Tensor::zeros([self.cols, n]);
        let (gd, od) = (g.data(), out.data_mut());
        for r in 0..self.rows() {
            let src = &gd[r * n..(r + 1) * n];
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let v = self.val[k];
                let dst = &mut od[self.idx[k] * n..(self.idx[k] + 1) * n];
                for (o, &x) in dst.iter_mut().zip(src) {
                    *o = *o + v * x;
                }
            }
        }
        out
    }
}
