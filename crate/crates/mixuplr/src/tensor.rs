//! Dense row-major tensor of `f64` values, the single numeric carrier.

use crate::error::{Error, Result};

/// Dense row-major array with an explicit shape.
///
/// Invariants: `data.len()` equals the product of the extents, and every
/// value is finite. Constructors reject NaN/Inf; internal operations assert
/// finiteness in debug builds via [`Tensor::debug_assert_finite`].
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    /// Builds a tensor, validating length and finiteness.
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(Error::DimensionMismatch { expected, got: data.len() });
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("tensor data"));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Self { shape, data: vec![0.0; len] }
    }

    /// 2-D tensor from equally sized rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyInput("from_rows"));
        }
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::DimensionMismatch { expected: cols, got: row.len() });
            }
            data.extend_from_slice(row);
        }
        Tensor::new(vec![rows.len(), cols], data)
    }

    /// 1-D tensor wrapping a flat vector.
    pub fn from_vec(data: Vec<f64>) -> Result<Self> {
        let len = data.len();
        Tensor::new(vec![len], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Number of rows of a 2-D tensor (or 1 for a 1-D tensor viewed as a row).
    pub fn n_rows(&self) -> usize {
        match self.shape.len() {
            2 => self.shape[0],
            1 => 1,
            _ => panic!("n_rows on tensor of rank {}", self.shape.len()),
        }
    }

    /// Number of columns of a 2-D tensor (or the length of a 1-D tensor).
    pub fn n_cols(&self) -> usize {
        match self.shape.len() {
            2 => self.shape[1],
            1 => self.shape[0],
            _ => panic!("n_cols on tensor of rank {}", self.shape.len()),
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.n_cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let c = self.n_cols();
        &mut self.data[i * c..(i + 1) * c]
    }

    /// New 2-D tensor keeping only the listed rows, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Tensor {
        let c = self.n_cols();
        let mut data = Vec::with_capacity(idx.len() * c);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Tensor { shape: vec![idx.len(), c], data }
    }

    /// Stacks two 2-D tensors with equal column counts.
    pub fn vstack(&self, other: &Tensor) -> Result<Tensor> {
        if self.n_cols() != other.n_cols() {
            return Err(Error::DimensionMismatch { expected: self.n_cols(), got: other.n_cols() });
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Tensor { shape: vec![self.n_rows() + other.n_rows(), self.n_cols()], data })
    }

    /// Debug-mode finiteness assertion, called after numeric operations.
    #[inline]
    pub fn debug_assert_finite(&self, context: &str) {
        debug_assert!(
            self.data.iter().all(|v| v.is_finite()),
            "non-finite tensor after {context}"
        );
    }
}
