//! Dense row-major matrices of per-entity vectors.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{Error, Result};

/// Dense row-major matrix, one row per entity.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    dim: usize,
    values: Vec<T>,
}

/// The 32-bit matrix used on every training path.
pub type EmbeddingMatrix = Matrix<f32>;

impl<T: Float> Matrix<T> {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        Self {
            rows,
            dim,
            values: vec![T::zero(); rows * dim],
        }
    }

    pub fn from_vec(rows: usize, dim: usize, values: Vec<T>) -> Result<Self> {
        if values.len() != rows * dim {
            return Err(Error::Shape {
                context: "Matrix::from_vec",
                expected: format!("{} values ({rows}x{dim})", rows * dim),
                actual: format!("{} values", values.len()),
            });
        }
        Ok(Self { rows, dim, values })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != dim {
                return Err(Error::Shape {
                    context: "Matrix::from_rows",
                    expected: format!("row {i} of width {dim}"),
                    actual: format!("width {}", r.len()),
                });
            }
            values.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            dim,
            values,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<T> {
        self.values
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[T]> {
        // `chunks_exact(0)` panics, and a zero-width matrix still has rows.
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.rows == other.rows && self.dim == other.dim
    }

    pub fn cast<U: Float>(&self) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            dim: self.dim,
            values: self
                .values
                .iter()
                .map(|v| U::from(*v).unwrap_or_else(U::nan))
                .collect(),
        }
    }

    /// `self · rhs` where `rhs` is `dim × out`.
    pub fn matmul(&self, rhs: &Matrix<T>) -> Result<Matrix<T>> {
        if self.dim != rhs.rows {
            return Err(Error::Shape {
                context: "Matrix::matmul",
                expected: format!("rhs with {} rows", self.dim),
                actual: format!("{} rows", rhs.rows),
            });
        }
        let mut out = Matrix::zeros(self.rows, rhs.dim);
        for i in 0..self.rows {
            let dst = out.row_mut(i);
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == T::zero() {
                    continue;
                }
                for (d, &b) in dst.iter_mut().zip(rhs.row(k)) {
                    *d = *d + a * b;
                }
            }
        }
        Ok(out)
    }

    /// Accumulates `selfᵀ · rhs` into `acc` (`dim × rhs.dim`), skipping all-zero rows of `rhs`.
    pub fn add_transpose_matmul(&self, rhs: &Matrix<T>, acc: &mut Matrix<T>) -> Result<()> {
        if self.rows != rhs.rows || acc.rows != self.dim || acc.dim != rhs.dim {
            return Err(Error::Shape {
                context: "Matrix::add_transpose_matmul",
                expected: format!(
                    "lhs {}x{}, rhs {}x*, acc {}x{}",
                    self.rows, self.dim, self.rows, self.dim, rhs.dim
                ),
                actual: format!("rhs {}x{}, acc {}x{}", rhs.rows, rhs.dim, acc.rows, acc.dim),
            });
        }
        for i in 0..self.rows {
            let g = rhs.row(i);
            if g.iter().all(|v| *v == T::zero()) {
                continue;
            }
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == T::zero() {
                    continue;
                }
                for (d, &b) in acc.row_mut(k).iter_mut().zip(g) {
                    *d = *d + a * b;
                }
            }
        }
        Ok(())
    }

    pub fn add_assign(&mut self, other: &Matrix<T>) {
        debug_assert!(self.same_shape(other));
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a = *a + *b;
        }
    }

    /// `self += alpha · other`
    pub fn axpy(&mut self, alpha: T, other: &Matrix<T>) {
        debug_assert!(self.same_shape(other));
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a = *a + alpha * *b;
        }
    }

    pub fn scale(&mut self, alpha: T) {
        for a in &mut self.values {
            *a = *a * alpha;
        }
    }

    pub fn squared_norm(&self) -> T {
        self.values.iter().fold(T::zero(), |acc, v| acc + *v * *v)
    }

    pub fn max_abs_diff(&self, other: &Matrix<T>) -> T {
        self.values
            .iter()
            .zip(&other.values)
            .fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs()))
    }
}

#[inline]
pub fn dot<T: Float>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (x, y)| acc + *x * *y)
}

#[inline]
pub fn norm<T: Float>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// Scales `v` to unit L2 norm in place. Returns `false` (leaving `v` untouched) for a zero vector.
pub fn l2_normalize<T: Float>(v: &mut [T]) -> bool {
    let n = norm(v);
    if n == T::zero() || !n.is_finite() {
        return false;
    }
    for x in v.iter_mut() {
        *x = *x / n;
    }
    true
}
