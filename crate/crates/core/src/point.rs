//! Elements of the ambient space ℝ × ℝ^{m×n} with the trace inner product.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// A pair `(t, X)`: scalar part and an `m × n` matrix part with `m ≤ n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConePoint<T: Real> {
    pub t: T,
    pub x: DMatrix<T>,
}

impl<T: Real> ConePoint<T> {
    pub fn new(t: T, x: DMatrix<T>) -> Self {
        Self { t, x }
    }

    pub fn zeros(m: usize, n: usize) -> Self {
        Self { t: T::zero(), x: DMatrix::zeros(m, n) }
    }

    pub fn m(&self) -> usize {
        self.x.nrows()
    }

    pub fn n(&self) -> usize {
        self.x.ncols()
    }

    pub fn dot(&self, other: &Self) -> T {
        self.t * other.t + self.x.dot(&other.x)
    }

    pub fn norm(&self) -> T {
        self.dot(self).sqrt()
    }

    pub fn scale(&self, s: T) -> Self {
        Self { t: self.t * s, x: &self.x * s }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { t: self.t + other.t, x: &self.x + &other.x }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { t: self.t - other.t, x: &self.x - &other.x }
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: T, other: &Self) -> Self {
        Self { t: self.t + s * other.t, x: &self.x + &other.x * s }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.x.iter().all(|v| v.is_finite())
    }

    /// Stacks `(t, X)` as `[t, X row-major]`.
    pub fn to_vector(&self) -> DVector<T> {
        let (m, n) = self.x.shape();
        let mut v = DVector::zeros(1 + m * n);
        v[0] = self.t;
        for i in 0..m {
            for j in 0..n {
                v[1 + i * n + j] = self.x[(i, j)];
            }
        }
        v
    }

    /// Inverse of [`ConePoint::to_vector`].
    pub fn from_vector(v: &DVector<T>, m: usize, n: usize) -> Result<Self> {
        if v.len() != 1 + m * n {
            return Err(Error::Dimension(format!("vector of length {} cannot hold a point of shape {m}x{n}", v.len())));
        }
        let x = DMatrix::from_fn(m, n, |i, j| v[1 + i * n + j]);
        Ok(Self { t: v[0], x })
    }

    pub(crate) fn check_shape(&self, m: usize, n: usize) -> Result<()> {
        if self.x.shape() != (m, n) {
            return Err(Error::Dimension(format!(
                "expected {m}x{n} matrix part, got {}x{}",
                self.x.nrows(),
                self.x.ncols()
            )));
        }
        Ok(())
    }
}
