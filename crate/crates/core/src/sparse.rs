//! Sparse complex operators on top of `nalgebra_sparse::CsrMatrix`.
//!
//! Entries that cancel to exactly zero are dropped after every operation, so
//! the stored pattern is the true coupling graph of the operator.

use std::ops::{Add, Mul, Sub};

use nalgebra::DMatrix;
use nalgebra_sparse::{CooMatrix, CsrMatrix};
use num_complex::Complex64;

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix(CsrMatrix<Complex64>);

impl SparseMatrix {
    fn pruned(m: CsrMatrix<Complex64>) -> Self {
        Self(m.filter(|_, _, v| *v != ZERO))
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self(CsrMatrix::zeros(nrows, ncols))
    }

    pub fn identity(n: usize) -> Self {
        Self(CsrMatrix::identity(n))
    }

    pub fn from_diagonal(diag: &[Complex64]) -> Self {
        Self::from_triplets(
            diag.len(),
            diag.len(),
            diag.iter().enumerate().map(|(i, &v)| (i, i, v)),
        )
    }

    /// Assembles a matrix from `(row, col, value)` triplets. Duplicates are summed.
    ///
    /// Panics if an index is out of bounds.
    pub fn from_triplets<I>(nrows: usize, ncols: usize, triplets: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize, Complex64)>,
    {
        let mut coo = CooMatrix::new(nrows, ncols);
        for (r, c, v) in triplets {
            coo.push(r, c, v);
        }
        Self::pruned(CsrMatrix::from(&coo))
    }

    pub fn from_dense(m: &DMatrix<Complex64>) -> Self {
        Self::pruned(CsrMatrix::from(m))
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.nrows() == self.ncols()
    }

    pub fn nnz(&self) -> usize {
        self.0.nnz()
    }

    /// Iterates the stored entries of row `r` as `(col, value)`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let (offsets, cols, vals) = self.0.csr_data();
        let span = offsets[r]..offsets[r + 1];
        cols[span.clone()].iter().copied().zip(vals[span].iter().copied())
    }

    /// Iterates all stored entries as `(row, col, value)`.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        self.0.triplet_iter().map(|(r, c, &v)| (r, c, v))
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.0.index_entry(r, c).into_value()
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        (0..self.nrows().min(self.ncols())).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> Complex64 {
        self.diagonal().into_iter().sum()
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self::pruned(&self.0 * factor)
    }

    pub fn adjoint(&self) -> Self {
        let mut t = self.0.transpose();
        t.values_mut().iter_mut().for_each(|v| *v = v.conj());
        Self(t)
    }

    /// `y = A x`, overwriting `y`.
    pub fn mul_vec_into(&self, x: &[Complex64], y: &mut [Complex64]) {
        assert_eq!(x.len(), self.ncols());
        assert_eq!(y.len(), self.nrows());
        let (offsets, cols, vals) = self.0.csr_data();
        for (r, out) in y.iter_mut().enumerate() {
            let span = offsets[r]..offsets[r + 1];
            *out = cols[span.clone()].iter().zip(&vals[span]).map(|(&c, v)| v * x[c]).sum();
        }
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![ZERO; self.nrows()];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `<x|A|x>` for a square matrix.
    pub fn expectation(&self, x: &[Complex64]) -> Complex64 {
        assert!(self.is_square());
        x.iter().zip(self.mul_vec(x)).map(|(xr, ax)| xr.conj() * ax).sum()
    }

    pub fn try_matmul(&self, rhs: &Self) -> Result<Self> {
        if self.ncols() != rhs.nrows() {
            return Err(Error::DimensionMismatch {
                expected: self.ncols(),
                found: rhs.nrows(),
            });
        }
        Ok(Self::pruned(&self.0 * &rhs.0))
    }

    fn check_same_shape(&self, rhs: &Self) -> Result<()> {
        if self.nrows() != rhs.nrows() || self.ncols() != rhs.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.nrows() * self.ncols(),
                found: rhs.nrows() * rhs.ncols(),
            });
        }
        Ok(())
    }

    pub fn try_add(&self, rhs: &Self) -> Result<Self> {
        self.check_same_shape(rhs)?;
        Ok(Self::pruned(&self.0 + &rhs.0))
    }

    pub fn try_sub(&self, rhs: &Self) -> Result<Self> {
        self.check_same_shape(rhs)?;
        Ok(Self::pruned(&self.0 - &rhs.0))
    }

    /// Kronecker product `self ⊗ rhs`, row-major over the factor indices.
    pub fn kron(&self, rhs: &Self) -> Self {
        let (rn, cn) = (rhs.nrows(), rhs.ncols());
        let triplets = self
            .triplets()
            .flat_map(|(r1, c1, a)| rhs.triplets().map(move |(r2, c2, b)| (r1 * rn + r2, c1 * cn + c2, a * b)));
        Self::from_triplets(self.nrows() * rn, self.ncols() * cn, triplets)
    }

    /// `AB - BA`.
    pub fn commutator(&self, rhs: &Self) -> Result<Self> {
        self.try_matmul(rhs)?.try_sub(&rhs.try_matmul(self)?)
    }

    /// Largest entry modulus, zero for an empty matrix.
    pub fn max_abs(&self) -> f64 {
        self.0.values().iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Max-norm of `self - rhs`.
    pub fn max_abs_diff(&self, rhs: &Self) -> Result<f64> {
        Ok(self.try_sub(rhs)?.max_abs())
    }

    pub fn hermiticity_residual(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        self.max_abs_diff(&self.adjoint()).unwrap_or(f64::INFINITY)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_residual() <= tol
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        DMatrix::from(&self.0)
    }
}

impl Add for &SparseMatrix {
    type Output = SparseMatrix;

    fn add(self, rhs: &SparseMatrix) -> SparseMatrix {
        self.try_add(rhs).expect("shape mismatch in sparse addition")
    }
}

impl Sub for &SparseMatrix {
    type Output = SparseMatrix;

    fn sub(self, rhs: &SparseMatrix) -> SparseMatrix {
        self.try_sub(rhs).expect("shape mismatch in sparse subtraction")
    }
}

impl Mul for &SparseMatrix {
    type Output = SparseMatrix;

    fn mul(self, rhs: &SparseMatrix) -> SparseMatrix {
        self.try_matmul(rhs).expect("shape mismatch in sparse product")
    }
}
