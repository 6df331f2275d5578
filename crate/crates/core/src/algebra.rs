//! Angular-momentum operators and coherent states for the atomic spin and
//! the Schwinger-represented light field.
//!
//! Basis convention: index `k` of a spin-`S` ladder holds `m = S - k`, so
//! `m = +S` comes first and `S+` is strictly upper triangular. The joint
//! atom-field space is row-major: flat index `i_s * (2J + 1) + i_j`.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

const NORM_TOL: f64 = 1e-9;

/// A spin quantum number stored as `2S` so half-integers are exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SpinQuantum(u32);

impl SpinQuantum {
    pub const fn from_twice(two_s: u32) -> Self {
        Self(two_s)
    }

    /// Integer spin `S`.
    pub const fn integer(s: u32) -> Self {
        Self(2 * s)
    }

    pub fn two_s(self) -> u32 {
        self.0
    }

    pub fn value(self) -> f64 {
        f64::from(self.0) / 2.0
    }

    pub fn dim(self) -> usize {
        self.0 as usize + 1
    }

    /// Magnetic quantum number at basis index `k`.
    pub fn m(self, k: usize) -> f64 {
        (f64::from(self.0) - 2.0 * k as f64) / 2.0
    }

    /// `S(S+1)`, evaluated from integers so the result is exact.
    pub fn casimir_value(self) -> f64 {
        let t = u64::from(self.0);
        (t * (t + 2)) as f64 / 4.0
    }
}

impl fmt::Display for SpinQuantum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_multiple_of(2) {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

/// The full operator set of one spin ladder.
#[derive(Debug, Clone)]
pub struct SpinOperators {
    pub s: SpinQuantum,
    pub plus: SparseMatrix,
    pub minus: SparseMatrix,
    pub x: SparseMatrix,
    pub y: SparseMatrix,
    pub z: SparseMatrix,
    pub casimir: SparseMatrix,
}

impl SpinOperators {
    pub fn new(s: SpinQuantum) -> Self {
        let dim = s.dim();
        let two_s = u64::from(s.two_s());
        // <m+1|S+|m> = sqrt((S - m)(S + m + 1)); with m = S - k this is sqrt(k (2S - k + 1)).
        let plus = SparseMatrix::from_triplets(
            dim,
            dim,
            (1..dim).map(|k| {
                let k64 = k as u64;
                let v = ((k64 * (two_s - k64 + 1)) as f64).sqrt();
                (k - 1, k, Complex64::new(v, 0.0))
            }),
        );
        let minus = plus.adjoint();
        let x = (&plus + &minus).scale(Complex64::new(0.5, 0.0));
        let y = (&plus - &minus).scale(Complex64::new(0.0, -0.5));
        let z = SparseMatrix::from_diagonal(
            &(0..dim).map(|k| Complex64::new(s.m(k), 0.0)).collect::<Vec<_>>(),
        );
        let casimir = SparseMatrix::from_diagonal(&vec![Complex64::new(s.casimir_value(), 0.0); dim]);
        Self {
            s,
            plus,
            minus,
            x,
            y,
            z,
            casimir,
        }
    }

    /// Largest max-norm residual among the three cyclic commutation relations.
    pub fn commutator_residual(&self) -> f64 {
        let i = Complex64::new(0.0, 1.0);
        [(&self.x, &self.y, &self.z), (&self.y, &self.z, &self.x), (&self.z, &self.x, &self.y)]
            .into_iter()
            .map(|(a, b, c)| {
                a.commutator(b)
                    .and_then(|comm| comm.max_abs_diff(&c.scale(i)))
                    .expect("square operators of equal size")
            })
            .fold(0.0, f64::max)
    }
}

pub fn build_spin_operators(s: SpinQuantum) -> SpinOperators {
    SpinOperators::new(s)
}

/// The eigenvector of `Sx` with eigenvalue `+S`: binomial amplitudes
/// `2^(-S) sqrt(C(2S, S - m))`, real and nonnegative.
pub fn coherent_state_x(s: SpinQuantum) -> Vec<Complex64> {
    let n = s.two_s() as usize;
    // ln k! for k = 0..=n; log domain keeps large spins finite.
    let mut ln_fact = Vec::with_capacity(n + 1);
    ln_fact.push(0.0f64);
    for k in 1..=n {
        ln_fact.push(ln_fact[k - 1] + (k as f64).ln());
    }
    let half_ln2 = s.value() * std::f64::consts::LN_2;
    let mut amps: Vec<f64> = (0..=n)
        .map(|k| (0.5 * (ln_fact[n] - ln_fact[k] - ln_fact[n - k]) - half_ln2).exp())
        .collect();
    let norm = amps.iter().map(|a| a * a).sum::<f64>().sqrt();
    amps.iter_mut().for_each(|a| *a /= norm);
    amps.into_iter().map(|a| Complex64::new(a, 0.0)).collect()
}

pub fn vector_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

fn check_normalized(v: &[Complex64]) -> Result<()> {
    let norm = vector_norm(v);
    if (norm - 1.0).abs() > NORM_TOL {
        return Err(Error::NotNormalized { norm });
    }
    Ok(())
}

/// Which tensor factor an operator acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Factor {
    Spin,
    Field,
}

/// Joint atom (`S`) and light (`J`) Hilbert space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProductSpace {
    pub spin: SpinQuantum,
    pub field: SpinQuantum,
}

impl ProductSpace {
    pub fn new(spin: SpinQuantum, field: SpinQuantum) -> Self {
        Self { spin, field }
    }

    pub fn dim(&self) -> usize {
        self.spin.dim() * self.field.dim()
    }

    pub fn index(&self, i_s: usize, i_j: usize) -> usize {
        i_s * self.field.dim() + i_j
    }

    /// Inverse of [`ProductSpace::index`].
    pub fn split(&self, flat: usize) -> (usize, usize) {
        (flat / self.field.dim(), flat % self.field.dim())
    }

    fn factor_dim(&self, which: Factor) -> usize {
        match which {
            Factor::Spin => self.spin.dim(),
            Factor::Field => self.field.dim(),
        }
    }

    /// `op ⊗ I` for the spin factor, `I ⊗ op` for the field factor.
    pub fn lift(&self, op: &SparseMatrix, which: Factor) -> Result<SparseMatrix> {
        let expected = self.factor_dim(which);
        if op.nrows() != expected || op.ncols() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: op.nrows().max(op.ncols()),
            });
        }
        Ok(match which {
            Factor::Spin => op.kron(&SparseMatrix::identity(self.field.dim())),
            Factor::Field => SparseMatrix::identity(self.spin.dim()).kron(op),
        })
    }

    pub fn lift_spin(&self, op: &SparseMatrix) -> Result<SparseMatrix> {
        self.lift(op, Factor::Spin)
    }

    pub fn lift_field(&self, op: &SparseMatrix) -> Result<SparseMatrix> {
        self.lift(op, Factor::Field)
    }
}

/// A normalized pure state on a [`ProductSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    space: ProductSpace,
    amplitudes: Vec<Complex64>,
}

impl QuantumState {
    pub fn new(space: ProductSpace, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                found: amplitudes.len(),
            });
        }
        check_normalized(&amplitudes)?;
        Ok(Self { space, amplitudes })
    }

    /// Wraps amplitudes after rescaling them to unit norm. Returns the state
    /// and the norm it had before rescaling.
    pub fn renormalized(space: ProductSpace, mut amplitudes: Vec<Complex64>) -> Result<(Self, f64)> {
        if amplitudes.len() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                found: amplitudes.len(),
            });
        }
        let norm = vector_norm(&amplitudes);
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::NotNormalized { norm });
        }
        amplitudes.iter_mut().for_each(|a| *a /= norm);
        Ok((Self { space, amplitudes }, norm))
    }

    pub fn space(&self) -> ProductSpace {
        self.space
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        vector_norm(&self.amplitudes)
    }

    /// Amplitude `<m_s(i_s), m_j(i_j)|psi>`.
    pub fn amplitude(&self, i_s: usize, i_j: usize) -> Complex64 {
        self.amplitudes[self.space.index(i_s, i_j)]
    }

    /// Amplitudes as a `(2S+1) x (2J+1)` matrix.
    pub fn amplitude_matrix(&self) -> nalgebra::DMatrix<Complex64> {
        nalgebra::DMatrix::from_row_slice(self.space.spin.dim(), self.space.field.dim(), &self.amplitudes)
    }

    pub fn expectation(&self, op: &SparseMatrix) -> Result<Complex64> {
        if op.nrows() != self.amplitudes.len() || !op.is_square() {
            return Err(Error::DimensionMismatch {
                expected: self.amplitudes.len(),
                found: op.nrows(),
            });
        }
        Ok(op.expectation(&self.amplitudes))
    }
}

pub fn product_state(
    space: ProductSpace,
    spin_part: &[Complex64],
    field_part: &[Complex64],
) -> Result<QuantumState> {
    for (part, expected) in [(spin_part, space.spin.dim()), (field_part, space.field.dim())] {
        if part.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: part.len(),
            });
        }
        check_normalized(part)?;
    }
    let amplitudes = spin_part
        .iter()
        .flat_map(|&a| field_part.iter().map(move |&b| a * b))
        .collect();
    QuantumState::new(space, amplitudes)
}

/// Both factors polarized along `+x`.
pub fn x_polarized_state(space: ProductSpace) -> QuantumState {
    product_state(space, &coherent_state_x(space.spin), &coherent_state_x(space.field))
        .expect("coherent states are normalized and correctly sized")
}
