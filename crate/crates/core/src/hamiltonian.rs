//! Model Hamiltonians and the effective-coupling arithmetic of the
//! two-ground-state level scheme.
//!
//! All Hamiltonians use `hbar = 1`; `alpha` sets the inverse time unit.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::algebra::{build_spin_operators, ProductSpace, SpinQuantum};
use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// Swap coupling `alpha` and diagonal `Jz Sz` perturbation `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub alpha: f64,
    pub beta: f64,
}

impl ModelParams {
    pub fn new(alpha: f64, beta: f64) -> Self {
        Self { alpha, beta }
    }

    pub fn swap_only(alpha: f64) -> Self {
        Self { alpha, beta: 0.0 }
    }
}

impl Default for ModelParams {
    fn default() -> Self {
        Self::swap_only(1.0)
    }
}

/// `alpha (J+ S+ + J- S-) + beta Jz Sz` on the joint space.
pub fn build_swap_hamiltonian(space: ProductSpace, params: ModelParams) -> SparseMatrix {
    let s = build_spin_operators(space.spin);
    let j = build_spin_operators(space.field);
    // Lifted operators on disjoint factors: (A ⊗ I)(I ⊗ B) = A ⊗ B.
    let raise = s.plus.kron(&j.plus);
    let lower = s.minus.kron(&j.minus);
    let mut h = (&raise + &lower).scale(Complex64::new(params.alpha, 0.0));
    if params.beta != 0.0 {
        let diag = s.z.kron(&j.z).scale(Complex64::new(params.beta, 0.0));
        h = &h + &diag;
    }
    h
}

/// One-axis twisting `alpha Sz^2` on the spin space alone.
pub fn build_ku_hamiltonian(s: SpinQuantum, alpha: f64) -> SparseMatrix {
    let diag: Vec<Complex64> = (0..s.dim())
        .map(|k| Complex64::new(alpha * s.m(k) * s.m(k), 0.0))
        .collect();
    SparseMatrix::from_diagonal(&diag)
}

/// Dipole couplings of the two ground states to the two excited states,
/// and the two detunings (`delta` on the e1 leg, `big_delta` on the e2 leg).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelScheme {
    pub g_minus_e1: f64,
    pub g_minus_e2: f64,
    pub g_plus_e1: f64,
    pub g_plus_e2: f64,
    pub delta: f64,
    pub big_delta: f64,
}

impl LevelScheme {
    /// 87Rb: `|F=1, m=±1>` coupled to `|F'=0, 0>` and `|F'=1, 0>`, with
    /// detunings in the ratio `delta / Delta = 20`.
    pub fn rubidium87() -> Self {
        let e1 = (1.0f64 / 6.0).sqrt();
        let e2 = (5.0f64 / 24.0).sqrt();
        Self {
            g_minus_e1: e1,
            g_minus_e2: e2,
            g_plus_e1: e1,
            g_plus_e2: -e2,
            delta: 20.0,
            big_delta: 1.0,
        }
    }

    pub fn with_detunings(self, delta: f64, big_delta: f64) -> Self {
        Self {
            delta,
            big_delta,
            ..self
        }
    }
}

impl Default for LevelScheme {
    fn default() -> Self {
        Self::rubidium87()
    }
}

/// The three coefficients of the adiabatically eliminated coupling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveCouplings {
    pub diag_minus: f64,
    pub diag_plus: f64,
    pub offdiag: f64,
}

pub fn effective_couplings(ls: &LevelScheme) -> Result<EffectiveCouplings> {
    if !(ls.delta > 0.0 && ls.big_delta > 0.0) {
        return Err(Error::ZeroDetuning {
            delta: ls.delta,
            big_delta: ls.big_delta,
        });
    }
    // Couplings are real, so g* g reduces to a plain product.
    Ok(EffectiveCouplings {
        diag_minus: ls.g_minus_e1.powi(2) / ls.delta - ls.g_minus_e2.powi(2) / ls.big_delta,
        diag_plus: ls.g_plus_e1.powi(2) / ls.delta - ls.g_plus_e2.powi(2) / ls.big_delta,
        offdiag: ls.g_minus_e1 * ls.g_plus_e1 / ls.delta - ls.g_minus_e2 * ls.g_plus_e2 / ls.big_delta,
    })
}

/// The detuning ratio `delta / Delta` at which both diagonal coefficients vanish.
pub fn detuning_ratio_for_cancellation(ls: &LevelScheme) -> Result<f64> {
    if ls.g_minus_e2 == 0.0 || ls.g_plus_e2 == 0.0 {
        return Err(Error::VanishingCoupling);
    }
    let minus = ls.g_minus_e1.powi(2) / ls.g_minus_e2.powi(2);
    let plus = ls.g_plus_e1.powi(2) / ls.g_plus_e2.powi(2);
    if (minus - plus).abs() > 1e-12 * minus.abs().max(plus.abs()).max(1.0) {
        return Err(Error::AsymmetricCoupling { minus, plus });
    }
    Ok(plus)
}
