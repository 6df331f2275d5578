//! Squeezing and entanglement metrics of joint atom-field states.
//!
//! Squeezing is analysed in the `(y, z)` plane transverse to the mean spin
//! (which stays along `x`). The direction `z̄(θ) = cos θ ẑ + sin θ ŷ` is
//! measured from `ẑ`; `ȳ = cos θ ŷ − sin θ ẑ` completes the rotated frame.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use crate::algebra::{build_spin_operators, ProductSpace, QuantumState, SpinQuantum};
use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// Below this the mean spin is treated as vanishing and `r` is undefined.
pub const MEAN_SPIN_FLOOR: f64 = 1e-9;
/// Eigenvalues of a density matrix below this contribute nothing to the entropy.
pub const ENTROPY_CLIP: f64 = 1e-14;
const TRACE_TOL: f64 = 1e-8;
/// Relative eigenvalue splitting below which the transverse covariance counts as isotropic.
const ISOTROPY_TOL: f64 = 1e-10;

/// Spin operators of the atomic factor, lifted to the joint space.
#[derive(Debug, Clone)]
pub struct LiftedSpin {
    pub space: ProductSpace,
    pub x: SparseMatrix,
    pub y: SparseMatrix,
    pub z: SparseMatrix,
}

impl LiftedSpin {
    pub fn new(space: ProductSpace) -> Self {
        let ops = build_spin_operators(space.spin);
        let lift = |op: &SparseMatrix| space.lift_spin(op).expect("operator built for the spin factor");
        Self {
            space,
            x: lift(&ops.x),
            y: lift(&ops.y),
            z: lift(&ops.z),
        }
    }

    pub fn spin(&self) -> SpinQuantum {
        self.space.spin
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpinMoments {
    /// `(<Sx>, <Sy>, <Sz>)`.
    pub mean: [f64; 3],
    /// Symmetrized covariance of `(Sy, Sz)`, rows and columns ordered `(y, z)`.
    pub covariance_yz: [[f64; 2]; 2],
}

impl SpinMoments {
    pub fn mean_magnitude(&self) -> f64 {
        self.mean.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Variance along `z̄(θ)`.
    pub fn variance_along(&self, theta: f64) -> f64 {
        let (s, c) = theta.sin_cos();
        let [[yy, yz], [_, zz]] = self.covariance_yz;
        s * s * yy + c * c * zz + 2.0 * s * c * yz
    }

    pub fn min_covariance_eigenvalue(&self) -> f64 {
        let [[a, b], [_, c]] = self.covariance_yz;
        0.5 * (a + c) - (0.25 * (a - c) * (a - c) + b * b).sqrt()
    }
}

pub fn spin_moments(state: &QuantumState, ops: &LiftedSpin) -> Result<SpinMoments> {
    if state.space() != ops.space {
        return Err(Error::DimensionMismatch {
            expected: ops.space.dim(),
            found: state.space().dim(),
        });
    }
    let psi = state.amplitudes();
    let sx = ops.x.expectation(psi).re;
    let y_psi = ops.y.mul_vec(psi);
    let z_psi = ops.z.mul_vec(psi);
    let sy = inner(psi, &y_psi).re;
    let sz = inner(psi, &z_psi).re;
    // Sy, Sz Hermitian: <Sy^2> = ‖Sy psi‖², <{Sy,Sz}>/2 = Re <Sy psi|Sz psi>.
    let yy = inner(&y_psi, &y_psi).re - sy * sy;
    let zz = inner(&z_psi, &z_psi).re - sz * sz;
    let yz = inner(&y_psi, &z_psi).re - sy * sz;
    Ok(SpinMoments {
        mean: [sx, sy, sz],
        covariance_yz: [[yy, yz], [yz, zz]],
    })
}

fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SqueezingDirection {
    /// Angle of `z̄` from `ẑ` towards `ŷ`, in `[0, π)`.
    pub theta_z: f64,
    /// Smallest transverse variance, clipped at zero.
    pub variance_min: f64,
    /// The covariance was isotropic and `theta_z` was set to 0 by convention.
    pub degenerate: bool,
}

/// Closed-form minimizer of the transverse variance over `θ`.
pub fn optimal_squeezing_direction(m: &SpinMoments) -> SqueezingDirection {
    let [[a, b], [_, c]] = m.covariance_yz;
    // variance(θ) = (a+c)/2 + ((c-a)/2) cos 2θ + b sin 2θ
    let half_diff = 0.5 * (a - c);
    let radius = (half_diff * half_diff + b * b).sqrt();
    let mean = 0.5 * (a + c);
    let degenerate = radius <= ISOTROPY_TOL * mean.abs().max(f64::MIN_POSITIVE);
    let theta_z = if degenerate {
        0.0
    } else {
        let theta = 0.5 * (-b).atan2(half_diff);
        let wrapped = theta.rem_euclid(std::f64::consts::PI);
        if wrapped >= std::f64::consts::PI {
            0.0
        } else {
            wrapped
        }
    };
    SqueezingDirection {
        theta_z,
        variance_min: (mean - radius).max(0.0),
        degenerate,
    }
}

/// `r = ΔS_z̄ / sqrt(|<S>|/2)` from precomputed moments.
pub fn squeezing_ratio_from(m: &SpinMoments) -> Result<f64> {
    let magnitude = m.mean_magnitude();
    if magnitude < MEAN_SPIN_FLOOR {
        return Err(Error::Undefined {
            quantity: "squeezing ratio r",
            reason: "mean spin vanishes",
        });
    }
    let dir = optimal_squeezing_direction(m);
    Ok(dir.variance_min.sqrt() / (0.5 * magnitude).sqrt())
}

pub fn squeezing_ratio(state: &QuantumState, ops: &LiftedSpin) -> Result<f64> {
    squeezing_ratio_from(&spin_moments(state, ops)?)
}

/// `ξ² = 2S (ΔS_z̄)² / (<Sx>² + <S_ȳ>²)` from precomputed moments.
pub fn xi_squared_from(m: &SpinMoments, s: SpinQuantum) -> Result<f64> {
    let dir = optimal_squeezing_direction(m);
    let (sin, cos) = dir.theta_z.sin_cos();
    let s_ybar = cos * m.mean[1] - sin * m.mean[2];
    let denominator = m.mean[0] * m.mean[0] + s_ybar * s_ybar;
    if denominator < MEAN_SPIN_FLOOR * MEAN_SPIN_FLOOR {
        return Err(Error::Undefined {
            quantity: "xi^2",
            reason: "mean spin in the (x, ȳ) plane vanishes",
        });
    }
    Ok(f64::from(s.two_s()) * dir.variance_min / denominator)
}

pub fn xi_squared(state: &QuantumState, ops: &LiftedSpin) -> Result<f64> {
    xi_squared_from(&spin_moments(state, ops)?, ops.spin())
}

/// `ρ_J = Tr_S |ψ><ψ|`, dimension `(2J+1)²`.
pub fn reduced_field_density(state: &QuantumState) -> DMatrix<Complex64> {
    let m = state.amplitude_matrix();
    m.transpose() * m.conjugate()
}

/// `ρ_S = Tr_J |ψ><ψ|`, dimension `(2S+1)²`.
pub fn reduced_spin_density(state: &QuantumState) -> DMatrix<Complex64> {
    let m = state.amplitude_matrix();
    &m * m.adjoint()
}

fn check_trace(rho: &DMatrix<Complex64>) -> Result<()> {
    let trace = rho.trace().re;
    if (trace - 1.0).abs() > TRACE_TOL {
        return Err(Error::BadTrace { trace });
    }
    Ok(())
}

pub fn density_eigenvalues(rho: &DMatrix<Complex64>) -> Result<Vec<f64>> {
    if rho.nrows() == 1 {
        return Ok(vec![rho[(0, 0)].re]);
    }
    let eig = SymmetricEigen::try_new(rho.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Eigensolver(format!("density matrix of size {}", rho.nrows())))?;
    Ok(eig.eigenvalues.iter().copied().collect())
}

/// `-Tr ρ ln ρ` in nats.
pub fn von_neumann_entropy(rho: &DMatrix<Complex64>) -> Result<f64> {
    check_trace(rho)?;
    Ok(entropy_of_spectrum(&density_eigenvalues(rho)?))
}

pub fn entropy_of_spectrum(eigenvalues: &[f64]) -> f64 {
    eigenvalues
        .iter()
        .filter(|&&l| l >= ENTROPY_CLIP)
        .map(|&l| -l * l.ln())
        .sum::<f64>()
        .max(0.0)
}

/// `K = 1 / Tr ρ²`.
pub fn schmidt_number(rho: &DMatrix<Complex64>) -> Result<f64> {
    check_trace(rho)?;
    // ρ Hermitian: Tr ρ² = Σ |ρ_ij|².
    let purity: f64 = rho.iter().map(|v| v.norm_sqr()).sum();
    Ok(1.0 / purity)
}

/// Squared Schmidt coefficients `λ_i`, largest first, from whichever reduced
/// density matrix is smaller (both share the nonzero spectrum).
pub fn schmidt_spectrum(state: &QuantumState) -> Result<Vec<f64>> {
    let space = state.space();
    let rho = if space.field.dim() <= space.spin.dim() {
        reduced_field_density(state)
    } else {
        reduced_spin_density(state)
    };
    let mut spectrum = density_eigenvalues(&rho)?;
    spectrum.sort_by(|a, b| b.total_cmp(a));
    Ok(spectrum)
}

/// Every metric reported per time sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SqueezingReport {
    pub theta_z: f64,
    pub degenerate_direction: bool,
    pub delta_s_zbar: f64,
    /// `None` when the mean spin vanishes.
    pub r: Option<f64>,
    pub xi2: Option<f64>,
    pub s_x: f64,
    pub entropy_field: f64,
    pub schmidt_k: f64,
}

impl SqueezingReport {
    pub fn from_moments(moments: &SpinMoments, spin: SpinQuantum, schmidt: &[f64]) -> Self {
        let dir = optimal_squeezing_direction(moments);
        let purity: f64 = schmidt.iter().map(|l| l * l).sum();
        Self {
            theta_z: dir.theta_z,
            degenerate_direction: dir.degenerate,
            delta_s_zbar: dir.variance_min.sqrt(),
            r: squeezing_ratio_from(moments).ok(),
            xi2: xi_squared_from(moments, spin).ok(),
            s_x: moments.mean[0],
            entropy_field: entropy_of_spectrum(schmidt),
            schmidt_k: 1.0 / purity,
        }
    }
}

/// Moments and the full report for one state.
pub fn squeezing_report(state: &QuantumState, ops: &LiftedSpin) -> Result<(SpinMoments, SqueezingReport)> {
    let moments = spin_moments(state, ops)?;
    let schmidt = schmidt_spectrum(state)?;
    Ok((moments, SqueezingReport::from_moments(&moments, ops.spin(), &schmidt)))
}
