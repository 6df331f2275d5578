//! Time evolution `|psi(t)> = exp(-iHt)|psi(0)>` for time-independent Hermitian `H`.
//!
//! Two routes:
//!
//! * [`SpectralPropagator`] diagonalizes `H` exactly. The matrix is first split
//!   into its connected blocks (the swap Hamiltonian conserves `m_J - m_S`, so
//!   a joint space of dimension ~10^4 falls apart into blocks of at most
//!   `min(2S+1, 2J+1)`), and each block is diagonalized densely.
//! * [`KrylovPropagator`] builds a Lanczos basis per step and exponentiates
//!   the projected tridiagonal matrix, shrinking the step until the
//!   residual-based error estimate meets the tolerance.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::algebra::{vector_norm, QuantumState};
use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const HERMITIAN_TOL: f64 = 1e-10;
const EIGEN_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Auto,
    DenseEig,
    Krylov,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Self::Auto),
            "dense_eig" | "dense-eig" | "dense" => Ok(Self::DenseEig),
            "krylov" => Ok(Self::Krylov),
            other => Err(Error::InvalidConfig(format!("unknown propagation method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagatorConfig {
    pub method: Method,
    /// `auto` diagonalizes when the largest block of `H` is at most this size.
    pub dense_threshold: usize,
    pub krylov_max_dim: usize,
    /// Per-step 2-norm error bound for the Krylov route.
    pub step_tolerance: f64,
    /// Output sampling interval in units of `1/alpha`.
    pub dt: f64,
}

impl Default for PropagatorConfig {
    fn default() -> Self {
        Self {
            method: Method::Auto,
            dense_threshold: 2048,
            krylov_max_dim: 30,
            step_tolerance: 1e-10,
            dt: 0.01,
        }
    }
}

impl PropagatorConfig {
    pub fn with_method(self, method: Method) -> Self {
        Self { method, ..self }
    }

    pub fn with_dt(self, dt: f64) -> Self {
        Self { dt, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dense_threshold < 2 {
            return Err(Error::InvalidConfig("dense_threshold must be at least 2".into()));
        }
        if self.krylov_max_dim < 2 {
            return Err(Error::InvalidConfig("krylov_max_dim must be at least 2".into()));
        }
        if !(self.step_tolerance > 0.0 && self.step_tolerance.is_finite()) {
            return Err(Error::InvalidConfig("step_tolerance must be positive".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidConfig("dt must be positive".into()));
        }
        Ok(())
    }
}

/// Snapshots of an evolved state.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<QuantumState>,
    /// `‖psi‖ - 1` of each snapshot before it was renormalized.
    pub norm_drift: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn max_norm_drift(&self) -> f64 {
        self.norm_drift.iter().map(|d| d.abs()).fold(0.0, f64::max)
    }
}

/// `0, dt, 2dt, …` up to and including `t_final`: `floor(t_final/dt) + 1` points.
pub fn sample_times(t_final: f64, dt: f64) -> Vec<f64> {
    let steps = (t_final / dt + 1e-9).floor().max(0.0) as usize;
    (0..=steps).map(|k| k as f64 * dt).collect()
}

fn check_operator(h: &SparseMatrix, dim: usize) -> Result<()> {
    if !h.is_square() || h.nrows() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: h.nrows(),
        });
    }
    let residual = h.hermiticity_residual();
    if residual > HERMITIAN_TOL {
        return Err(Error::NotHermitian { residual });
    }
    Ok(())
}

/// Partitions the indices of `h` into the connected components of its sparsity graph.
pub fn block_partition(h: &SparseMatrix) -> Vec<Vec<usize>> {
    let n = h.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for (r, c, _) in h.triplets() {
        let (a, b) = (find(&mut parent, r), find(&mut parent, c));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut slot = vec![usize::MAX; n];
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        if slot[root] == usize::MAX {
            slot[root] = blocks.len();
            blocks.push(Vec::new());
        }
        blocks[slot[root]].push(i);
    }
    blocks
}

pub fn largest_block(h: &SparseMatrix) -> usize {
    block_partition(h).iter().map(Vec::len).max().unwrap_or(0)
}

#[derive(Debug, Clone)]
struct SpectralBlock {
    indices: Vec<usize>,
    eigenvalues: Vec<f64>,
    vectors: DMatrix<Complex64>,
}

/// Exact propagator from the blockwise eigendecomposition `H = V Λ V†`.
#[derive(Debug, Clone)]
pub struct SpectralPropagator {
    dim: usize,
    blocks: Vec<SpectralBlock>,
}

impl SpectralPropagator {
    pub fn new(h: &SparseMatrix) -> Result<Self> {
        check_operator(h, h.nrows())?;
        let dim = h.nrows();
        let mut position = vec![0usize; dim];
        let mut blocks = Vec::new();
        for indices in block_partition(h) {
            for (local, &global) in indices.iter().enumerate() {
                position[global] = local;
            }
            let n = indices.len();
            let mut dense = DMatrix::<Complex64>::zeros(n, n);
            for (local, &global) in indices.iter().enumerate() {
                for (c, v) in h.row(global) {
                    dense[(local, position[c])] = v;
                }
            }
            let (eigenvalues, vectors) = hermitian_eigen(dense)?;
            blocks.push(SpectralBlock {
                indices,
                eigenvalues,
                vectors,
            });
        }
        Ok(Self { dim, blocks })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn largest_block(&self) -> usize {
        self.blocks.iter().map(|b| b.indices.len()).max().unwrap_or(0)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self.blocks.iter().flat_map(|b| b.eigenvalues.iter().copied()).collect();
        all.sort_by(f64::total_cmp);
        all
    }

    /// Eigen-coefficients `V† psi`, reusable for many times.
    pub fn project(&self, psi: &[Complex64]) -> Result<SpectralCoefficients> {
        if psi.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: psi.len(),
            });
        }
        let coeffs = self
            .blocks
            .iter()
            .map(|b| {
                let local = DVector::from_iterator(b.indices.len(), b.indices.iter().map(|&i| psi[i]));
                b.vectors.ad_mul(&local)
            })
            .collect();
        Ok(SpectralCoefficients { coeffs })
    }

    /// `exp(-iHt) psi` from precomputed coefficients.
    pub fn evaluate(&self, coeffs: &SpectralCoefficients, t: f64) -> Vec<Complex64> {
        let mut out = vec![ZERO; self.dim];
        for (b, c) in self.blocks.iter().zip(&coeffs.coeffs) {
            let phased = DVector::from_iterator(
                c.len(),
                c.iter()
                    .zip(&b.eigenvalues)
                    .map(|(ck, &lambda)| ck * Complex64::from_polar(1.0, -lambda * t)),
            );
            let local = &b.vectors * phased;
            for (&i, v) in b.indices.iter().zip(local.iter()) {
                out[i] = *v;
            }
        }
        out
    }

    pub fn propagate(&self, psi: &[Complex64], t: f64) -> Result<Vec<Complex64>> {
        Ok(self.evaluate(&self.project(psi)?, t))
    }
}

/// Per-block eigen-coefficients of a state; see [`SpectralPropagator::project`].
#[derive(Debug, Clone)]
pub struct SpectralCoefficients {
    coeffs: Vec<DVector<Complex64>>,
}

fn hermitian_eigen(m: DMatrix<Complex64>) -> Result<(Vec<f64>, DMatrix<Complex64>)> {
    let n = m.nrows();
    if n == 1 {
        return Ok((vec![m[(0, 0)].re], DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0))));
    }
    if m.iter().all(|v| v.im == 0.0) {
        let real = m.map(|v| v.re);
        let eig = SymmetricEigen::try_new(real, f64::EPSILON, EIGEN_MAX_ITER)
            .ok_or_else(|| Error::Eigensolver(format!("real symmetric block of size {n}")))?;
        Ok((
            eig.eigenvalues.iter().copied().collect(),
            eig.eigenvectors.map(|v| Complex64::new(v, 0.0)),
        ))
    } else {
        let eig = SymmetricEigen::try_new(m, f64::EPSILON, EIGEN_MAX_ITER)
            .ok_or_else(|| Error::Eigensolver(format!("Hermitian block of size {n}")))?;
        Ok((eig.eigenvalues.iter().copied().collect(), eig.eigenvectors))
    }
}

/// Lanczos exponential propagator with adaptive step splitting.
#[derive(Debug, Clone)]
pub struct KrylovPropagator<'a> {
    h: &'a SparseMatrix,
    max_dim: usize,
    tolerance: f64,
    substeps: usize,
}

impl<'a> KrylovPropagator<'a> {
    pub fn new(h: &'a SparseMatrix, max_dim: usize, tolerance: f64) -> Result<Self> {
        check_operator(h, h.nrows())?;
        if max_dim < 2 || tolerance.is_nan() || tolerance <= 0.0 {
            return Err(Error::InvalidConfig("krylov_max_dim >= 2 and step_tolerance > 0 required".into()));
        }
        Ok(Self {
            h,
            max_dim,
            tolerance,
            substeps: 0,
        })
    }

    pub fn from_config(h: &'a SparseMatrix, cfg: &PropagatorConfig) -> Result<Self> {
        Self::new(h, cfg.krylov_max_dim, cfg.step_tolerance)
    }

    /// Number of accepted Krylov steps so far.
    pub fn substeps(&self) -> usize {
        self.substeps
    }

    /// `exp(-iHt) psi`; `t` may be negative.
    pub fn propagate(&mut self, psi: &[Complex64], t: f64) -> Result<Vec<Complex64>> {
        if psi.len() != self.h.nrows() {
            return Err(Error::DimensionMismatch {
                expected: self.h.nrows(),
                found: psi.len(),
            });
        }
        let mut state = psi.to_vec();
        let mut remaining = t;
        let min_step = 1e-13 * t.abs().max(1e-300);
        while remaining != 0.0 {
            let taken = self.step(&mut state, remaining)?;
            if taken.abs() < min_step {
                return Err(Error::KrylovNoConvergence { step: taken.abs() });
            }
            self.substeps += 1;
            remaining = if (remaining - taken).abs() <= 1e-15 * t.abs() {
                0.0
            } else {
                remaining - taken
            };
        }
        Ok(state)
    }

    /// Advances `state` by at most `target` (signed); returns the time actually covered.
    fn step(&self, state: &mut [Complex64], target: f64) -> Result<f64> {
        let n = state.len();
        let beta0 = vector_norm(state);
        if beta0 == 0.0 {
            return Ok(target);
        }
        let scale = self.h.max_abs().max(f64::MIN_POSITIVE);
        let breakdown = 1e-12 * scale;

        let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(self.max_dim + 1);
        basis.push(state.iter().map(|v| v / beta0).collect());
        let mut alphas: Vec<f64> = Vec::with_capacity(self.max_dim);
        let mut betas: Vec<f64> = Vec::with_capacity(self.max_dim);
        let mut w = vec![ZERO; n];

        let mut accepted: Option<(f64, DVector<Complex64>)> = None;
        for j in 0..self.max_dim {
            self.h.mul_vec_into(&basis[j], &mut w);
            let alpha = dot(&basis[j], &w).re;
            axpy(-alpha, &basis[j], &mut w);
            if j > 0 {
                axpy(-betas[j - 1], &basis[j - 1], &mut w);
            }
            // Full reorthogonalization keeps the basis orthonormal to round-off.
            for q in &basis {
                let overlap = dot(q, &w);
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= overlap * qi;
                }
            }
            alphas.push(alpha);
            let beta = vector_norm(&w);
            let tri = Tridiagonal::new(&alphas, &betas)?;

            if beta <= breakdown {
                // Invariant subspace: the projection is exact for any step.
                accepted = Some((target, tri.exp_e1(target)));
                break;
            }
            let y = tri.exp_e1(target);
            if beta0 * beta * y[j].norm() <= self.tolerance {
                accepted = Some((target, y));
                break;
            }
            if j + 1 == self.max_dim {
                let mut tau = target;
                loop {
                    tau *= 0.5;
                    if tau.abs() < 1e-13 * target.abs() {
                        return Err(Error::KrylovNoConvergence { step: tau.abs() });
                    }
                    let y = tri.exp_e1(tau);
                    if beta0 * beta * y[j].norm() <= self.tolerance {
                        accepted = Some((tau, y));
                        break;
                    }
                }
                break;
            }
            betas.push(beta);
            basis.push(w.iter().map(|v| v / beta).collect());
        }

        let (tau, y) = accepted.expect("loop always accepts or errors");
        state.iter_mut().for_each(|v| *v = ZERO);
        for (q, yk) in basis.iter().zip(y.iter()) {
            let c = yk * beta0;
            for (s, qi) in state.iter_mut().zip(q) {
                *s += c * qi;
            }
        }
        Ok(tau)
    }
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn axpy(a: f64, x: &[Complex64], y: &mut [Complex64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += xi * a;
    }
}

/// The Lanczos matrix `T`, kept as its eigendecomposition.
struct Tridiagonal {
    eigenvalues: Vec<f64>,
    vectors: DMatrix<f64>,
}

impl Tridiagonal {
    fn new(alphas: &[f64], betas: &[f64]) -> Result<Self> {
        let m = alphas.len();
        let mut t = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = alphas[i];
            if i + 1 < m {
                t[(i, i + 1)] = betas[i];
                t[(i + 1, i)] = betas[i];
            }
        }
        let eig = SymmetricEigen::try_new(t, f64::EPSILON, EIGEN_MAX_ITER)
            .ok_or_else(|| Error::Eigensolver(format!("Lanczos tridiagonal of size {m}")))?;
        Ok(Self {
            eigenvalues: eig.eigenvalues.iter().copied().collect(),
            vectors: eig.eigenvectors,
        })
    }

    /// `exp(-i tau T) e1`.
    fn exp_e1(&self, tau: f64) -> DVector<Complex64> {
        let m = self.eigenvalues.len();
        let mut out = DVector::<Complex64>::zeros(m);
        for (k, &lambda) in self.eigenvalues.iter().enumerate() {
            let weight = Complex64::from_polar(self.vectors[(0, k)], -lambda * tau);
            for i in 0..m {
                out[i] += weight * self.vectors[(i, k)];
            }
        }
        out
    }
}

fn snapshot(state0: &QuantumState, amplitudes: Vec<Complex64>) -> Result<(QuantumState, f64)> {
    let (state, norm) = QuantumState::renormalized(state0.space(), amplitudes)?;
    Ok((state, norm - 1.0))
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig("sample times must be strictly increasing".into()));
    }
    Ok(())
}

/// Exact evolution through the eigendecomposition of `h`.
pub fn evolve_dense(state0: &QuantumState, h: &SparseMatrix, times: &[f64]) -> Result<Trajectory> {
    check_times(times)?;
    check_operator(h, state0.amplitudes().len())?;
    let prop = SpectralPropagator::new(h)?;
    let coeffs = prop.project(state0.amplitudes())?;
    let mut traj = Trajectory {
        times: times.to_vec(),
        states: Vec::with_capacity(times.len()),
        norm_drift: Vec::with_capacity(times.len()),
    };
    for &t in times {
        let (state, drift) = snapshot(state0, prop.evaluate(&coeffs, t))?;
        traj.states.push(state);
        traj.norm_drift.push(drift);
    }
    Ok(traj)
}

/// Sequential Krylov evolution through the sample times.
pub fn evolve_krylov(
    state0: &QuantumState,
    h: &SparseMatrix,
    times: &[f64],
    cfg: &PropagatorConfig,
) -> Result<Trajectory> {
    check_times(times)?;
    check_operator(h, state0.amplitudes().len())?;
    let mut prop = KrylovPropagator::from_config(h, cfg)?;
    let mut traj = Trajectory {
        times: times.to_vec(),
        states: Vec::with_capacity(times.len()),
        norm_drift: Vec::with_capacity(times.len()),
    };
    let mut current = state0.clone();
    let mut t_prev = 0.0;
    for &t in times {
        let amplitudes = prop.propagate(current.amplitudes(), t - t_prev)?;
        let (state, drift) = snapshot(state0, amplitudes)?;
        traj.states.push(state.clone());
        traj.norm_drift.push(drift);
        current = state;
        t_prev = t;
    }
    Ok(traj)
}

/// Which route `cfg` selects for `h`.
pub fn resolve_method(h: &SparseMatrix, cfg: &PropagatorConfig) -> Result<Method> {
    match cfg.method {
        Method::Auto => Ok(if largest_block(h) <= cfg.dense_threshold {
            Method::DenseEig
        } else {
            Method::Krylov
        }),
        Method::DenseEig => {
            let largest = largest_block(h);
            if largest > cfg.dense_threshold {
                return Err(Error::InvalidConfig(format!(
                    "dense_eig requested but the largest block ({largest}) exceeds dense_threshold ({})",
                    cfg.dense_threshold
                )));
            }
            Ok(Method::DenseEig)
        }
        Method::Krylov => Ok(Method::Krylov),
    }
}

/// Evolves `state0` under `h` on the grid `0, dt, …, t_final`.
pub fn evolve(state0: &QuantumState, h: &SparseMatrix, t_final: f64, cfg: &PropagatorConfig) -> Result<Trajectory> {
    cfg.validate()?;
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(Error::InvalidConfig("t_final must be nonnegative".into()));
    }
    check_operator(h, state0.amplitudes().len())?;
    let times = sample_times(t_final, cfg.dt);
    match resolve_method(h, cfg)? {
        Method::Krylov => evolve_krylov(state0, h, &times, cfg),
        _ => evolve_dense(state0, h, &times),
    }
}

/// A propagator usable for both grid trajectories and off-grid evaluations.
pub enum Propagator<'a> {
    Spectral(SpectralPropagator),
    Krylov(KrylovPropagator<'a>),
}

impl<'a> Propagator<'a> {
    pub fn new(h: &'a SparseMatrix, cfg: &PropagatorConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(match resolve_method(h, cfg)? {
            Method::Krylov => Self::Krylov(KrylovPropagator::from_config(h, cfg)?),
            _ => Self::Spectral(SpectralPropagator::new(h)?),
        })
    }

    pub fn method(&self) -> Method {
        match self {
            Self::Spectral(_) => Method::DenseEig,
            Self::Krylov(_) => Method::Krylov,
        }
    }

    pub fn propagate(&mut self, psi: &[Complex64], t: f64) -> Result<Vec<Complex64>> {
        match self {
            Self::Spectral(p) => p.propagate(psi, t),
            Self::Krylov(p) => p.propagate(psi, t),
        }
    }

    pub fn trajectory(&mut self, state0: &QuantumState, times: &[f64]) -> Result<Trajectory> {
        check_times(times)?;
        match self {
            Self::Spectral(p) => {
                let coeffs = p.project(state0.amplitudes())?;
                let mut traj = Trajectory {
                    times: times.to_vec(),
                    states: Vec::with_capacity(times.len()),
                    norm_drift: Vec::with_capacity(times.len()),
                };
                for &t in times {
                    let (state, drift) = snapshot(state0, p.evaluate(&coeffs, t))?;
                    traj.states.push(state);
                    traj.norm_drift.push(drift);
                }
                Ok(traj)
            }
            Self::Krylov(p) => {
                let mut traj = Trajectory {
                    times: times.to_vec(),
                    states: Vec::with_capacity(times.len()),
                    norm_drift: Vec::with_capacity(times.len()),
                };
                let mut current = state0.clone();
                let mut t_prev = 0.0;
                for &t in times {
                    let (state, drift) = snapshot(state0, p.propagate(current.amplitudes(), t - t_prev)?)?;
                    traj.states.push(state.clone());
                    traj.norm_drift.push(drift);
                    current = state;
                    t_prev = t;
                }
                Ok(traj)
            }
        }
    }
}
