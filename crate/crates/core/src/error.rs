use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("state is not normalized (norm = {norm})")]
    NotNormalized { norm: f64 },

    #[error("operator is not Hermitian (max |H - H^dagger| = {residual:e})")]
    NotHermitian { residual: f64 },

    #[error("density matrix trace deviates from 1 (trace = {trace})")]
    BadTrace { trace: f64 },

    #[error("eigendecomposition failed: {0}")]
    Eigensolver(String),

    #[error("Krylov propagation did not converge (step size {step:e} underflowed)")]
    KrylovNoConvergence { step: f64 },

    #[error("detunings must be positive and nonzero (delta = {delta}, Delta = {big_delta})")]
    ZeroDetuning { delta: f64, big_delta: f64 },

    #[error("coupling ratios differ between branches: |g-e1|^2/|g-e2|^2 = {minus}, |g+e1|^2/|g+e2|^2 = {plus}")]
    AsymmetricCoupling { minus: f64, plus: f64 },

    #[error("excited-state coupling g_e2 vanishes; no cancellation ratio exists")]
    VanishingCoupling,

    #[error("{quantity} is undefined: {reason}")]
    Undefined {
        quantity: &'static str,
        reason: &'static str,
    },

    #[error("no squeezing found within t_max = {t_max}")]
    NoSqueezing { t_max: f64 },

    #[error("sweep point {param} failed: {source}")]
    SweepPoint {
        param: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
