//! Spin squeezing of an atomic ensemble through continuous swapping of
//! atom-photon entanglement.
//!
//! The atoms form a collective spin `S`, the two polarization modes of the
//! light a Schwinger spin `J`. Their interaction
//! `H = alpha (J+ S+ + J- S-) + beta Jz Sz` entangles the two and squeezes
//! the atomic spin. The crate builds the operators ([`algebra`],
//! [`hamiltonian`]), evolves states ([`propagate`]), measures squeezing and
//! entanglement ([`observables`]) and runs the scaling studies
//! ([`experiments`]).

pub mod algebra;
pub mod error;
pub mod experiments;
pub mod fit;
pub mod hamiltonian;
pub mod observables;
pub mod propagate;
pub mod sparse;

pub use algebra::{
    build_spin_operators, coherent_state_x, product_state, x_polarized_state, Factor, ProductSpace, QuantumState,
    SpinOperators, SpinQuantum,
};
pub use error::{Error, Result};
pub use experiments::{
    ku_comparison, perturbation_study, run_dynamics, squeezing_series, sweep_rmin_vs_s, sweep_t_star_vs_j,
    DynamicsRun, MinimumKind, Partner, SweepResult, SweepSpec, SweepVariable,
};
pub use hamiltonian::{build_ku_hamiltonian, build_swap_hamiltonian, LevelScheme, ModelParams};
pub use observables::{squeezing_report, LiftedSpin, SpinMoments, SqueezingReport};
pub use propagate::{evolve, Method, PropagatorConfig, Trajectory};
pub use sparse::SparseMatrix;
