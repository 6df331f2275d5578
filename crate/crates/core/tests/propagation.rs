use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

use swapsqueeze::algebra::vector_norm;
use swapsqueeze::experiments::ku_analytic_sx;
use swapsqueeze::propagate::{evolve, KrylovPropagator, Method, SpectralPropagator};
use swapsqueeze::{
    build_ku_hamiltonian, build_spin_operators, build_swap_hamiltonian, x_polarized_state, ModelParams, ProductSpace,
    PropagatorConfig, QuantumState, SparseMatrix, SpinQuantum,
};

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// `exp(-iHt)` summed term by term from its Taylor series.
fn series_exp(h: &DMatrix<Complex64>, t: f64) -> DMatrix<Complex64> {
    let n = h.nrows();
    let a = h * Complex64::new(0.0, -t);
    let mut term = DMatrix::<Complex64>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..200 {
        term = &term * &a / c(k as f64);
        sum += &term;
        if term.iter().all(|v| v.norm() < 1e-300) {
            break;
        }
    }
    sum
}

fn random_hermitian(n: usize, raw: &[f64]) -> SparseMatrix {
    let m = DMatrix::from_fn(n, n, |r, col| {
        let k = 2 * (r * n + col);
        Complex64::new(raw[k], raw[k + 1])
    });
    SparseMatrix::from_dense(&((&m + m.adjoint()) * c(0.5)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn krylov_agrees_with_diagonalization(
        raw in prop::collection::vec(-1.0f64..1.0, 2 * 64 * 64),
        psi_raw in prop::collection::vec(-1.0f64..1.0, 2 * 64),
        t in -2.0f64..2.0,
    ) {
        let h = random_hermitian(64, &raw);
        let psi: Vec<Complex64> = psi_raw.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect();
        let norm = vector_norm(&psi);
        let psi: Vec<Complex64> = psi.iter().map(|v| v / norm).collect();
        let exact = SpectralPropagator::new(&h).unwrap().propagate(&psi, t).unwrap();
        let mut krylov = KrylovPropagator::new(&h, 30, 1e-12).unwrap();
        let approx = krylov.propagate(&psi, t).unwrap();
        prop_assert!(max_diff(&exact, &approx) < 1e-8);
    }
}

#[test]
fn both_routes_agree_on_the_swap_model() {
    let space = ProductSpace::new(SpinQuantum::integer(2), SpinQuantum::integer(8));
    let h = build_swap_hamiltonian(space, ModelParams::new(1.0, 0.3));
    let psi0 = x_polarized_state(space);
    let dense = evolve(&psi0, &h, 2.0, &PropagatorConfig::default().with_method(Method::DenseEig).with_dt(0.1)).unwrap();
    let krylov = evolve(&psi0, &h, 2.0, &PropagatorConfig::default().with_method(Method::Krylov).with_dt(0.1)).unwrap();
    assert_eq!(dense.len(), 21);
    for (a, b) in dense.states.iter().zip(&krylov.states) {
        assert!(max_diff(a.amplitudes(), b.amplitudes()) < 1e-8);
    }
}

#[test]
fn ku_mean_spin_follows_the_closed_form() {
    for s in [2u32, 10] {
        let spin = SpinQuantum::integer(s);
        let space = ProductSpace::new(spin, SpinQuantum::integer(0));
        let h = build_ku_hamiltonian(spin, 1.0);
        let ops = build_spin_operators(spin);
        for method in [Method::DenseEig, Method::Krylov] {
            let cfg = PropagatorConfig::default().with_method(method).with_dt(0.01);
            let traj = evolve(&x_polarized_state(space), &h, std::f64::consts::PI, &cfg).unwrap();
            for (t, state) in traj.times.iter().zip(&traj.states) {
                let psi = state.amplitudes();
                let sx = ops.x.expectation(psi).re;
                assert!((sx - ku_analytic_sx(spin, *t)).abs() < 1e-8, "S={s} {method:?} t={t}");
                assert!(ops.y.expectation(psi).re.abs() < 1e-10);
                assert!(ops.z.expectation(psi).re.abs() < 1e-10);
            }
        }
    }
}

fn two_spin_halves() -> (ProductSpace, DMatrix<Complex64>) {
    let half = SpinQuantum::from_twice(1);
    let space = ProductSpace::new(half, half);
    // Basis |up up>, |up down>, |down up>, |down down>; alpha = 1, beta = 0.4.
    let beta = 0.4;
    let mut h = DMatrix::<Complex64>::zeros(4, 4);
    h[(0, 3)] = c(1.0);
    h[(3, 0)] = c(1.0);
    for (k, sign) in [1.0, -1.0, -1.0, 1.0].into_iter().enumerate() {
        h[(k, k)] = c(0.25 * beta * sign);
    }
    (space, h)
}

#[test]
fn two_spin_halves_match_the_series_exponential() {
    let (space, hand) = two_spin_halves();
    let h = build_swap_hamiltonian(space, ModelParams::new(1.0, 0.4));
    assert!(h.to_dense().iter().zip(hand.iter()).all(|(a, b)| (a - b).norm() < 1e-15));
    let psi0 = x_polarized_state(space);
    for method in [Method::DenseEig, Method::Krylov] {
        let cfg = PropagatorConfig::default().with_method(method).with_dt(0.05);
        let traj = evolve(&psi0, &h, 2.0 * std::f64::consts::PI, &cfg).unwrap();
        for (t, state) in traj.times.iter().zip(&traj.states) {
            let expected = series_exp(&hand, *t) * nalgebra::DVector::from_column_slice(psi0.amplitudes());
            assert!(max_diff(state.amplitudes(), expected.as_slice()) < 1e-10, "{method:?} t={t}");
        }
    }
}

#[test]
fn double_flip_oscillates_as_sin_squared() {
    let half = SpinQuantum::from_twice(1);
    let space = ProductSpace::new(half, half);
    let h = build_swap_hamiltonian(space, ModelParams::swap_only(1.0));
    let mut amps = vec![c(0.0); 4];
    amps[3] = c(1.0);
    let down_down = QuantumState::new(space, amps).unwrap();
    let traj = evolve(&down_down, &h, 3.0, &PropagatorConfig::default().with_dt(0.1)).unwrap();
    for (t, state) in traj.times.iter().zip(&traj.states) {
        assert!((state.amplitude(0, 0).norm_sqr() - t.sin().powi(2)).abs() < 1e-12);
    }
}

#[test]
fn evolution_reverses() {
    let space = ProductSpace::new(SpinQuantum::integer(3), SpinQuantum::from_twice(9));
    let h = build_swap_hamiltonian(space, ModelParams::new(1.0, 0.1));
    let psi0 = x_polarized_state(space);
    let spectral = SpectralPropagator::new(&h).unwrap();
    let forward = spectral.propagate(psi0.amplitudes(), 1.7).unwrap();
    let back = spectral.propagate(&forward, -1.7).unwrap();
    assert!(max_diff(&back, psi0.amplitudes()) < 1e-7);

    let mut krylov = KrylovPropagator::new(&h, 30, 1e-10).unwrap();
    let forward = krylov.propagate(psi0.amplitudes(), 1.7).unwrap();
    let back = krylov.propagate(&forward, -1.7).unwrap();
    assert!(max_diff(&back, psi0.amplitudes()) < 1e-7);
}

#[test]
fn norm_energy_and_difference_conserved() {
    let space = ProductSpace::new(SpinQuantum::integer(4), SpinQuantum::integer(6));
    let h = build_swap_hamiltonian(space, ModelParams::new(1.0, 0.5));
    let jz = space.lift_field(&build_spin_operators(space.field).z).unwrap();
    let sz = space.lift_spin(&build_spin_operators(space.spin).z).unwrap();
    let diff = &jz - &sz;
    let psi0 = x_polarized_state(space);
    let e0 = h.expectation(psi0.amplitudes()).re;
    let d0 = diff.expectation(psi0.amplitudes()).re;
    let scale = h.max_abs() * space.dim() as f64;
    for method in [Method::DenseEig, Method::Krylov] {
        let traj = evolve(&psi0, &h, 3.0, &PropagatorConfig::default().with_method(method)).unwrap();
        assert!(traj.max_norm_drift() <= 1e-8, "{method:?}");
        for state in &traj.states {
            assert!((h.expectation(state.amplitudes()).re - e0).abs() <= 1e-7 * scale);
            assert!((diff.expectation(state.amplitudes()).re - d0).abs() <= 1e-8);
        }
    }
}
