use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

use swapsqueeze::experiments::{find_t_star, MinimumKind};
use swapsqueeze::fit::power_law_fit;
use swapsqueeze::observables::{
    optimal_squeezing_direction, reduced_field_density, reduced_spin_density, schmidt_number, schmidt_spectrum,
    spin_moments, squeezing_ratio, squeezing_ratio_from, von_neumann_entropy, xi_squared, xi_squared_from,
};
use swapsqueeze::propagate::sample_times;
use swapsqueeze::{build_spin_operators, LiftedSpin, ProductSpace, QuantumState, SparseMatrix, SpinMoments, SpinQuantum};

fn random_state(space: ProductSpace, raw: &[f64]) -> QuantumState {
    let amps: Vec<Complex64> = raw.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect();
    QuantumState::renormalized(space, amps).unwrap().0
}

fn small_spaces() -> impl Strategy<Value = (ProductSpace, Vec<f64>)> {
    (0u32..6, 0u32..6).prop_flat_map(|(a, b)| {
        let space = ProductSpace::new(SpinQuantum::from_twice(a), SpinQuantum::from_twice(b));
        let n = 2 * space.dim();
        (Just(space), prop::collection::vec(-1.0f64..1.0, n).prop_filter("nonzero", |v| {
            v.iter().any(|x| x.abs() > 1e-3)
        }))
    })
}

fn moments_with(psi: &[Complex64], ops: &(SparseMatrix, SparseMatrix, SparseMatrix)) -> SpinMoments {
    let ev = |a: &SparseMatrix, b: &SparseMatrix| {
        let bp = b.mul_vec(psi);
        let ap = a.mul_vec(psi);
        ap.iter().zip(&bp).map(|(x, y)| x.conj() * y).sum::<Complex64>().re
    };
    let mean = [ops.0.expectation(psi).re, ops.1.expectation(psi).re, ops.2.expectation(psi).re];
    let yz = ev(&ops.1, &ops.2) - mean[1] * mean[2];
    SpinMoments {
        mean,
        covariance_yz: [[ev(&ops.1, &ops.1) - mean[1] * mean[1], yz], [yz, ev(&ops.2, &ops.2) - mean[2] * mean[2]]],
    }
}

fn random_operator(n: usize, raw: &[f64]) -> SparseMatrix {
    let dense = DMatrix::from_fn(n, n, |r, c| {
        let k = 2 * (r * n + c);
        Complex64::new(raw[k], raw[k + 1])
    });
    SparseMatrix::from_dense(&dense)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spin_algebra_closes(two_s in 0u32..=40) {
        let ops = build_spin_operators(SpinQuantum::from_twice(two_s));
        prop_assert!(ops.commutator_residual() <= 1e-12 * (1.0 + f64::from(two_s)));
        let sum = &(&(&ops.x * &ops.x) + &(&ops.y * &ops.y)) + &(&ops.z * &ops.z);
        prop_assert!(sum.max_abs_diff(&ops.casimir).unwrap() <= 1e-10 * (1.0 + f64::from(two_s * two_s)));
    }

    #[test]
    fn lift_is_an_algebra_homomorphism(
        two_s in 0u32..4,
        two_j in 0u32..4,
        raw in prop::collection::vec(-1.0f64..1.0, 4 * 2 * 5 * 5),
    ) {
        let space = ProductSpace::new(SpinQuantum::from_twice(two_s), SpinQuantum::from_twice(two_j));
        let ds = space.spin.dim();
        let dj = space.field.dim();
        let a = random_operator(ds, &raw[..2 * ds * ds]);
        let b = random_operator(ds, &raw[50..50 + 2 * ds * ds]);
        let c = random_operator(dj, &raw[100..100 + 2 * dj * dj]);
        let lift_ab = space.lift_spin(&(&a * &b)).unwrap();
        let ab_lifted = &space.lift_spin(&a).unwrap() * &space.lift_spin(&b).unwrap();
        prop_assert!(lift_ab.max_abs_diff(&ab_lifted).unwrap() < 1e-12);
        let sum = space.lift_spin(&(&a + &b)).unwrap();
        let lifted_sum = &space.lift_spin(&a).unwrap() + &space.lift_spin(&b).unwrap();
        prop_assert!(sum.max_abs_diff(&lifted_sum).unwrap() < 1e-12);
        let (la, lc) = (space.lift_spin(&a).unwrap(), space.lift_field(&c).unwrap());
        prop_assert!((&la * &lc).max_abs_diff(&(&lc * &la)).unwrap() < 1e-12);
    }

    #[test]
    fn schmidt_symmetry_and_bounds((space, raw) in small_spaces()) {
        let state = random_state(space, &raw);
        let rho_j = reduced_field_density(&state);
        let rho_s = reduced_spin_density(&state);
        let s_j = von_neumann_entropy(&rho_j).unwrap();
        let s_s = von_neumann_entropy(&rho_s).unwrap();
        prop_assert!((s_j - s_s).abs() < 1e-9);
        let k = schmidt_number(&rho_j).unwrap();
        prop_assert!((k - schmidt_number(&rho_s).unwrap()).abs() < 1e-9);
        prop_assert!(k >= 1.0 - 1e-12);
        prop_assert!(k <= space.spin.dim().min(space.field.dim()) as f64 + 1e-9);
        for (l, r) in [(&rho_j, rho_j.adjoint()), (&rho_s, rho_s.adjoint())] {
            prop_assert!((l - r).iter().all(|v| v.norm() < 1e-14));
            prop_assert!((l.trace().re - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn schmidt_spectrum_matches_singular_values((space, raw) in small_spaces()) {
        let state = random_state(space, &raw);
        let spectrum = schmidt_spectrum(&state).unwrap();
        let mut sv2: Vec<f64> = state.amplitude_matrix().singular_values().iter().map(|s| s * s).collect();
        sv2.sort_by(|a, b| b.total_cmp(a));
        prop_assert_eq!(spectrum.len(), sv2.len());
        for (a, b) in spectrum.iter().zip(&sv2) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        prop_assert!(spectrum.iter().all(|l| *l > -1e-10));
    }

    #[test]
    fn metrics_ignore_global_phase((space, raw) in small_spaces(), phase in 0.0f64..6.3) {
        prop_assume!(space.spin.two_s() > 0);
        let state = random_state(space, &raw);
        let rotated: Vec<Complex64> = state.amplitudes().iter().map(|a| a * Complex64::from_polar(1.0, phase)).collect();
        let rotated = QuantumState::new(space, rotated).unwrap();
        let ops = LiftedSpin::new(space);
        let m = spin_moments(&state, &ops).unwrap();
        prop_assume!(m.mean_magnitude() > 1e-6);
        prop_assert!((squeezing_ratio(&state, &ops).unwrap() - squeezing_ratio(&rotated, &ops).unwrap()).abs() < 1e-9);
        if let (Ok(a), Ok(b)) = (xi_squared(&state, &ops), xi_squared(&rotated, &ops)) {
            prop_assert!((a - b).abs() < 1e-9 * a.abs().max(1.0));
        }
    }

    #[test]
    fn metrics_invariant_under_factor_exchange(two_s in 1u32..6, raw in prop::collection::vec(-1.0f64..1.0, 72)) {
        let q = SpinQuantum::from_twice(two_s);
        let space = ProductSpace::new(q, q);
        let n = space.dim();
        let state = random_state(space, &raw[..2 * n]);
        // nalgebra iterates column by column, which is the row-major layout of the transpose.
        let swapped_amps: Vec<Complex64> = state.amplitude_matrix().iter().copied().collect();
        let swapped = QuantumState::new(space, swapped_amps).unwrap();
        prop_assert_eq!(swapped.amplitude_matrix(), state.amplitude_matrix().transpose());
        let k = |s: &QuantumState| schmidt_number(&reduced_field_density(s)).unwrap();
        let e = |s: &QuantumState| von_neumann_entropy(&reduced_field_density(s)).unwrap();
        prop_assert!((k(&state) - k(&swapped)).abs() < 1e-9);
        prop_assert!((e(&state) - e(&swapped)).abs() < 1e-9);
        // Exchanging the factors turns the spin into the field: the spin metrics of
        // one state are the field metrics of the other.
        let field_ops_of_swapped = {
            let ops = build_spin_operators(q);
            let lift = |op: &SparseMatrix| space.lift_field(op).unwrap();
            (lift(&ops.x), lift(&ops.y), lift(&ops.z))
        };
        let ops = LiftedSpin::new(space);
        let direct = spin_moments(&state, &ops).unwrap();
        let mirrored = moments_with(swapped.amplitudes(), &field_ops_of_swapped);
        for (a, b) in direct.mean.iter().zip(mirrored.mean) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        prop_assume!(direct.mean_magnitude() > 1e-6);
        let r = squeezing_ratio_from(&direct).unwrap();
        prop_assert!((r - squeezing_ratio_from(&mirrored).unwrap()).abs() < 1e-9);
        if let (Ok(a), Ok(b)) = (xi_squared_from(&direct, q), xi_squared_from(&mirrored, q)) {
            prop_assert!((a - b).abs() < 1e-9 * a.abs().max(1.0));
        }
    }

    #[test]
    fn closed_form_direction_beats_grid(a in 0.0f64..3.0, c in 0.0f64..3.0, t in -1.0f64..1.0) {
        let b = t * (a * c).sqrt();
        let m = SpinMoments { mean: [1.0, 0.0, 0.0], covariance_yz: [[a, b], [b, c]] };
        let d = optimal_squeezing_direction(&m);
        prop_assert!(d.theta_z >= 0.0 && d.theta_z < std::f64::consts::PI);
        for k in 0..360 {
            let theta = k as f64 * std::f64::consts::PI / 360.0;
            prop_assert!(d.variance_min <= m.variance_along(theta) + 1e-12);
        }
    }

    #[test]
    fn power_laws_recovered(exponent in -2.0f64..2.0, scale in 0.1f64..10.0) {
        let xs = [5.0, 10.0, 20.0, 40.0, 80.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| scale * x.powf(exponent)).collect();
        let fit = power_law_fit(&xs, &ys).unwrap();
        prop_assert!((fit.slope - exponent).abs() < 1e-12);
    }

    #[test]
    fn refined_minimum_of_a_parabola(center in 0.5f64..2.5, depth in 0.05f64..0.9, curvature in 0.5f64..5.0) {
        let f = |t: f64| 1.0 - depth + curvature * (t - center).powi(2);
        let times = sample_times(3.0, 0.05);
        let r: Vec<f64> = times.iter().map(|&t| f(t)).collect();
        let m = find_t_star(&times, &r, MinimumKind::First, f).unwrap();
        prop_assert!((m.t_star - center).abs() <= 1e-4 * center);
        prop_assert!((m.r_min - (1.0 - depth)).abs() < 1e-6);
    }
}
