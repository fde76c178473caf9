use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

use super::*;
use crate::corr::{build_correlation_table, OperatorKind};
use crate::model::{SpectralDensityFamily, WAVENUMBER_TO_ANGULAR};
use crate::varopt::RenormalizationState;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |a, z| a.max(z.norm()))
}

fn cubic_baths(lambdas: &[f64], t: f64) -> BathSpec {
    BathSpec::new(
        lambdas
            .iter()
            .map(|&l| SpectralDensityFamily::cubic(l, 200.0).unwrap())
            .collect(),
        t,
    )
    .unwrap()
}

fn regime_b() -> (SiteNetwork, BathSpec) {
    (
        SiteNetwork::chain(vec![50.0, 50.0, 0.0], &[300.0, 100.0]).unwrap(),
        cubic_baths(&[180.0; 3], 300.0),
    )
}

fn random_hermitian(n: usize, seed: &[f64]) -> CMatrix {
    let mut m = CMatrix::zeros(n, n);
    let mut k = 0;
    for r in 0..n {
        for col in r..n {
            let re = seed[k % seed.len()];
            let im = if r == col { 0.0 } else { seed[(k + 1) % seed.len()] };
            m[(r, col)] = c(re, im);
            m[(col, r)] = c(re, -im);
            k += 2;
        }
    }
    m
}

#[test]
fn interaction_picture_identity_cases() {
    let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, -0.5]);
    let eig = HamiltonianEigen::new(&h);
    let x = OperatorKind::X(0, 1).matrix(2);
    assert!(max_abs(&(interaction_picture_operator(&x, 0.0, &eig) - &x)) < 1e-15);
    let diag = DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, -1.0]);
    let eig = HamiltonianEigen::new(&diag);
    let z = OperatorKind::Z(0).matrix(2);
    assert!(max_abs(&(interaction_picture_operator(&z, 3.7, &eig) - &z)) < 1e-15);
}

#[test]
fn symmetric_dimer_rotation() {
    // H = J sigma_x, U(s) = cos(Js) - i sin(Js) sigma_x
    let j = 2.5;
    let h = DMatrix::from_row_slice(2, 2, &[0.0, j, j, 0.0]);
    let eig = HamiltonianEigen::new(&h);
    let s = std::f64::consts::PI / (2.0 * 2.0 * j);
    let (co, si) = ((j * s).cos(), (j * s).sin());
    let u = CMatrix::from_row_slice(2, 2, &[c(co, 0.0), c(0.0, -si), c(0.0, -si), c(co, 0.0)]);
    for op in [OperatorKind::X(0, 1), OperatorKind::Y(0, 1), OperatorKind::Z(1)] {
        let m = op.matrix(2);
        let expected = &u * &m * u.adjoint();
        let got = interaction_picture_operator(&m, s, &eig);
        assert!(max_abs(&(got - expected)) < 1e-14, "{op:?}");
    }
}

#[test]
fn coherent_superoperator_matches_commutator() {
    let h = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, -0.4, 0.2, -2.0, 0.7, -0.4, 0.7, 0.5]);
    let rho = random_hermitian(3, &[0.3, -0.1, 0.25, 0.05, 0.4, -0.2]);
    let hc = h.map(|x| c(x, 0.0));
    let expected = (&hc * &rho - &rho * &hc) * c(0.0, -1.0);
    let got = coherent_superoperator(&h) * DVector::from_column_slice(rho.as_slice());
    assert!(max_abs(&(CMatrix::from_column_slice(3, 3, got.as_slice()) - expected)) < 1e-14);
}

fn variational_series(grid: &TimeGrid) -> (GeneratorSeries, f64) {
    let (net, baths) = regime_b();
    let (frame, _) = prepare_frame(&net, &baths, MethodMode::Variational, &Default::default()).unwrap();
    let table = build_correlation_table(&net, &baths, &frame, grid).unwrap();
    let h = transformed_system_hamiltonian(&net, &frame.state) * WAVENUMBER_TO_ANGULAR;
    (accumulate_generator(&table, &h, grid).unwrap(), WAVENUMBER_TO_ANGULAR)
}

#[test]
fn generator_starts_at_zero_and_preserves_trace_and_hermiticity() {
    let grid = TimeGrid::new(0.002, 0.1).unwrap();
    let (series, _) = variational_series(&grid);
    assert_eq!(max_abs(&series.dissipative[0]), 0.0);
    assert!(max_abs(&series.dissipative[10]) > 0.0);
    let probes = [
        [0.3, -0.1, 0.25, 0.05, 0.4, -0.2],
        [1.0, 0.5, -0.7, 0.2, 0.1, 0.9],
        [-0.2, 0.3, 0.8, -0.6, 0.05, 0.4],
    ];
    for k in [1, 7, 50] {
        let l = series.generator(k);
        for seed in &probes {
            let rho = random_hermitian(3, seed);
            let out = &l * DVector::from_column_slice(rho.as_slice());
            let out = CMatrix::from_column_slice(3, 3, out.as_slice());
            let scale = max_abs(&rho) * max_abs(&l);
            assert!(out.trace().norm() <= 1e-14 * scale, "trace {:e}", out.trace().norm());
            assert!(max_abs(&(&out - out.adjoint())) <= 1e-14 * scale);
        }
    }
}

#[test]
fn single_site_does_not_evolve() {
    let net = SiteNetwork::new(vec![10.0], DMatrix::zeros(1, 1)).unwrap();
    let baths = cubic_baths(&[60.0], 300.0);
    let grid = TimeGrid::new(0.01, 0.5).unwrap();
    let traj = run_method(&net, &baths, MethodMode::WeakCoupling, &site_state(1, 0).unwrap(), &grid).unwrap();
    for rho in &traj.frame_states {
        assert!((rho[(0, 0)] - c(1.0, 0.0)).norm() < 1e-14);
    }
}

#[test]
fn zero_bath_gives_coherent_rabi_oscillation() {
    let v = 50.0;
    let net = SiteNetwork::chain(vec![0.0, 0.0], &[v]).unwrap();
    let baths = BathSpec::broadcast(SpectralDensityFamily::cubic(0.0, 200.0).unwrap(), 2, 300.0).unwrap();
    let grid = TimeGrid::new(0.001, 0.5).unwrap();
    let traj = run_method(&net, &baths, MethodMode::WeakCoupling, &site_state(2, 0).unwrap(), &grid).unwrap();
    let w = v * WAVENUMBER_TO_ANGULAR;
    for (k, t) in traj.times.iter().enumerate() {
        let expected = (w * t).cos().powi(2);
        // RK4 phase error at omega dt ~ 0.02
        assert!((traj.population(k, 0) - expected).abs() < 1e-7);
    }
}

#[test]
fn uncoupled_dimer_keeps_populations_and_coherence_magnitude() {
    let net = SiteNetwork::chain(vec![50.0, 0.0], &[0.0]).unwrap();
    let baths = cubic_baths(&[60.0, 60.0], 300.0);
    let grid = TimeGrid::new(0.002, 1.0).unwrap();
    let mut rho0 = CMatrix::from_element(2, 2, c(0.5, 0.0));
    rho0[(0, 1)] = c(0.3, 0.2);
    rho0[(1, 0)] = c(0.3, -0.2);
    for mode in MethodMode::ALL {
        let run = run_method_with(&net, &baths, mode, &rho0, &grid, &Default::default()).unwrap();
        let traj = &run.trajectory;
        let b = &traj.b;
        for (frame, lab) in traj.frame_states.iter().zip(&traj.lab_states) {
            assert!((frame[(0, 0)].re - 0.5).abs() < 1e-10);
            assert_eq!(frame[(0, 0)], lab[(0, 0)]);
            if mode != MethodMode::WeakCoupling {
                // nothing couples to the coherence once the displaced frame absorbs the bath
                assert!((frame[(0, 1)].norm() - rho0[(0, 1)].norm()).abs() < 1e-9);
                assert!((lab[(0, 1)].norm() - b[0] * b[1] * rho0[(0, 1)].norm()).abs() < 1e-9);
            }
        }
        if mode == MethodMode::WeakCoupling {
            assert_eq!(b, &vec![1.0, 1.0]);
        } else {
            assert!(b[0] < 1.0);
        }
    }
}

#[test]
fn weak_mode_uses_bare_hamiltonian_and_dephasing_only() {
    let (net, baths) = regime_b();
    let grid = TimeGrid::new(0.01, 0.1).unwrap();
    let (frame, sol) = prepare_frame(&net, &baths, MethodMode::WeakCoupling, &Default::default()).unwrap();
    assert!(sol.is_none());
    assert_eq!(transformed_system_hamiltonian(&net, &frame.state), net.hamiltonian());
    let table = build_correlation_table(&net, &baths, &frame, &grid).unwrap();
    assert!(table
        .entries()
        .iter()
        .all(|e| matches!(table.operators()[e.i], OperatorKind::Z(_))));
    let (pframe, _) = prepare_frame(&net, &baths, MethodMode::FullPolaron, &Default::default()).unwrap();
    let lambdas = baths.reorganization_energies().unwrap();
    for n in 0..3 {
        assert!((pframe.state.r[n] + lambdas[n]).abs() < 1e-8 * lambdas[n]);
    }
}

#[test]
fn regime_b_runs_conserve_trace() {
    let (net, baths) = regime_b();
    let grid = TimeGrid::new(0.002, 0.4).unwrap();
    let rho0 = site_state(3, 0).unwrap();
    for mode in MethodMode::ALL {
        let traj = run_method(&net, &baths, mode, &rho0, &grid).unwrap();
        let (tr, herm) = traj.max_defects();
        assert!(tr < 1e-9 && herm < 1e-9, "{mode}: {tr:e} {herm:e}");
        assert!(traj.population(grid.n_steps(), 0) < 0.9);
    }
}

#[test]
fn grid_mismatch_is_reported() {
    let (net, baths) = regime_b();
    let grid = TimeGrid::new(0.01, 0.1).unwrap();
    let frame = Frame::weak(3, baths.beta());
    let table = build_correlation_table(&net, &baths, &frame, &grid).unwrap();
    let h = net.hamiltonian() * WAVENUMBER_TO_ANGULAR;
    let other = TimeGrid::new(0.005, 0.1).unwrap();
    assert!(matches!(
        GeneratorAccumulator::new(&table, &h, &other),
        Err(Error::GridMismatch(_))
    ));
}

#[test]
fn coarse_step_trips_trace_guard() {
    let net = SiteNetwork::chain(vec![0.0, 0.0], &[500.0]).unwrap();
    let baths = cubic_baths(&[500.0, 500.0], 300.0);
    let grid = TimeGrid::new(0.05, 1.0).unwrap();
    let err = run_method(&net, &baths, MethodMode::WeakCoupling, &site_state(2, 0).unwrap(), &grid);
    assert!(err.is_err());
}

#[test]
fn invalid_initial_states_are_rejected() {
    let (net, baths) = regime_b();
    let grid = TimeGrid::new(0.01, 0.1).unwrap();
    let mut bad = site_state(3, 0).unwrap();
    bad[(1, 1)] = c(0.5, 0.0);
    assert!(run_method(&net, &baths, MethodMode::WeakCoupling, &bad, &grid).is_err());
    assert!(site_state(3, 3).is_err());
}

#[test]
fn back_transform_cases() {
    let rho = random_hermitian(3, &[0.2, 0.1, -0.3, 0.4, 0.05, 0.3]);
    assert_eq!(back_transform(&rho, &[1.0; 3]), rho);
    let diag = CMatrix::from_diagonal(&DVector::from_vec(vec![c(0.2, 0.0), c(0.3, 0.0), c(0.5, 0.0)]));
    assert_eq!(back_transform(&diag, &[0.5, 0.6, 0.7]), diag);
    let out = back_transform(&rho, &[0.5, 0.6, 0.7]);
    assert_eq!(out[(0, 2)], rho[(0, 2)] * 0.35);
}

#[test]
fn mode_names_round_trip() {
    for m in MethodMode::ALL {
        assert_eq!(m.as_str().parse::<MethodMode>().unwrap(), m);
    }
    assert!("exact".parse::<MethodMode>().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn free_evolution_matches_eigenbasis_rotation(
        e in prop::collection::vec(-100.0f64..100.0, 3),
        v in prop::collection::vec(-50.0f64..50.0, 2),
        s in 0.0f64..0.2,
    ) {
        let net = SiteNetwork::chain(e, &v).unwrap();
        let state = RenormalizationState::weak(3);
        let h = transformed_system_hamiltonian(&net, &state) * WAVENUMBER_TO_ANGULAR;
        let eig = HamiltonianEigen::new(&h);
        let op = OperatorKind::Y(0, 1).matrix(3);
        let rotated = interaction_picture_operator(&op, s, &eig);
        // U(s) via eigenvectors
        let v = eig.vectors.map(|x| c(x, 0.0));
        let d = CMatrix::from_diagonal(&eig.energies.map(|en| Complex64::from_polar(1.0, -en * s)));
        let u = &v * d * v.transpose();
        let expected = &u * &op * u.adjoint();
        prop_assert!(max_abs(&(rotated - expected)) < 1e-12);
    }
}
