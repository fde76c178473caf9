use nalgebra::DMatrix;
use num_complex::Complex64;

use super::*;
use crate::corr::{
    evaluate_kernel, lambda_xx, lambda_yy, lambda_yz, lambda_zy, lambda_zz, KernelKind, OperatorKind, TimeGrid,
};
use crate::dynamics::{run_method, site_state, CMatrix, MethodMode};
use crate::error::Error;
use crate::model::{
    coth_half, reorganization_energy, BathSpec, SiteNetwork, SpectralDensityFamily, TabulatedDensity,
    WAVENUMBER_TO_ANGULAR,
};
use crate::varopt::{RenormalizationState, SiteFraction};

fn cubic(lambda: f64) -> SpectralDensityFamily {
    SpectralDensityFamily::cubic(lambda, 200.0).unwrap()
}

fn beta_at(t: f64) -> f64 {
    BathSpec::broadcast(cubic(1.0), 1, t).unwrap().beta()
}

fn superposition(n: usize) -> CMatrix {
    let mut rho = CMatrix::zeros(n, n);
    for a in 0..2 {
        for b in 0..2 {
            rho[(a, b)] = Complex64::new(0.5, 0.0);
        }
    }
    rho
}

#[test]
fn quadrature_known_integrals() {
    let e = reference_quadrature(|w| w * w * (-w).exp(), Domain::SemiInfinite { panel: 1.0 }, 1e-13).unwrap();
    assert!((e.value - 2.0).abs() < 1e-12, "{}", e.value);
    let e = reference_quadrature(f64::sin, Domain::Finite(0.0, std::f64::consts::PI), 1e-13).unwrap();
    assert!((e.value - 2.0).abs() < 1e-13);
    // endpoint singularity, where tanh-sinh is at its best
    let e = reference_quadrature(|x| 1.0 / x.sqrt(), Domain::Finite(0.0, 1.0), 1e-12).unwrap();
    assert!((e.value - 2.0).abs() < 1e-10, "{}", e.value);
    let j = cubic(60.0);
    let lam = spectral_integral(&j, 0.0, |w| 1.0 / w).unwrap();
    assert!((lam - 60.0).abs() < 60.0 * 1e-8, "{lam}");
    assert!((reorganization_energy(&j).unwrap() - lam).abs() < 1e-8 * lam);
}

#[test]
fn quadrature_reports_unmet_tolerance() {
    let r = reference_quadrature(|x| (1e6 * x).sin(), Domain::Finite(0.0, 1.0), 1e-14);
    assert!(matches!(r, Err(Error::Oracle(_))));
    assert!(reference_quadrature(|x| x, Domain::Finite(0.0, 1.0), 0.0).is_err());
    assert!(reference_quadrature(|_| 0.0, Domain::SemiInfinite { panel: 0.0 }, 1e-8).is_err());
}

#[test]
fn rule_integrates_polynomial() {
    let v: f64 = tanh_sinh_rule(1.0, 3.0, 5).iter().map(|&(x, w)| w * x.powi(7)).sum();
    let exact = (3f64.powi(8) - 1.0) / 8.0;
    assert!((v / exact - 1.0).abs() < 1e-13);
}

#[test]
fn decoherence_values() {
    let j = cubic(60.0);
    let beta = beta_at(300.0);
    assert_eq!(independent_boson_decoherence(&j, beta, 0.0).unwrap(), 0.0);
    // high-precision values of the same integral (30 digits)
    let g = independent_boson_decoherence(&j, beta, 0.1).unwrap();
    assert!((g - 0.334_823_373_333_599_9).abs() < 1e-10 * g, "{g}");
    let g = independent_boson_decoherence(&j, beta, 0.5).unwrap();
    assert!((g - 0.353_953_714_196_152_6).abs() < 1e-10 * g, "{g}");
    let inf = independent_boson_decoherence(&j, beta, f64::INFINITY).unwrap();
    assert!((inf - 0.354_831_594_680_700_7).abs() < 1e-10 * inf, "{inf}");
    // long-time exponent is -2 ln B of the polaron frame
    let b = RenormalizationState::polaron(&BathSpec::broadcast(j.clone(), 1, 300.0).unwrap()).unwrap().b[0];
    assert!((inf + 2.0 * b.ln()).abs() < 1e-9 * inf);
    let ohmic = SpectralDensityFamily::Tabulated(
        TabulatedDensity::new(vec![0.0, 10.0, 20.0, 40.0], vec![0.0, 1.0, 2.0, 1.0]).unwrap(),
    );
    assert!(independent_boson_decoherence(&ohmic, beta, 0.1).is_err());
}

#[test]
fn reference_kernels_agree_with_engine() {
    let beta = beta_at(300.0);
    let frac = SiteFraction::Variational {
        g_r: 0.4,
        g_b: -35.0,
        b: 0.8,
        beta,
    };
    let cases = [
        (cubic(60.0), SiteFraction::Zero),
        (cubic(60.0), SiteFraction::One),
        (cubic(180.0), frac),
        (SpectralDensityFamily::fmo(1.0).unwrap(), SiteFraction::One),
    ];
    for (j, f) in &cases {
        for kind in [KernelKind::Zz, KernelKind::Xy, KernelKind::Yz] {
            for t in [0.0, 0.05, 0.1] {
                let r = reference_kernel(kind, j, f, beta, t).unwrap();
                let e = evaluate_kernel(kind, j, f, beta, t).unwrap();
                let scale = r.norm().max(1e-300);
                assert!((r - e).norm() <= 1e-10f64.max(1e-8 * scale), "{kind:?} t={t} {r} {e}");
            }
        }
    }
}

#[test]
fn discretization_reproduces_reorganization() {
    let j = cubic(60.0);
    for n in 1..=10 {
        let modes = discretize_bath(&j, n).unwrap();
        assert_eq!(modes.len(), n);
        let lam: f64 = modes.iter().map(|m| m.g * m.g / m.omega).sum();
        assert!((lam - 60.0).abs() < 1e-9 * 60.0, "n={n}: {lam}");
        assert!(modes.windows(2).all(|w| w[0].omega < w[1].omega));
    }
    // n = 1 puts the mode at the mean of omega under J/omega, 3 omega_c
    let one = discretize_bath(&j, 1).unwrap();
    assert!((one[0].omega - 600.0).abs() < 1e-8 * 600.0);
    // a Gauss rule of order n integrates J/omega * p exactly for deg p < 2n: check <omega^2>
    let three = discretize_bath(&j, 3).unwrap();
    let m2: f64 = three.iter().map(|m| m.g * m.g * m.omega).sum();
    assert!((m2 / 60.0 - 12.0 * 200.0 * 200.0).abs() < 1e-7 * m2);
    let fmo = discretize_bath(&SpectralDensityFamily::fmo(2.0).unwrap(), 6).unwrap();
    let lam_fmo = reorganization_energy(&SpectralDensityFamily::fmo(2.0).unwrap()).unwrap();
    let sum: f64 = fmo.iter().map(|m| m.g * m.g / m.omega).sum();
    assert!((sum - lam_fmo).abs() < 1e-8 * lam_fmo);
    assert!(discretize_bath(&j, 0).is_err());
}

#[test]
fn narrow_peak_discretizes_to_its_centre() {
    let omega: Vec<f64> = (0..=80).map(|k| 280.0 + 0.5 * k as f64).collect();
    let values: Vec<f64> = omega.iter().map(|w| (-((w - 300.0) / 1.5).powi(2)).exp()).collect();
    let mut om = vec![0.0, 100.0];
    om.extend(&omega);
    let mut va = vec![0.0, 0.0];
    va.extend(&values);
    let j = SpectralDensityFamily::Tabulated(TabulatedDensity::new(om, va).unwrap());
    let m = discretize_bath(&j, 1).unwrap();
    assert!((m[0].omega - 300.0).abs() < 0.5, "{}", m[0].omega);
}

#[test]
fn exact_without_bath_is_coherent_evolution() {
    let net = SiteNetwork::chain(vec![100.0, 0.0], &[50.0]).unwrap();
    let fb = FiniteBath::new(vec![vec![Mode { omega: 200.0, g: 0.0 }]; 2], 3).unwrap();
    let grid = TimeGrid::new(0.01, 0.5).unwrap();
    let rho0 = site_state(2, 0).unwrap();
    let ex = finite_mode_exact(&net, &fb, beta_at(300.0), &rho0, &grid).unwrap();
    let h = net.hamiltonian().map(|v| Complex64::new(v * WAVENUMBER_TO_ANGULAR, 0.0));
    let eig = nalgebra::SymmetricEigen::new(h);
    for (k, rho) in ex.states.iter().enumerate() {
        let t = grid.time(k);
        let u = &eig.eigenvectors
            * DMatrix::from_diagonal(&eig.eigenvalues.map(|e| Complex64::from_polar(1.0, -e * t)))
            * eig.eigenvectors.adjoint();
        let expect = &u * &rho0 * u.adjoint();
        assert!((rho - expect).norm() < 1e-11, "t={t}");
    }
    assert!(ex.norm_defect < 1e-10 && ex.energy_defect < 1e-9);
}

#[test]
fn exact_pure_dephasing_matches_closed_form() {
    let net = SiteNetwork::chain(vec![80.0, 0.0], &[0.0]).unwrap();
    let fb = FiniteBath::new(
        vec![vec![Mode { omega: 200.0, g: 50.0 }], vec![Mode { omega: 150.0, g: 35.0 }]],
        12,
    )
    .unwrap();
    let beta = beta_at(300.0);
    let grid = TimeGrid::new(0.005, 0.4).unwrap();
    let ex = finite_mode_exact(&net, &fb, beta, &superposition(2), &grid).unwrap();
    for k in 0..=grid.n_steps() {
        let t = grid.time(k);
        let expect = 0.5 * (-fb.decoherence(0, beta, t) - fb.decoherence(1, beta, t)).exp();
        assert!((ex.states[k][(0, 1)].norm() - expect).abs() < 1e-8, "t={t}");
        assert!((ex.population(k, 0) - 0.5).abs() < 1e-10);
    }
    assert!(ex.norm_defect < 1e-10, "{}", ex.norm_defect);
    assert!(ex.energy_defect < 1e-10 * 200.0, "{}", ex.energy_defect);
    assert!(ex.leakage < 1e-8);
}

#[test]
fn exact_reports_truncation_leakage() {
    let net = SiteNetwork::chain(vec![0.0, 0.0], &[0.0]).unwrap();
    let fb = FiniteBath::new(vec![vec![Mode { omega: 100.0, g: 150.0 }]; 2], 2).unwrap();
    let grid = TimeGrid::new(0.01, 0.2).unwrap();
    let r = finite_mode_exact(&net, &fb, beta_at(300.0), &superposition(2), &grid);
    assert!(matches!(r, Err(Error::Oracle(_))), "{r:?}");
}

#[test]
fn weak_coupling_is_exact_for_pure_dephasing() {
    // second order is exact for linearly coupled harmonic dephasing
    let net = SiteNetwork::chain(vec![100.0, 0.0], &[0.0]).unwrap();
    let baths = BathSpec::new(vec![cubic(60.0), cubic(30.0)], 300.0).unwrap();
    let grid = TimeGrid::new(0.002, 0.3).unwrap();
    let traj = run_method(&net, &baths, MethodMode::WeakCoupling, &superposition(2), &grid).unwrap();
    let beta = baths.beta();
    for k in (0..=grid.n_steps()).step_by(15) {
        let t = grid.time(k);
        let g1 = independent_boson_decoherence(baths.site(0), beta, t).unwrap();
        let g2 = independent_boson_decoherence(baths.site(1), beta, t).unwrap();
        let expect = 0.5 * (-g1 - g2).exp();
        let got = traj.lab_states[k][(0, 1)].norm();
        assert!((got - expect).abs() < 1e-6, "t={t}: {got} vs {expect}");
    }
}

fn single_mode_phi(sites: &[FockSite], beta: f64, t: f64) -> [Vec<Complex64>; 3] {
    let mut zz = Vec::new();
    let mut xy = Vec::new();
    let mut yz = Vec::new();
    for s in sites {
        let th = WAVENUMBER_TO_ANGULAR * s.omega * t;
        let coth = coth_half(beta * s.omega);
        let even = Complex64::new(coth * th.cos(), -th.sin());
        let odd = Complex64::new(coth * th.sin(), th.cos());
        let f = s.fraction;
        zz.push(even * ((1.0 - f) * (1.0 - f) * s.g * s.g));
        xy.push(even * (f * s.g / s.omega).powi(2));
        yz.push(odd * (f * (1.0 - f) * s.g * s.g / s.omega));
    }
    [zz, xy, yz]
}

#[test]
fn fock_correlators_match_closed_forms() {
    let sites = [
        FockSite { omega: 180.0, g: 60.0, fraction: 0.3 },
        FockSite { omega: 250.0, g: 45.0, fraction: 0.6 },
        FockSite { omega: 320.0, g: 80.0, fraction: 0.85 },
    ];
    let beta = beta_at(300.0);
    let bath = FockBath::new(&sites, beta, 48).unwrap();
    let b: Vec<f64> = sites
        .iter()
        .map(|s| (-0.5 * (s.fraction * s.g / s.omega).powi(2) * coth_half(beta * s.omega)).exp())
        .collect();
    for (n, bn) in b.iter().enumerate() {
        assert!((bath.renormalization(n) - bn).abs() < 1e-12);
    }
    let v = DMatrix::from_row_slice(3, 3, &[0.0, 40.0, -25.0, 40.0, 0.0, 30.0, -25.0, 30.0, 0.0]);
    let pairs: Vec<(usize, usize)> = (0..3).flat_map(|a| (0..3).filter(move |&c| c != a).map(move |c| (a, c))).collect();
    let mut ops: Vec<OperatorKind> = (0..3).map(OperatorKind::Z).collect();
    ops.extend(pairs.iter().map(|&(a, c)| OperatorKind::X(a, c)));
    ops.extend(pairs.iter().map(|&(a, c)| OperatorKind::Y(a, c)));
    let zero = Complex64::new(0.0, 0.0);
    for t in [0.0, 0.013, 0.05, 0.2] {
        let [zz, xy, yz] = single_mode_phi(&sites, beta, t);
        for &i in &ops {
            for &j in &ops {
                let expect = match (i, j) {
                    (OperatorKind::Z(n), OperatorKind::Z(p)) => lambda_zz(n, p, &zz),
                    (OperatorKind::X(n, m), OperatorKind::X(p, q)) => lambda_xx(n, m, p, q, &v, &b, &xy),
                    (OperatorKind::Y(n, m), OperatorKind::Y(p, q)) => lambda_yy(n, m, p, q, &v, &b, &xy),
                    (OperatorKind::Y(n, m), OperatorKind::Z(p)) => lambda_yz(n, m, p, &v, &b, &yz),
                    (OperatorKind::Z(p), OperatorKind::Y(n, m)) => lambda_zy(p, n, m, &v, &b, &yz),
                    _ => zero,
                };
                let got = bath.correlation(&v, i, j, t);
                assert!(
                    (got - expect).norm() < 1e-9 * (1.0 + expect.norm()),
                    "t={t} {i:?} {j:?}: fock {got} formula {expect}"
                );
            }
        }
    }
}

#[test]
fn weak_coupling_tracks_exact_discrete_bath() {
    let net = SiteNetwork::chain(vec![100.0, 0.0], &[60.0]).unwrap();
    let baths = BathSpec::broadcast(cubic(2.0), 2, 300.0).unwrap();
    let fb = FiniteBath::from_baths(&baths, 2, 3).unwrap();
    assert!((fb.reorganization(0) - 2.0).abs() < 1e-9);
    let grid = TimeGrid::new(0.002, 0.1).unwrap();
    let rho0 = site_state(2, 0).unwrap();
    let ex = finite_mode_exact(&net, &fb, baths.beta(), &rho0, &grid).unwrap();
    let me = engine_on_finite_bath(&net, &fb, baths.beta(), &rho0, &grid).unwrap();
    let mut worst = 0.0f64;
    for k in 0..=grid.n_steps() {
        worst = worst.max((ex.population(k, 0) - me.population(k, 0)).abs());
    }
    assert!(worst < 5e-3, "{worst}");
}
