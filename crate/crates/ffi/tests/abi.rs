use std::ffi::{CStr, CString};
use std::ptr;

use varpolaron_ffi::*;

fn last_error() -> String {
    let p = vp_last_error_message();
    assert!(!p.is_null(), "no error message recorded");
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn dimer() -> (*mut VpNetwork, *mut VpBath) {
    let mut net = ptr::null_mut();
    let mut bath = ptr::null_mut();
    unsafe {
        assert_eq!(vp_network_new([100.0, 0.0].as_ptr(), [0.0, 50.0, 50.0, 0.0].as_ptr(), 2, &mut net), VpStatus::Ok);
        assert_eq!(vp_bath_cubic([20.0, 20.0].as_ptr(), [100.0, 100.0].as_ptr(), 2, 300.0, &mut bath), VpStatus::Ok);
    }
    (net, bath)
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(vp_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn simulate_and_read_back() {
    let (net, bath) = dimer();
    unsafe {
        assert_eq!(vp_network_n_sites(net), 2);
        let mut traj = ptr::null_mut();
        assert_eq!(vp_simulate(net, bath, VpMethod::Variational, 0, 0.002, 0.1, &mut traj), VpStatus::Ok);
        let len = vp_trajectory_len(traj);
        assert_eq!(len, 51);
        assert_eq!(vp_trajectory_n_sites(traj), 2);
        let mut times = vec![0.0; len];
        let mut p1 = vec![0.0; len];
        let mut p2 = vec![0.0; len];
        assert_eq!(vp_trajectory_times(traj, times.as_mut_ptr(), len), VpStatus::Ok);
        assert_eq!(vp_trajectory_populations(traj, 0, p1.as_mut_ptr(), len), VpStatus::Ok);
        assert_eq!(vp_trajectory_populations(traj, 1, p2.as_mut_ptr(), len), VpStatus::Ok);
        assert!((times[len - 1] - 0.1).abs() < 1e-12);
        assert_eq!(p1[0], 1.0);
        assert!(p1[len - 1] < 0.99);
        for k in 0..len {
            assert!((p1[k] + p2[k] - 1.0).abs() < 1e-9);
        }
        let (mut re, mut im) = ([0.0; 4], [0.0; 4]);
        assert_eq!(vp_trajectory_state(traj, len - 1, re.as_mut_ptr(), im.as_mut_ptr()), VpStatus::Ok);
        assert_eq!(re[0], p1[len - 1]);
        assert_eq!(re[1], re[2]);
        assert_eq!(im[1], -im[2]);
        let mut b = [0.0; 2];
        assert_eq!(vp_trajectory_renormalization(traj, b.as_mut_ptr(), 2), VpStatus::Ok);
        assert!(b.iter().all(|&x| x > 0.0 && x < 1.0));
        vp_trajectory_free(traj);
        vp_network_free(net);
        vp_bath_free(bath);
    }
}

#[test]
fn explicit_density_matrix() {
    let (net, bath) = dimer();
    unsafe {
        let mut traj = ptr::null_mut();
        let re = [0.5, 0.5, 0.5, 0.5];
        let status = vp_simulate_density(net, bath, VpMethod::Weak, re.as_ptr(), ptr::null(), 0.005, 0.05, &mut traj);
        assert_eq!(status, VpStatus::Ok);
        assert_eq!(vp_trajectory_len(traj), 11);
        vp_trajectory_free(traj);
        let bad = [0.5, 0.9, 0.9, 0.5];
        let status = vp_simulate_density(net, bath, VpMethod::Weak, bad.as_ptr(), ptr::null(), 0.005, 0.05, &mut traj);
        assert_eq!(status, VpStatus::InvalidArgument);
        assert!(last_error().contains("positive"), "{}", last_error());
        vp_network_free(net);
        vp_bath_free(bath);
    }
}

#[test]
fn errors_map_to_status_codes() {
    unsafe {
        let mut net = ptr::null_mut();
        // asymmetric couplings
        let status = vp_network_new([0.0, 0.0].as_ptr(), [0.0, 1.0, 2.0, 0.0].as_ptr(), 2, &mut net);
        assert_eq!(status, VpStatus::InvalidNetwork);
        assert!(net.is_null());
        assert!(last_error().contains("symmetric") || last_error().contains("Hermitian"), "{}", last_error());

        assert_eq!(vp_network_new(ptr::null(), ptr::null(), 2, &mut net), VpStatus::NullPointer);
        assert_eq!(vp_network_fmo7(ptr::null_mut()), VpStatus::NullPointer);

        let mut bath = ptr::null_mut();
        assert_eq!(vp_bath_fmo([-1.0].as_ptr(), 1, 77.0, &mut bath), VpStatus::InvalidArgument);

        let (net, bath) = dimer();
        let mut traj = ptr::null_mut();
        assert_eq!(vp_simulate(net, bath, VpMethod::Weak, 5, 0.01, 0.1, &mut traj), VpStatus::InvalidArgument);
        assert_eq!(vp_simulate(net, bath, VpMethod::Weak, 0, 0.03, 0.1, &mut traj), VpStatus::InvalidArgument);
        assert!(last_error().contains("multiple"), "{}", last_error());
        assert_eq!(vp_trajectory_times(ptr::null(), ptr::null_mut(), 0), VpStatus::NullPointer);

        // a successful call clears the message
        let mut fmo = ptr::null_mut();
        assert_eq!(vp_network_fmo7(&mut fmo), VpStatus::Ok);
        assert!(vp_last_error_message().is_null());
        assert_eq!(vp_network_n_sites(fmo), 7);
        assert_eq!(vp_network_n_sites(ptr::null()), 0);
        vp_network_free(fmo);
        vp_network_free(net);
        vp_bath_free(bath);
        vp_network_free(ptr::null_mut());
    }
}

#[test]
fn bath_size_mismatch_is_reported() {
    let (net, _) = dimer();
    unsafe {
        let mut bath = ptr::null_mut();
        assert_eq!(vp_bath_fmo([1.0].as_ptr(), 1, 77.0, &mut bath), VpStatus::Ok);
        let mut traj = ptr::null_mut();
        assert_ne!(vp_simulate(net, bath, VpMethod::Weak, 0, 0.01, 0.1, &mut traj), VpStatus::Ok);
        assert!(traj.is_null());
        vp_bath_free(bath);
        vp_network_free(net);
    }
}

#[test]
fn run_config_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = CString::new(
        "[system]\nenergies = [100, 0]\ncouplings = [[0, 50], [50, 0]]\n\
         [bath]\nfamily = \"cubic\"\nlambda = 20\nomega_c = 100\n\
         [run]\ntemperature_K = 300\nt_max_ps = 0.05\ndt_ps = 0.005\nmethods = [\"weak\"]\n\
         [sweep]\ninitial_site = [1, 2]\n",
    )
    .unwrap();
    let out = CString::new(dir.path().to_str().unwrap()).unwrap();
    let mut failures = usize::MAX;
    let status = unsafe { vp_run_config(cfg.as_ptr(), out.as_ptr(), 1, &mut failures) };
    assert_eq!(status, VpStatus::Ok);
    assert_eq!(failures, 0);
    assert!(dir.path().join("T300K_site2_weak.csv").exists());
    assert!(dir.path().join("manifest.toml").exists());

    let bad = CString::new("[run]\ntemperature_K = 1\n").unwrap();
    assert_eq!(unsafe { vp_run_config(bad.as_ptr(), out.as_ptr(), 1, ptr::null_mut()) }, VpStatus::Config);
    assert!(last_error().contains("system"), "{}", last_error());
}
