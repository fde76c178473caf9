//! C ABI for the varpolaron engine.
//!
//! Objects are opaque handles created by `vp_*_new`-style functions and released
//! with the matching `vp_*_free`. Every fallible call returns a `VpStatus`; on
//! failure `vp_last_error_message` describes the error on the calling thread.
//! Matrices are dense, row-major, `n * n` doubles. Site indices are 0-based.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use varpolaron::cli;
use varpolaron::corr::TimeGrid;
use varpolaron::dynamics::{run_method, site_state, CMatrix, MethodMode, Trajectory};
use varpolaron::model::{BathSpec, SiteNetwork, SpectralDensityFamily};
use varpolaron::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidNetwork = 3,
    Config = 4,
    NoConvergence = 5,
    Numerical = 6,
    Io = 7,
    /// A run finished but some sweep points failed.
    PartialFailure = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VpMethod {
    Variational = 0,
    Polaron = 1,
    Weak = 2,
}

impl From<VpMethod> for MethodMode {
    fn from(m: VpMethod) -> Self {
        match m {
            VpMethod::Variational => MethodMode::Variational,
            VpMethod::Polaron => MethodMode::FullPolaron,
            VpMethod::Weak => MethodMode::WeakCoupling,
        }
    }
}

pub struct VpNetwork(SiteNetwork);

pub struct VpBath(BathSpec);

pub struct VpTrajectory(Trajectory);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> VpStatus {
    match e {
        Error::Stage { source, .. } => status_of(source),
        Error::InvalidInput(_) | Error::NegativeFrequency(_) | Error::GridMismatch(_) => VpStatus::InvalidArgument,
        Error::InvalidNetwork(_) => VpStatus::InvalidNetwork,
        Error::Config(_) => VpStatus::Config,
        Error::NoConvergence { .. } | Error::SingularFraction { .. } => VpStatus::NoConvergence,
        Error::Io { .. } => VpStatus::Io,
        _ => VpStatus::Numerical,
    }
}

struct Failure(VpStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(VpStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(VpStatus::InvalidArgument, msg.into())
}

/// Runs `f`, converting errors and panics into a status plus the thread's last error.
fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> VpStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => VpStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            VpStatus::Panic
        }
    }
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn string(p: *const c_char, what: &str) -> Result<String, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

/// Message for the last failed call on this thread, or NULL. Valid until the
/// next `vp_*` call on the same thread.
#[no_mangle]
pub extern "C" fn vp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Engine version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn vp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Network from `n` site energies and a row-major `n * n` symmetric coupling
/// matrix with zero diagonal, all in cm^-1.
///
/// # Safety
/// `energies` must point to `n` doubles, `couplings` to `n * n` doubles.
#[no_mangle]
pub unsafe extern "C" fn vp_network_new(
    energies: *const f64,
    couplings: *const f64,
    n: usize,
    out: *mut *mut VpNetwork,
) -> VpStatus {
    guard(|| {
        if n == 0 {
            return Err(invalid("network needs at least one site"));
        }
        let e = slice(energies, n, "energies")?.to_vec();
        let v = slice(couplings, n * n, "couplings")?;
        let net = SiteNetwork::new(e, DMatrix::from_row_slice(n, n, v))?;
        put(out, VpNetwork(net))
    })
}

/// The built-in seven-site FMO Hamiltonian.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vp_network_fmo7(out: *mut *mut VpNetwork) -> VpStatus {
    guard(|| put(out, VpNetwork(SiteNetwork::fmo7())))
}

/// Number of sites, or 0 for NULL.
///
/// # Safety
/// `net` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vp_network_n_sites(net: *const VpNetwork) -> usize {
    net.as_ref().map_or(0, |n| n.0.n_sites())
}

/// # Safety
/// `net` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vp_network_free(net: *mut VpNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

unsafe fn bath_from(
    n: usize,
    temperature: f64,
    out: *mut *mut VpBath,
    make: impl Fn(usize) -> varpolaron::Result<SpectralDensityFamily>,
) -> VpStatus {
    guard(|| {
        if n == 0 {
            return Err(invalid("bath needs at least one site"));
        }
        let families = (0..n).map(make).collect::<varpolaron::Result<Vec<_>>>()?;
        put(out, VpBath(BathSpec::new(families, temperature)?))
    })
}

/// Per-site cubic-exponential densities (reorganization energy and cutoff in cm^-1).
///
/// # Safety
/// `lambda` and `omega_c` must point to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn vp_bath_cubic(
    lambda: *const f64,
    omega_c: *const f64,
    n: usize,
    temperature_k: f64,
    out: *mut *mut VpBath,
) -> VpStatus {
    let (l, w) = match (slice(lambda, n, "lambda"), slice(omega_c, n, "omega_c")) {
        (Ok(l), Ok(w)) => (l, w),
        (Err(f), _) | (_, Err(f)) => return guard(|| Err(f)),
    };
    bath_from(n, temperature_k, out, |k| SpectralDensityFamily::cubic(l[k], w[k]))
}

/// Per-site smooth FMO densities scaled by `eta`.
///
/// # Safety
/// `eta` must point to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn vp_bath_fmo(eta: *const f64, n: usize, temperature_k: f64, out: *mut *mut VpBath) -> VpStatus {
    let e = match slice(eta, n, "eta") {
        Ok(e) => e,
        Err(f) => return guard(|| Err(f)),
    };
    bath_from(n, temperature_k, out, |k| SpectralDensityFamily::fmo(e[k]))
}

/// # Safety
/// `bath` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vp_bath_free(bath: *mut VpBath) {
    if !bath.is_null() {
        drop(Box::from_raw(bath));
    }
}

unsafe fn simulate_with(
    net: *const VpNetwork,
    bath: *const VpBath,
    method: VpMethod,
    rho0: impl FnOnce(usize) -> Result<CMatrix, Failure>,
    dt_ps: f64,
    t_max_ps: f64,
    out: *mut *mut VpTrajectory,
) -> VpStatus {
    guard(|| {
        let net = &handle(net, "network")?.0;
        let bath = &handle(bath, "bath")?.0;
        let rho = rho0(net.n_sites())?;
        let grid = TimeGrid::new(dt_ps, t_max_ps)?;
        let traj = run_method(net, bath, method.into(), &rho, &grid)?;
        put(out, VpTrajectory(traj))
    })
}

/// Propagates from the pure state on `initial_site` (0-based).
///
/// # Safety
/// Handles must be live; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vp_simulate(
    net: *const VpNetwork,
    bath: *const VpBath,
    method: VpMethod,
    initial_site: usize,
    dt_ps: f64,
    t_max_ps: f64,
    out: *mut *mut VpTrajectory,
) -> VpStatus {
    simulate_with(
        net,
        bath,
        method,
        |n| site_state(n, initial_site).map_err(Failure::from),
        dt_ps,
        t_max_ps,
        out,
    )
}

/// Propagates from an explicit density matrix given as row-major real and
/// imaginary parts (`rho_im` may be NULL for a real state).
///
/// # Safety
/// Handles must be live; `rho_re` (and `rho_im` if not NULL) must point to
/// `n * n` doubles where n is the network size.
#[no_mangle]
pub unsafe extern "C" fn vp_simulate_density(
    net: *const VpNetwork,
    bath: *const VpBath,
    method: VpMethod,
    rho_re: *const f64,
    rho_im: *const f64,
    dt_ps: f64,
    t_max_ps: f64,
    out: *mut *mut VpTrajectory,
) -> VpStatus {
    let rho0 = |n: usize| {
        let re = slice(rho_re, n * n, "rho_re")?;
        let im = if rho_im.is_null() { None } else { Some(slice(rho_im, n * n, "rho_im")?) };
        Ok(CMatrix::from_fn(n, n, |i, j| {
            Complex64::new(re[i * n + j], im.map_or(0.0, |m| m[i * n + j]))
        }))
    };
    simulate_with(net, bath, method, rho0, dt_ps, t_max_ps, out)
}

/// Number of time nodes, or 0 for NULL.
///
/// # Safety
/// `traj` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vp_trajectory_len(traj: *const VpTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.0.times.len())
}

/// Number of sites, or 0 for NULL.
///
/// # Safety
/// `traj` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vp_trajectory_n_sites(traj: *const VpTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.0.n_sites())
}

/// Copies the time nodes (ps) into `out`, which holds `len` doubles.
///
/// # Safety
/// `traj` must be live; `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn vp_trajectory_times(traj: *const VpTrajectory, out: *mut f64, len: usize) -> VpStatus {
    guard(|| {
        let t = &handle(traj, "trajectory")?.0;
        if len != t.times.len() {
            return Err(invalid(format!("buffer holds {len} values, trajectory has {}", t.times.len())));
        }
        slice_mut(out, len, "out")?.copy_from_slice(&t.times);
        Ok(())
    })
}

/// Copies the lab-frame population of `site` (0-based) at every node.
///
/// # Safety
/// `traj` must be live; `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn vp_trajectory_populations(
    traj: *const VpTrajectory,
    site: usize,
    out: *mut f64,
    len: usize,
) -> VpStatus {
    guard(|| {
        let t = &handle(traj, "trajectory")?.0;
        if site >= t.n_sites() {
            return Err(invalid(format!("site {site} out of range for {} sites", t.n_sites())));
        }
        if len != t.times.len() {
            return Err(invalid(format!("buffer holds {len} values, trajectory has {}", t.times.len())));
        }
        slice_mut(out, len, "out")?.copy_from_slice(&t.populations(site));
        Ok(())
    })
}

/// Copies the lab-frame density matrix at node `k` as row-major real and
/// imaginary parts, `n * n` doubles each.
///
/// # Safety
/// `traj` must be live; `re` and `im` must each point to `n * n` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn vp_trajectory_state(traj: *const VpTrajectory, k: usize, re: *mut f64, im: *mut f64) -> VpStatus {
    guard(|| {
        let t = &handle(traj, "trajectory")?.0;
        let rho = t
            .lab_states
            .get(k)
            .ok_or_else(|| invalid(format!("node {k} out of range for {} nodes", t.times.len())))?;
        let n = rho.nrows();
        let re = slice_mut(re, n * n, "re")?;
        let im = slice_mut(im, n * n, "im")?;
        for i in 0..n {
            for j in 0..n {
                re[i * n + j] = rho[(i, j)].re;
                im[i * n + j] = rho[(i, j)].im;
            }
        }
        Ok(())
    })
}

/// Copies the renormalization factors B_n of the frame used (`n` doubles).
///
/// # Safety
/// `traj` must be live; `out` must point to `n_sites` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn vp_trajectory_renormalization(traj: *const VpTrajectory, out: *mut f64, n: usize) -> VpStatus {
    guard(|| {
        let t = &handle(traj, "trajectory")?.0;
        if n != t.n_sites() {
            return Err(invalid(format!("buffer holds {n} values, trajectory has {} sites", t.n_sites())));
        }
        slice_mut(out, n, "out")?.copy_from_slice(&t.b);
        Ok(())
    })
}

/// # Safety
/// `traj` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vp_trajectory_free(traj: *mut VpTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Runs every sweep point of a configuration document, writing CSVs and a
/// manifest to `output_dir` (NULL keeps the document's `[output] dir`).
/// `workers` = 0 uses every core. Returns `PartialFailure` if any point failed;
/// `failures` (may be NULL) receives the count.
///
/// # Safety
/// `config` (and `output_dir` if not NULL) must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn vp_run_config(
    config: *const c_char,
    output_dir: *const c_char,
    workers: usize,
    failures: *mut usize,
) -> VpStatus {
    guard(|| {
        let text = string(config, "config")?;
        let mut cfg = cli::parse_config(&text)?;
        if !output_dir.is_null() {
            cfg.output_dir = PathBuf::from(string(output_dir, "output_dir")?);
        }
        let report = cli::run(&cfg, &cfg.sweep_points(), workers)?;
        let failed = report.failures();
        if !failures.is_null() {
            *failures = failed;
        }
        if failed > 0 {
            return Err(Failure(
                VpStatus::PartialFailure,
                format!("{failed} runs failed; see {}", report.manifest.display()),
            ));
        }
        Ok(())
    })
}
