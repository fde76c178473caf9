//! Second-order time-local propagation in the displaced frame.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use log::warn;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::corr::{CorrelationTable, KernelSet, TimeGrid};
use crate::error::{Error, Result};
use crate::model::{BathSpec, SiteNetwork, WAVENUMBER_TO_ANGULAR};
use crate::varopt::{
    solve_variational, transformed_system_hamiltonian, Frame, SolveOptions, VariationalSolution,
};

mod generator;

pub use generator::{
    accumulate_generator, coherent_superoperator, interaction_picture_operator,
    GeneratorAccumulator, GeneratorSeries, HamiltonianEigen,
};

pub type CMatrix = DMatrix<Complex64>;

/// Trace drift that aborts propagation.
pub const MAX_TRACE_DRIFT: f64 = 1e-6;
/// Most negative frame-state eigenvalue tolerated before a warning is logged.
pub const POSITIVITY_WARNING: f64 = -1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MethodMode {
    Variational,
    /// F = 1
    FullPolaron,
    /// F = 0
    WeakCoupling,
}

impl MethodMode {
    pub const ALL: [MethodMode; 3] = [
        MethodMode::Variational,
        MethodMode::FullPolaron,
        MethodMode::WeakCoupling,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            MethodMode::Variational => "variational",
            MethodMode::FullPolaron => "polaron",
            MethodMode::WeakCoupling => "weak",
        }
    }
}

impl fmt::Display for MethodMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MethodMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "variational" => Ok(MethodMode::Variational),
            "polaron" | "full_polaron" | "full-polaron" => Ok(MethodMode::FullPolaron),
            "weak" | "weak_coupling" | "weak-coupling" | "redfield" => Ok(MethodMode::WeakCoupling),
            other => Err(Error::InvalidInput(format!(
                "unknown mode '{other}' (expected variational, polaron or weak)"
            ))),
        }
    }
}

/// (rho)_nm -> B_n B_m (rho)_nm off the diagonal.
pub fn back_transform(rho: &CMatrix, b: &[f64]) -> CMatrix {
    let mut out = rho.clone();
    for c in 0..rho.ncols() {
        for r in 0..rho.nrows() {
            if r != c {
                out[(r, c)] *= b[r] * b[c];
            }
        }
    }
    out
}

fn vectorize(rho: &CMatrix) -> DVector<Complex64> {
    DVector::from_column_slice(rho.as_slice())
}

fn unvectorize(v: &DVector<Complex64>, n: usize) -> CMatrix {
    CMatrix::from_column_slice(n, n, v.as_slice())
}

/// |tr rho - 1| and max |rho - rho^dag|.
pub fn state_defects(rho: &CMatrix) -> (f64, f64) {
    let trace = rho.trace();
    let herm = (rho - rho.adjoint()).iter().fold(0.0f64, |m, z| m.max(z.norm()));
    ((trace - Complex64::new(1.0, 0.0)).norm(), herm)
}

fn min_eigenvalue(rho: &CMatrix) -> f64 {
    let h = (rho + rho.adjoint()) * Complex64::new(0.5, 0.0);
    SymmetricEigen::new(h).eigenvalues.min()
}

pub fn validate_density_matrix(rho: &CMatrix, n: usize) -> Result<()> {
    if rho.nrows() != n || rho.ncols() != n {
        return Err(Error::InvalidInput(format!(
            "initial state is {}x{}, expected {n}x{n}",
            rho.nrows(),
            rho.ncols()
        )));
    }
    let (tr, herm) = state_defects(rho);
    if tr > 1e-10 || herm > 1e-12 {
        return Err(Error::InvalidInput(format!(
            "initial state must be Hermitian with unit trace (trace defect {tr:e}, hermiticity defect {herm:e})"
        )));
    }
    if min_eigenvalue(rho) < -1e-10 {
        return Err(Error::InvalidInput("initial state is not positive semidefinite".into()));
    }
    Ok(())
}

/// |n><n|
pub fn site_state(n_sites: usize, site: usize) -> Result<CMatrix> {
    if site >= n_sites {
        return Err(Error::InvalidInput(format!(
            "initial site {} outside 1..={n_sites}",
            site + 1
        )));
    }
    let mut rho = CMatrix::zeros(n_sites, n_sites);
    rho[(site, site)] = Complex64::new(1.0, 0.0);
    Ok(rho)
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub mode: MethodMode,
    pub times: Vec<f64>,
    /// States in the displaced frame.
    pub frame_states: Vec<CMatrix>,
    /// Back-transformed states.
    pub lab_states: Vec<CMatrix>,
    pub b: Vec<f64>,
    /// ||L(t_k) rho(t_k)|| in rad/ps.
    pub generator_residual: Vec<f64>,
    /// Most negative eigenvalue seen in any frame state (0 if none).
    pub min_eigenvalue: f64,
}

impl Trajectory {
    pub fn n_sites(&self) -> usize {
        self.b.len()
    }

    pub fn population(&self, k: usize, site: usize) -> f64 {
        self.lab_states[k][(site, site)].re
    }

    pub fn populations(&self, site: usize) -> Vec<f64> {
        (0..self.times.len()).map(|k| self.population(k, site)).collect()
    }

    /// Largest trace and Hermiticity defects over all frame states.
    pub fn max_defects(&self) -> (f64, f64) {
        self.frame_states.iter().map(state_defects).fold((0.0, 0.0), |a, d| {
            (a.0.max(d.0), a.1.max(d.1))
        })
    }

    /// Sup-norm distance between lab populations of two runs on the same grid.
    pub fn population_distance(&self, other: &Trajectory) -> f64 {
        let mut d = 0.0f64;
        for (a, b) in self.lab_states.iter().zip(&other.lab_states) {
            for s in 0..self.n_sites() {
                d = d.max((a[(s, s)].re - b[(s, s)].re).abs());
            }
        }
        d
    }
}

/// Classical RK4 on the grid. `dissipative` yields K at every half step.
pub fn propagate<I>(
    rho0: &CMatrix,
    coherent: &CMatrix,
    dissipative: I,
    grid: &TimeGrid,
) -> Result<(Vec<CMatrix>, Vec<f64>)>
where
    I: IntoIterator<Item = CMatrix>,
{
    let n = rho0.nrows();
    let dt = grid.dt();
    let mut ks = dissipative.into_iter();
    let mut l_prev = coherent + ks.next().ok_or_else(|| Error::GridMismatch("empty generator series".into()))?;
    let mut v = vectorize(rho0);
    let mut states = Vec::with_capacity(grid.n_steps() + 1);
    let mut residual = Vec::with_capacity(grid.n_steps() + 1);
    states.push(rho0.clone());
    residual.push((&l_prev * &v).norm());
    let mut next = |k: usize| {
        ks.next()
            .map(|m| coherent + m)
            .ok_or_else(|| Error::GridMismatch(format!("generator series ends at step {k}")))
    };
    for k in 1..=grid.n_steps() {
        let l_mid = next(k)?;
        let l_next = next(k)?;
        let k1 = &l_prev * &v;
        let k2 = &l_mid * (&v + &k1 * Complex64::new(0.5 * dt, 0.0));
        let k3 = &l_mid * (&v + &k2 * Complex64::new(0.5 * dt, 0.0));
        let k4 = &l_next * (&v + &k3 * Complex64::new(dt, 0.0));
        v += (k1 + (k2 + k3) * Complex64::new(2.0, 0.0) + k4) * Complex64::new(dt / 6.0, 0.0);
        let rho = unvectorize(&v, n);
        let drift = (rho.trace() - Complex64::new(1.0, 0.0)).norm();
        if drift > MAX_TRACE_DRIFT {
            return Err(Error::TraceDrift {
                t: grid.time(k),
                drift,
            });
        }
        residual.push((&l_next * &v).norm());
        states.push(rho);
        l_prev = l_next;
    }
    Ok((states, residual))
}

/// Wall-clock seconds per pipeline stage.
#[derive(Clone, Debug, Default)]
pub struct StageTimings {
    pub solve: f64,
    pub kernels: f64,
    pub propagate: f64,
}

/// Everything produced by one method run.
#[derive(Clone, Debug)]
pub struct MethodRun {
    pub trajectory: Trajectory,
    pub frame: Frame,
    pub solution: Option<VariationalSolution>,
    pub timings: StageTimings,
}

/// Frame for a mode: solved for Variational, forced otherwise.
pub fn prepare_frame(
    net: &SiteNetwork,
    baths: &BathSpec,
    mode: MethodMode,
    opts: &SolveOptions,
) -> Result<(Frame, Option<VariationalSolution>)> {
    match mode {
        MethodMode::WeakCoupling => Ok((Frame::weak(net.n_sites(), baths.beta()), None)),
        MethodMode::FullPolaron => Ok((Frame::polaron(baths)?, None)),
        MethodMode::Variational => {
            let sol = solve_variational(net, baths, opts)?;
            Ok((sol.frame(), Some(sol)))
        }
    }
}

/// Propagates rho0 in the given frame with precomputed kernels.
pub fn simulate(
    net: &SiteNetwork,
    frame: &Frame,
    kernels: KernelSet,
    rho0: &CMatrix,
    mode: MethodMode,
) -> Result<Trajectory> {
    let n = net.n_sites();
    validate_density_matrix(rho0, n)?;
    let grid = kernels.grid().clone();
    let table = CorrelationTable::assemble(net, frame, kernels)?;
    let h = transformed_system_hamiltonian(net, &frame.state) * WAVENUMBER_TO_ANGULAR;
    let acc = GeneratorAccumulator::new(&table, &h, &grid)?;
    let coherent = coherent_superoperator(&h);
    let (frame_states, generator_residual) = propagate(rho0, &coherent, acc, &grid)?;
    let mut min_eig = 0.0f64;
    for (k, rho) in frame_states.iter().enumerate() {
        let e = min_eigenvalue(rho);
        if e < POSITIVITY_WARNING && min_eig >= POSITIVITY_WARNING {
            warn!(
                "{mode}: frame state eigenvalue {e:.2e} at t = {} ps (second-order generator is not positivity preserving)",
                grid.time(k)
            );
        }
        min_eig = min_eig.min(e);
    }
    let b = frame.state.b.clone();
    let lab_states = frame_states.iter().map(|r| back_transform(r, &b)).collect();
    Ok(Trajectory {
        mode,
        times: grid.times(),
        frame_states,
        lab_states,
        b,
        generator_residual,
        min_eigenvalue: min_eig,
    })
}

/// Solve (or force) the frame, tabulate kernels, propagate and back-transform.
pub fn run_method_with(
    net: &SiteNetwork,
    baths: &BathSpec,
    mode: MethodMode,
    rho0: &CMatrix,
    grid: &TimeGrid,
    opts: &SolveOptions,
) -> Result<MethodRun> {
    baths.check_matches(net.n_sites())?;
    let t0 = Instant::now();
    let (frame, solution) = prepare_frame(net, baths, mode, opts).map_err(|e| e.at_stage("frame"))?;
    let t1 = Instant::now();
    let kernels = KernelSet::for_baths(baths, &frame, grid).map_err(|e| e.at_stage("kernels"))?;
    let t2 = Instant::now();
    let trajectory = simulate(net, &frame, kernels, rho0, mode).map_err(|e| e.at_stage("propagation"))?;
    let t3 = Instant::now();
    Ok(MethodRun {
        trajectory,
        frame,
        solution,
        timings: StageTimings {
            solve: (t1 - t0).as_secs_f64(),
            kernels: (t2 - t1).as_secs_f64(),
            propagate: (t3 - t2).as_secs_f64(),
        },
    })
}

/// `run_method_with` using default solver options.
pub fn run_method(
    net: &SiteNetwork,
    baths: &BathSpec,
    mode: MethodMode,
    rho0: &CMatrix,
    grid: &TimeGrid,
) -> Result<Trajectory> {
    run_method_with(net, baths, mode, rho0, grid, &SolveOptions::default()).map(|r| r.trajectory)
}

#[cfg(test)]
mod tests;
