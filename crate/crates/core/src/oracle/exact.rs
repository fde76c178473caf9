//! Exact reduced dynamics of a network coupled to a few discrete modes.
//!
//! The thermal bath is represented by a thermofield double: every physical
//! mode b (frequency w, coupling g) gets an auxiliary partner c, and after
//! the thermal Bogoliubov rotation the bath starts in the vacuum of
//!
//!   H = H_S + sum_k w_k (b_k^dag b_k - c_k^dag c_k)
//!         + sum_k |n_k><n_k| g_k [cosh th_k (b_k + b_k^dag) + sinh th_k (c_k + c_k^dag)],
//!
//! with sinh^2 th = 1 / (exp(beta w) - 1). Reduced system dynamics are identical
//! to those of the Gibbs-state bath. The Fock space is truncated by the total
//! number of quanta and evolved by Taylor steps of the sparse Hamiltonian.

use std::collections::HashMap;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;

use super::bath::FiniteBath;
use crate::corr::{KernelSet, TimeGrid};
use crate::dynamics::{simulate, CMatrix, MethodMode, Trajectory};
use crate::error::{Error, Result};
use crate::model::{SiteNetwork, WAVENUMBER_TO_ANGULAR};
use crate::varopt::Frame;

/// Largest Hilbert space the oracle will build.
pub const MAX_DIMENSION: usize = 200_000;
/// Allowed weight in the highest retained excitation shell.
pub const MAX_LEAKAGE: f64 = 1e-4;

#[derive(Clone, Debug)]
pub struct ExactTrajectory {
    pub times: Vec<f64>,
    /// Reduced site-basis density matrices.
    pub states: Vec<CMatrix>,
    /// Largest weight found in the top excitation shell.
    pub leakage: f64,
    pub norm_defect: f64,
    /// Largest |<H>(t) - <H>(0)|, cm^-1.
    pub energy_defect: f64,
    pub dimension: usize,
}

impl ExactTrajectory {
    pub fn population(&self, k: usize, site: usize) -> f64 {
        self.states[k][(site, site)].re
    }
}

/// Real symmetric sparse matrix in row-compressed form.
struct Sparse {
    row_start: Vec<usize>,
    col: Vec<usize>,
    val: Vec<f64>,
}

impl Sparse {
    fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let mut row_start = Vec::with_capacity(rows.len() + 1);
        let mut col = Vec::new();
        let mut val = Vec::new();
        row_start.push(0);
        for mut r in rows {
            r.sort_by_key(|e| e.0);
            let start = col.len();
            for (c, v) in r {
                if col.len() > start && col[col.len() - 1] == c {
                    *val.last_mut().unwrap() += v;
                } else {
                    col.push(c);
                    val.push(v);
                }
            }
            row_start.push(col.len());
        }
        Sparse { row_start, col, val }
    }

    fn dim(&self) -> usize {
        self.row_start.len() - 1
    }

    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in self.row_start[i]..self.row_start[i + 1] {
                acc += x[self.col[k]] * self.val[k];
            }
            *yi = acc;
        }
    }

    fn max_row_sum(&self) -> f64 {
        (0..self.dim())
            .map(|i| self.val[self.row_start[i]..self.row_start[i + 1]].iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// All occupation vectors over `n_osc` oscillators with at most `max_quanta` in total.
fn occupations(n_osc: usize, max_quanta: usize) -> Vec<Vec<u8>> {
    fn rec(prefix: &mut Vec<u8>, left: usize, n_osc: usize, out: &mut Vec<Vec<u8>>) {
        if prefix.len() == n_osc {
            out.push(prefix.clone());
            return;
        }
        for q in 0..=left {
            prefix.push(q as u8);
            rec(prefix, left - q, n_osc, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(n_osc), max_quanta, n_osc, &mut out);
    out
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

struct Model {
    h: Sparse,
    /// Number of Fock states; the state index is site * n_fock + fock.
    n_fock: usize,
    top_shell: Vec<bool>,
}

fn build_model(net: &SiteNetwork, fbath: &FiniteBath, beta: f64) -> Result<Model> {
    let n = net.n_sites();
    let modes: Vec<(usize, f64, f64)> = fbath
        .sites
        .iter()
        .enumerate()
        .flat_map(|(s, ms)| ms.iter().map(move |m| (s, m.omega, m.g)))
        .collect();
    let n_osc = 2 * modes.len();
    let predicted = n as f64 * binomial(n_osc + fbath.max_quanta, fbath.max_quanta);
    if predicted > MAX_DIMENSION as f64 {
        return Err(Error::Oracle(format!(
            "Hilbert space of {predicted:.0} states exceeds {MAX_DIMENSION}"
        )));
    }
    let occ = occupations(n_osc, fbath.max_quanta);
    let index: HashMap<&[u8], usize> = occ.iter().enumerate().map(|(i, o)| (o.as_slice(), i)).collect();
    let n_fock = occ.len();
    let dim = n * n_fock;
    let hs = net.hamiltonian();
    // thermofield amplitudes: cosh th = sqrt(nbar + 1), sinh th = sqrt(nbar)
    let amps: Vec<(f64, f64)> = modes
        .iter()
        .map(|&(_, w, _)| {
            let nbar = 1.0 / (beta * w).exp_m1();
            ((nbar + 1.0).sqrt(), nbar.sqrt())
        })
        .collect();

    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); dim];
    let mut shifted = Vec::new();
    for site in 0..n {
        for (j, o) in occ.iter().enumerate() {
            let row = site * n_fock + j;
            let mut diag = hs[(site, site)];
            for (k, &(_, w, _)) in modes.iter().enumerate() {
                diag += w * (o[2 * k] as f64 - o[2 * k + 1] as f64);
            }
            rows[row].push((row, diag));
            for other in 0..n {
                if other != site && hs[(site, other)] != 0.0 {
                    rows[row].push((other * n_fock + j, hs[(site, other)]));
                }
            }
            let total: usize = o.iter().map(|&q| q as usize).sum();
            for (k, &(s, _, g)) in modes.iter().enumerate() {
                if s != site || g == 0.0 {
                    continue;
                }
                for (osc, amp) in [(2 * k, amps[k].0), (2 * k + 1, amps[k].1)] {
                    let q = o[osc] as usize;
                    let c = g * amp;
                    if c == 0.0 {
                        continue;
                    }
                    // <o|(a + a^dag)|o - e> = sqrt(q), <o|(a + a^dag)|o + e> = sqrt(q + 1)
                    if q > 0 {
                        shifted.clear();
                        shifted.extend_from_slice(o);
                        shifted[osc] -= 1;
                        let col = site * n_fock + index[shifted.as_slice()];
                        rows[row].push((col, c * (q as f64).sqrt()));
                    }
                    if total < fbath.max_quanta {
                        shifted.clear();
                        shifted.extend_from_slice(o);
                        shifted[osc] += 1;
                        let col = site * n_fock + index[shifted.as_slice()];
                        rows[row].push((col, c * ((q + 1) as f64).sqrt()));
                    }
                }
            }
        }
    }
    let top_shell = (0..dim)
        .map(|i| occ[i % n_fock].iter().map(|&q| q as usize).sum::<usize>() == fbath.max_quanta)
        .collect();
    Ok(Model {
        h: Sparse::from_rows(rows),
        n_fock,
        top_shell,
    })
}

/// psi <- exp(-i H tau) psi by a Taylor series; H in rad/ps after `scale`.
fn taylor_step(h: &Sparse, scale: f64, tau: f64, psi: &mut [Complex64], work: &mut [Complex64], term: &mut Vec<Complex64>) {
    term.clear();
    term.extend_from_slice(psi);
    let factor = Complex64::new(0.0, -scale * tau);
    for j in 1..=60 {
        h.apply(term, work);
        let c = factor / j as f64;
        let mut size = 0.0f64;
        for (t, w) in term.iter_mut().zip(work.iter()) {
            *t = w * c;
            size = size.max(t.norm());
        }
        for (p, t) in psi.iter_mut().zip(term.iter()) {
            *p += t;
        }
        if size < 1e-17 {
            break;
        }
    }
}

fn expectation(h: &Sparse, psi: &[Complex64], work: &mut [Complex64]) -> f64 {
    h.apply(psi, work);
    psi.iter().zip(work.iter()).map(|(p, w)| (p.conj() * w).re).sum()
}

/// Exact reduced trajectory on the nodes of `grid`.
pub fn finite_mode_exact(
    net: &SiteNetwork,
    fbath: &FiniteBath,
    beta: f64,
    rho0: &CMatrix,
    grid: &TimeGrid,
) -> Result<ExactTrajectory> {
    let n = net.n_sites();
    if fbath.n_sites() != n {
        return Err(Error::InvalidInput(format!(
            "finite bath has {} sites, network has {n}",
            fbath.n_sites()
        )));
    }
    crate::dynamics::validate_density_matrix(rho0, n)?;
    let model = build_model(net, fbath, beta)?;
    let dim = model.h.dim();
    let scale = WAVENUMBER_TO_ANGULAR;
    let substeps = ((model.h.max_row_sum() * scale * grid.dt()).ceil() as usize).max(1);
    let tau = grid.dt() / substeps as f64;

    // pure components of rho0, each tensored with the thermofield vacuum (Fock index 0)
    let eig = SymmetricEigen::new(rho0.clone());
    let components: Vec<(f64, Vec<Complex64>)> = (0..n)
        .filter(|&k| eig.eigenvalues[k] > 1e-14)
        .map(|k| {
            let mut psi = vec![Complex64::new(0.0, 0.0); dim];
            for s in 0..n {
                psi[s * model.n_fock] = eig.eigenvectors[(s, k)];
            }
            (eig.eigenvalues[k], psi)
        })
        .collect();

    struct Run {
        reduced: Vec<CMatrix>,
        leakage: f64,
        norm_defect: f64,
        energy_defect: f64,
    }
    let runs: Vec<Run> = components
        .into_par_iter()
        .map(|(p, mut psi)| {
            let mut work = vec![Complex64::new(0.0, 0.0); dim];
            let mut term = Vec::with_capacity(dim);
            let e0 = expectation(&model.h, &psi, &mut work);
            let mut run = Run {
                reduced: Vec::with_capacity(grid.n_steps() + 1),
                leakage: 0.0,
                norm_defect: 0.0,
                energy_defect: 0.0,
            };
            for k in 0..=grid.n_steps() {
                if k > 0 {
                    for _ in 0..substeps {
                        taylor_step(&model.h, scale, tau, &mut psi, &mut work, &mut term);
                    }
                }
                let mut rho = DMatrix::zeros(n, n);
                for a in 0..n {
                    for b in 0..n {
                        let (ra, rb) = (a * model.n_fock, b * model.n_fock);
                        let s: Complex64 = (0..model.n_fock).map(|j| psi[ra + j] * psi[rb + j].conj()).sum();
                        rho[(a, b)] = s * p;
                    }
                }
                let norm: f64 = psi.iter().map(|c| c.norm_sqr()).sum();
                let top: f64 = psi
                    .iter()
                    .zip(&model.top_shell)
                    .filter(|(_, &t)| t)
                    .map(|(c, _)| c.norm_sqr())
                    .sum();
                let e = expectation(&model.h, &psi, &mut work);
                run.norm_defect = run.norm_defect.max((norm - 1.0).abs());
                run.energy_defect = run.energy_defect.max((e - e0).abs());
                run.leakage = run.leakage.max(top);
                run.reduced.push(rho);
            }
            run
        })
        .collect();

    let mut states = vec![CMatrix::zeros(n, n); grid.n_steps() + 1];
    let (mut leakage, mut norm_defect, mut energy_defect) = (0.0f64, 0.0f64, 0.0f64);
    for run in &runs {
        for (acc, r) in states.iter_mut().zip(&run.reduced) {
            *acc += r;
        }
        leakage = leakage.max(run.leakage);
        norm_defect = norm_defect.max(run.norm_defect);
        energy_defect = energy_defect.max(run.energy_defect);
    }
    if leakage > MAX_LEAKAGE {
        return Err(Error::Oracle(format!(
            "top excitation shell carries weight {leakage:.2e} > {MAX_LEAKAGE:e}; raise max_quanta"
        )));
    }
    Ok(ExactTrajectory {
        times: grid.times(),
        states,
        leakage,
        norm_defect,
        energy_defect,
        dimension: dim,
    })
}

/// The engine's weak-coupling master equation driven by the same discrete modes.
pub fn engine_on_finite_bath(
    net: &SiteNetwork,
    fbath: &FiniteBath,
    beta: f64,
    rho0: &CMatrix,
    grid: &TimeGrid,
) -> Result<Trajectory> {
    let frame = Frame::weak(net.n_sites(), beta);
    let kernels = KernelSet::tabulate(&fbath.mode_sets()?, &frame.fractions, beta, grid)?;
    simulate(net, &frame, kernels, rho0, MethodMode::WeakCoupling)
}
