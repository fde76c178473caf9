//! Bath correlation functions of the transformed-frame interaction.
//!
//! The interaction is written as sum_i S_i (x) E_i over three operator groups:
//! site projectors S^z_n, and for every coupled pair n < m the Hermitian
//! combinations S^x_nm = |n><m| + |m><n| and S^y_nm = i|n><m| - i|m><n|.
//! Nonzero correlations <E_i(t) E_j> are zz (same site), xx and yy (pairs sharing
//! a site), and yz / zy (pair containing the site). xy and xz cross terms vanish.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{BathSpec, SiteNetwork, WAVENUMBER_TO_ANGULAR};
use crate::varopt::Frame;

pub mod cache;
mod kernels;

pub use kernels::{
    continuum_modes, evaluate_kernel, phi_xy, phi_yz, phi_zz, spectral_cutoff, KernelKind,
    KernelSet, ModeSet, SiteKernels, TAIL_TOLERANCE,
};

/// Uniform propagation grid t_k = k dt, k = 0..=n_steps (ps).
///
/// Kernels are sampled at half steps so each propagation interval is one Simpson panel.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeGrid {
    dt: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(dt: f64, t_max: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite() && t_max > 0.0 && t_max.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "time grid needs dt > 0 and t_max > 0 (got dt = {dt}, t_max = {t_max})"
            )));
        }
        let n = (t_max / dt).round();
        if n < 1.0 || (n * dt - t_max).abs() > 1e-9 * t_max {
            return Err(Error::GridMismatch(format!(
                "t_max = {t_max} ps is not a multiple of dt = {dt} ps"
            )));
        }
        Ok(TimeGrid {
            dt,
            n_steps: n as usize,
        })
    }

    pub fn from_steps(dt: f64, n_steps: usize) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) || n_steps == 0 {
            return Err(Error::InvalidInput("time grid needs dt > 0 and one step".into()));
        }
        Ok(TimeGrid { dt, n_steps })
    }

    /// Same horizon, half the step.
    pub fn refined(&self) -> Self {
        TimeGrid {
            dt: 0.5 * self.dt,
            n_steps: 2 * self.n_steps,
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn t_max(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| self.time(k)).collect()
    }

    pub fn n_samples(&self) -> usize {
        2 * self.n_steps + 1
    }

    pub fn sample_time(&self, j: usize) -> f64 {
        j as f64 * (0.5 * self.dt)
    }
}

/// System operator of the interaction, with 0-based site indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OperatorKind {
    /// |n><n|
    Z(usize),
    /// |n><m| + |m><n|, n < m
    X(usize, usize),
    /// i|n><m| - i|m><n|, n < m
    Y(usize, usize),
}

impl OperatorKind {
    pub fn matrix(&self, n_sites: usize) -> DMatrix<Complex64> {
        let mut s = DMatrix::zeros(n_sites, n_sites);
        let one = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        match *self {
            OperatorKind::Z(n) => s[(n, n)] = one,
            OperatorKind::X(n, m) => {
                s[(n, m)] = one;
                s[(m, n)] = one;
            }
            OperatorKind::Y(n, m) => {
                s[(n, m)] = i;
                s[(m, n)] = -i;
            }
        }
        s
    }

    pub fn label(&self) -> String {
        match *self {
            OperatorKind::Z(n) => format!("z{}", n + 1),
            OperatorKind::X(n, m) => format!("x{}{}", n + 1, m + 1),
            OperatorKind::Y(n, m) => format!("y{}{}", n + 1, m + 1),
        }
    }
}

/// Operators in canonical order: all z, then x pairs, then y pairs (pairs with V_nm != 0).
pub fn interaction_operators(net: &SiteNetwork) -> Vec<OperatorKind> {
    let n = net.n_sites();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
        .filter(|&(a, b)| net.coupling(a, b) != 0.0)
        .collect();
    let mut ops: Vec<OperatorKind> = (0..n).map(OperatorKind::Z).collect();
    ops.extend(pairs.iter().map(|&(a, b)| OperatorKind::X(a, b)));
    ops.extend(pairs.iter().map(|&(a, b)| OperatorKind::Y(a, b)));
    ops
}

fn delta(a: usize, b: usize) -> f64 {
    if a == b {
        1.0
    } else {
        0.0
    }
}

/// Exponent of <B_nm(t) B_pq^dag>-type products: d_np phi_n - d_nq phi_n + d_mq phi_m - d_mp phi_m.
pub fn displacement_exponent(n: usize, m: usize, p: usize, q: usize, phi_xy: &[Complex64]) -> Complex64 {
    phi_xy[n] * (delta(n, p) - delta(n, q)) + phi_xy[m] * (delta(m, q) - delta(m, p))
}

/// Lambda^zz_n = phi^zz_n; cross-site zz correlations vanish for independent baths.
pub fn lambda_zz(n: usize, p: usize, phi_zz: &[Complex64]) -> Complex64 {
    if n == p {
        phi_zz[n]
    } else {
        Complex64::new(0.0, 0.0)
    }
}

fn displacement_prefactor(n: usize, m: usize, p: usize, q: usize, v: &DMatrix<f64>, b: &[f64]) -> f64 {
    0.5 * v[(n, m)] * v[(p, q)] * b[n] * b[m] * b[p] * b[q]
}

/// Lambda^xx_{nm,pq}(t) given per-site phi^xy values at t.
pub fn lambda_xx(
    n: usize,
    m: usize,
    p: usize,
    q: usize,
    v: &DMatrix<f64>,
    b: &[f64],
    phi_xy: &[Complex64],
) -> Complex64 {
    let x = displacement_exponent(n, m, p, q, phi_xy);
    displacement_prefactor(n, m, p, q, v, b) * (x.exp() + (-x).exp() - 2.0)
}

/// Lambda^yy_{nm,pq}(t) given per-site phi^xy values at t.
pub fn lambda_yy(
    n: usize,
    m: usize,
    p: usize,
    q: usize,
    v: &DMatrix<f64>,
    b: &[f64],
    phi_xy: &[Complex64],
) -> Complex64 {
    let x = displacement_exponent(n, m, p, q, phi_xy);
    displacement_prefactor(n, m, p, q, v, b) * (x.exp() - (-x).exp())
}

/// Lambda^yz_{nm,p}(t) = V_nm B_n B_m (d_np phi^yz_n - d_mp phi^yz_m).
pub fn lambda_yz(n: usize, m: usize, p: usize, v: &DMatrix<f64>, b: &[f64], phi_yz: &[Complex64]) -> Complex64 {
    v[(n, m)] * b[n] * b[m] * (phi_yz[n] * delta(n, p) - phi_yz[m] * delta(m, p))
}

/// Lambda^zy_{p,nm}(t) = -Lambda^yz_{nm,p}(t).
pub fn lambda_zy(p: usize, n: usize, m: usize, v: &DMatrix<f64>, b: &[f64], phi_yz: &[Complex64]) -> Complex64 {
    -lambda_yz(n, m, p, v, b, phi_yz)
}

/// One structurally nonzero correlation <E_i(t) E_j>.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Entry {
    pub i: usize,
    pub j: usize,
}

/// All nonzero Lambda_ij on the sample grid, evaluated from per-site kernels.
#[derive(Clone, Debug)]
pub struct CorrelationTable {
    operators: Vec<OperatorKind>,
    entries: Vec<Entry>,
    kernels: KernelSet,
    /// Couplings in rad/ps.
    couplings: DMatrix<f64>,
    b: Vec<f64>,
}

fn shares_site(a: (usize, usize), b: (usize, usize)) -> bool {
    a.0 == b.0 || a.0 == b.1 || a.1 == b.0 || a.1 == b.1
}

impl CorrelationTable {
    pub fn assemble(net: &SiteNetwork, frame: &Frame, kernels: KernelSet) -> Result<Self> {
        let n = net.n_sites();
        if frame.n_sites() != n || kernels.n_sites() != n {
            return Err(Error::InvalidInput(format!(
                "network has {n} sites, frame {}, kernels {}",
                frame.n_sites(),
                kernels.n_sites()
            )));
        }
        let operators = interaction_operators(net);
        let zz_live = |s: usize| !kernels.site(s).zz_vanishes();
        let xy_live = |s: usize| !kernels.site(s).xy_vanishes();
        let yz_live = |s: usize| !kernels.site(s).yz_vanishes();
        let mut entries = Vec::new();
        for (i, oi) in operators.iter().enumerate() {
            for (j, oj) in operators.iter().enumerate() {
                let live = match (*oi, *oj) {
                    (OperatorKind::Z(a), OperatorKind::Z(b)) => a == b && zz_live(a),
                    (OperatorKind::X(a, b), OperatorKind::X(c, d))
                    | (OperatorKind::Y(a, b), OperatorKind::Y(c, d)) => {
                        shares_site((a, b), (c, d))
                            && [a, b].iter().any(|&s| (s == c || s == d) && xy_live(s))
                    }
                    (OperatorKind::Y(a, b), OperatorKind::Z(p))
                    | (OperatorKind::Z(p), OperatorKind::Y(a, b)) => {
                        (p == a || p == b) && yz_live(p)
                    }
                    _ => false,
                };
                if live {
                    entries.push(Entry { i, j });
                }
            }
        }
        Ok(CorrelationTable {
            operators,
            entries,
            kernels,
            couplings: net.couplings() * WAVENUMBER_TO_ANGULAR,
            b: frame.state.b.clone(),
        })
    }

    pub fn operators(&self) -> &[OperatorKind] {
        &self.operators
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn kernels(&self) -> &KernelSet {
        &self.kernels
    }

    pub fn grid(&self) -> &TimeGrid {
        self.kernels.grid()
    }

    pub fn n_sites(&self) -> usize {
        self.b.len()
    }

    fn site_values(&self, sample: usize) -> (Vec<Complex64>, Vec<Complex64>, Vec<Complex64>) {
        let n = self.n_sites();
        let k = &self.kernels;
        (
            (0..n).map(|s| k.phi_zz(s, sample)).collect(),
            (0..n).map(|s| k.phi_xy(s, sample)).collect(),
            (0..n).map(|s| k.phi_yz(s, sample)).collect(),
        )
    }

    fn entry_value(
        &self,
        e: Entry,
        zz: &[Complex64],
        xy: &[Complex64],
        yz: &[Complex64],
    ) -> Complex64 {
        let (v, b) = (&self.couplings, &self.b);
        match (self.operators[e.i], self.operators[e.j]) {
            (OperatorKind::Z(a), OperatorKind::Z(c)) => lambda_zz(a, c, zz),
            (OperatorKind::X(a, c), OperatorKind::X(p, q)) => lambda_xx(a, c, p, q, v, b, xy),
            (OperatorKind::Y(a, c), OperatorKind::Y(p, q)) => lambda_yy(a, c, p, q, v, b, xy),
            (OperatorKind::Y(a, c), OperatorKind::Z(p)) => lambda_yz(a, c, p, v, b, yz),
            (OperatorKind::Z(p), OperatorKind::Y(a, c)) => lambda_zy(p, a, c, v, b, yz),
            _ => Complex64::new(0.0, 0.0),
        }
    }

    /// Values of every entry at one sample, in `entries()` order. Units (rad/ps)^2.
    pub fn values_at(&self, sample: usize, out: &mut Vec<Complex64>) {
        let (zz, xy, yz) = self.site_values(sample);
        out.clear();
        out.extend(self.entries.iter().map(|&e| self.entry_value(e, &zz, &xy, &yz)));
    }

    /// Lambda_ij at a sample; zero for structurally absent pairs.
    pub fn lambda(&self, i: usize, j: usize, sample: usize) -> Complex64 {
        let (zz, xy, yz) = self.site_values(sample);
        self.entry_value(Entry { i, j }, &zz, &xy, &yz)
    }

    /// Time series of one entry over all samples.
    pub fn series(&self, entry: usize) -> Vec<Complex64> {
        let e = self.entries[entry];
        (0..self.grid().n_samples())
            .map(|s| {
                let (zz, xy, yz) = self.site_values(s);
                self.entry_value(e, &zz, &xy, &yz)
            })
            .collect()
    }
}

/// Tabulates every nonzero correlation for continuous baths in the given frame.
pub fn build_correlation_table(
    net: &SiteNetwork,
    baths: &BathSpec,
    frame: &Frame,
    grid: &TimeGrid,
) -> Result<CorrelationTable> {
    let kernels = KernelSet::for_baths(baths, frame, grid)?;
    CorrelationTable::assemble(net, frame, kernels)
}
