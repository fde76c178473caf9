//! Incremental accumulation of the dissipative superoperator K(t).
//!
//! With M_i(t) = sum_j int_0^t Lambda_ij(s) S_j(s) ds and S_j(s) = U(s) S_j U(s)^dag,
//! U(s) = exp(-i H s), the second-order generator reads
//!   d rho/dt = -i[H, rho] - sum_i (S_i M_i rho - M_i rho S_i + rho M_i^dag S_i - S_i rho M_i^dag).
//! M_i is kept in the eigenbasis of H, where U(s) is diagonal, and grown by one
//! Simpson panel per step.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::corr::{CorrelationTable, OperatorKind, TimeGrid};
use crate::error::{Error, Result};

type CMatrix = DMatrix<Complex64>;

/// Eigen-decomposition of a real symmetric Hamiltonian (energies in rad/ps).
#[derive(Clone, Debug)]
pub struct HamiltonianEigen {
    pub energies: DVector<f64>,
    /// Columns are eigenvectors in the site basis.
    pub vectors: DMatrix<f64>,
    vectors_c: CMatrix,
}

impl HamiltonianEigen {
    pub fn new(h: &DMatrix<f64>) -> Self {
        let eig = SymmetricEigen::new(h.clone());
        let vectors_c = eig.eigenvectors.map(|x| Complex64::new(x, 0.0));
        HamiltonianEigen {
            energies: eig.eigenvalues,
            vectors: eig.eigenvectors,
            vectors_c,
        }
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// V^T A V
    pub fn to_eigenbasis(&self, a: &CMatrix) -> CMatrix {
        self.vectors_c.transpose() * a * &self.vectors_c
    }

    /// V A V^T
    pub fn to_site_basis(&self, a: &CMatrix) -> CMatrix {
        &self.vectors_c * a * self.vectors_c.transpose()
    }

    /// exp(-i E_a s) for each level.
    fn phases(&self, s: f64) -> Vec<Complex64> {
        self.energies
            .iter()
            .map(|&e| Complex64::from_polar(1.0, -e * s))
            .collect()
    }
}

/// U(s) S U(s)^dag with U(s) = exp(-i H s), returned in the site basis.
pub fn interaction_picture_operator(op: &CMatrix, s: f64, eigen: &HamiltonianEigen) -> CMatrix {
    let mut a = eigen.to_eigenbasis(op);
    rotate_in_place(&mut a, &eigen.phases(s));
    eigen.to_site_basis(&a)
}

fn rotate_in_place(a: &mut CMatrix, u: &[Complex64]) {
    let n = u.len();
    for c in 0..n {
        let uc = u[c].conj();
        for r in 0..n {
            a[(r, c)] *= u[r] * uc;
        }
    }
}

/// -i (I (x) H - H^T (x) I) for column-stacked density matrices; H in rad/ps.
pub fn coherent_superoperator(h: &DMatrix<f64>) -> CMatrix {
    let n = h.nrows();
    let mut l = CMatrix::zeros(n * n, n * n);
    let mi = Complex64::new(0.0, -1.0);
    for c in 0..n {
        for r in 0..n {
            let row = c * n + r;
            for k in 0..n {
                // (H rho)_{rc} = sum_k H_rk rho_kc
                l[(row, c * n + k)] += mi * h[(r, k)];
                // (rho H)_{rc} = sum_k rho_rk H_kc
                l[(row, k * n + r)] -= mi * h[(k, c)];
            }
        }
    }
    l
}

/// Nonzero elements (row, col, value) of an interaction operator.
fn operator_elements(op: OperatorKind) -> Vec<(usize, usize, Complex64)> {
    let one = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    match op {
        OperatorKind::Z(n) => vec![(n, n, one)],
        OperatorKind::X(n, m) => vec![(n, m, one), (m, n, one)],
        OperatorKind::Y(n, m) => vec![(n, m, i), (m, n, -i)],
    }
}

/// Dissipator superoperator from the accumulated M_i (site basis).
fn dissipator(n: usize, rows: &[Row], m_site: &[CMatrix]) -> CMatrix {
    let mut k = CMatrix::zeros(n * n, n * n);
    let mut p = CMatrix::zeros(n, n);
    for (row, m) in rows.iter().zip(m_site) {
        for &(a, b, s) in &row.elements {
            // P += S M: row a of P gets s * row b of M
            for c in 0..n {
                p[(a, c)] += s * m[(b, c)];
            }
            // S^T (x) M: block (b, a) += s M
            for c in 0..n {
                for r in 0..n {
                    k[(b * n + r, a * n + c)] += s * m[(r, c)];
                }
            }
            // conj(M) (x) S: element (r1 n + a, c1 n + b) += conj(M_{r1 c1}) s
            for c1 in 0..n {
                for r1 in 0..n {
                    k[(r1 * n + a, c1 * n + b)] += m[(r1, c1)].conj() * s;
                }
            }
        }
    }
    // -I (x) P - conj(P) (x) I
    for blk in 0..n {
        for c in 0..n {
            for r in 0..n {
                k[(blk * n + r, blk * n + c)] -= p[(r, c)];
                k[(r * n + blk, c * n + blk)] -= p[(r, c)].conj();
            }
        }
    }
    k
}

/// One operator S_i with the correlations feeding its M_i.
#[derive(Clone, Debug)]
struct Row {
    elements: Vec<(usize, usize, Complex64)>,
    /// (entry index in the table, column operator j)
    terms: Vec<(usize, usize)>,
}

/// Yields K(t_k) for k = 0, 1, ..., n_steps, growing M_i one Simpson panel at a time.
pub struct GeneratorAccumulator<'a> {
    table: &'a CorrelationTable,
    eigen: HamiltonianEigen,
    grid: TimeGrid,
    rows: Vec<Row>,
    ops_eig: Vec<CMatrix>,
    m_eig: Vec<CMatrix>,
    prev: Vec<CMatrix>,
    values: Vec<Complex64>,
    /// Next sample index to produce.
    next: usize,
    /// K at the end of the current step, handed out after the midpoint.
    pending: Option<CMatrix>,
}

impl<'a> GeneratorAccumulator<'a> {
    /// `h` is the transformed system Hamiltonian in rad/ps.
    pub fn new(table: &'a CorrelationTable, h: &DMatrix<f64>, grid: &TimeGrid) -> Result<Self> {
        let tg = table.grid();
        if tg.n_steps() != grid.n_steps() || tg.dt() != grid.dt() {
            return Err(Error::GridMismatch(format!(
                "table covers dt = {} ps x {} steps, propagation asks for dt = {} ps x {} steps",
                tg.dt(),
                tg.n_steps(),
                grid.dt(),
                grid.n_steps()
            )));
        }
        let n = table.n_sites();
        if h.nrows() != n {
            return Err(Error::InvalidInput(format!(
                "Hamiltonian is {}x{}, table has {n} sites",
                h.nrows(),
                h.ncols()
            )));
        }
        let eigen = HamiltonianEigen::new(h);
        let ops = table.operators();
        let ops_eig = ops.iter().map(|o| eigen.to_eigenbasis(&o.matrix(n))).collect();
        let mut rows: Vec<Row> = Vec::new();
        let mut row_of = vec![usize::MAX; ops.len()];
        for (idx, e) in table.entries().iter().enumerate() {
            if row_of[e.i] == usize::MAX {
                row_of[e.i] = rows.len();
                rows.push(Row {
                    elements: operator_elements(ops[e.i]),
                    terms: Vec::new(),
                });
            }
            rows[row_of[e.i]].terms.push((idx, e.j));
        }
        let zeros = vec![CMatrix::zeros(n, n); rows.len()];
        Ok(GeneratorAccumulator {
            table,
            eigen,
            grid: grid.clone(),
            m_eig: zeros.clone(),
            prev: zeros,
            rows,
            ops_eig,
            values: Vec::new(),
            next: 0,
            pending: None,
        })
    }

    /// Phi(s) o sum_j Lambda_ij(s) S~_j for every row, at one table sample.
    fn integrand(&mut self, sample: usize) -> Vec<CMatrix> {
        self.table.values_at(sample, &mut self.values);
        let u = self.eigen.phases(self.grid.sample_time(sample));
        let n = self.eigen.dim();
        self.rows
            .iter()
            .map(|row| {
                let mut q = CMatrix::zeros(n, n);
                for &(idx, j) in &row.terms {
                    q.zip_apply(&self.ops_eig[j], |acc, s| *acc += self.values[idx] * s);
                }
                rotate_in_place(&mut q, &u);
                q
            })
            .collect()
    }

    fn superoperator(&self, m_eig: &[CMatrix]) -> CMatrix {
        let m_site: Vec<CMatrix> = m_eig.iter().map(|m| self.eigen.to_site_basis(m)).collect();
        dissipator(self.eigen.dim(), &self.rows, &m_site)
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }
}

/// Yields K at every kernel sample time j dt/2, j = 0..=2 n_steps.
///
/// M at full steps grows by one Simpson panel; the midpoint value uses the
/// third-order rule int_0^d f = d (5 f0 + 8 f1 - f2) / 12 on the same samples.
impl Iterator for GeneratorAccumulator<'_> {
    type Item = CMatrix;

    fn next(&mut self) -> Option<CMatrix> {
        if let Some(k) = self.pending.take() {
            return Some(k);
        }
        let j = self.next;
        if j > 2 * self.grid.n_steps() {
            return None;
        }
        if j == 0 {
            self.next = 1;
            self.prev = self.integrand(0);
            return Some(self.superoperator(&self.m_eig));
        }
        let mid = self.integrand(j);
        let end = self.integrand(j + 1);
        let d = 0.5 * self.grid.dt();
        let c = |x: f64| Complex64::new(x, 0.0);
        let mut m_half = Vec::with_capacity(self.rows.len());
        for r in 0..self.rows.len() {
            m_half.push(&self.m_eig[r] + (&self.prev[r] * c(5.0) + &mid[r] * c(8.0) - &end[r]) * c(d / 12.0));
            let inc = (&self.prev[r] + &mid[r] * c(4.0) + &end[r]) * c(d / 3.0);
            self.m_eig[r] += inc;
        }
        self.prev = end;
        self.next = j + 2;
        self.pending = Some(self.superoperator(&self.m_eig));
        Some(self.superoperator(&m_half))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let total = 2 * self.grid.n_steps() + 1;
        let left = total - self.next.min(total) + usize::from(self.pending.is_some());
        (left, Some(left))
    }
}

/// Generator data at every grid node.
#[derive(Clone, Debug)]
pub struct GeneratorSeries {
    pub grid: TimeGrid,
    /// -i[H, .] as a superoperator.
    pub coherent: CMatrix,
    /// K at every sample time j dt/2.
    pub dissipative: Vec<CMatrix>,
}

impl GeneratorSeries {
    /// Full generator coherent + K at sample j.
    pub fn generator(&self, j: usize) -> CMatrix {
        &self.coherent + &self.dissipative[j]
    }
}

/// Collects K at every sample; memory grows as n_steps N^4, so long runs stream instead.
pub fn accumulate_generator(
    table: &CorrelationTable,
    h: &DMatrix<f64>,
    grid: &TimeGrid,
) -> Result<GeneratorSeries> {
    let acc = GeneratorAccumulator::new(table, h, grid)?;
    Ok(GeneratorSeries {
        grid: grid.clone(),
        coherent: coherent_superoperator(h),
        dissipative: acc.collect(),
    })
}
