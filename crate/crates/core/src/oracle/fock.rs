//! Brute-force bath correlation functions for one truncated Fock mode per site.
//!
//! Displacements are dense matrix exponentials of d (b^dag - b) and thermal
//! averages are traces against the truncated Gibbs state, so nothing here
//! relies on Gaussian identities.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::corr::OperatorKind;
use crate::error::{Error, Result};
use crate::model::WAVENUMBER_TO_ANGULAR;

type Op = DMatrix<Complex64>;

/// A single mode attached to a site, displaced by `fraction` of g / omega.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FockSite {
    pub omega: f64,
    pub g: f64,
    pub fraction: f64,
}

struct SiteOps {
    site: FockSite,
    rho: Op,
    quadrature: Op,
    plus: Op,
    minus: Op,
}

/// Truncated single-mode baths with their thermal states.
pub struct FockBath {
    sites: Vec<SiteOps>,
    levels: usize,
}

/// Sum of products of per-site operators.
struct Term {
    coef: Complex64,
    /// None is the identity.
    factors: Vec<Option<Op>>,
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

impl FockBath {
    /// `levels` Fock states per mode; the Gibbs weight beyond them must be below 1e-12.
    pub fn new(sites: &[FockSite], beta: f64, levels: usize) -> Result<Self> {
        let mut out = Vec::with_capacity(sites.len());
        for s in sites {
            if !(s.omega > 0.0) {
                return Err(Error::InvalidInput(format!("mode frequency must be positive, got {}", s.omega)));
            }
            let q = (-beta * s.omega).exp();
            let tail = q.powi(levels as i32);
            if tail > 1e-12 {
                return Err(Error::Oracle(format!(
                    "{levels} Fock levels leave Gibbs weight {tail:.1e} for omega = {}",
                    s.omega
                )));
            }
            let mut rho = Op::zeros(levels, levels);
            let z: f64 = (0..levels).map(|k| q.powi(k as i32)).sum();
            for k in 0..levels {
                rho[(k, k)] = c(q.powi(k as i32) / z);
            }
            let mut b = Op::zeros(levels, levels);
            for k in 1..levels {
                b[(k - 1, k)] = c((k as f64).sqrt());
            }
            let bd = b.adjoint();
            let d = s.fraction * s.g / s.omega;
            let gen = (&bd - &b) * c(d);
            out.push(SiteOps {
                site: *s,
                rho,
                quadrature: &b + &bd,
                plus: gen.clone().exp(),
                minus: (-gen).exp(),
            });
        }
        Ok(FockBath { sites: out, levels })
    }

    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    /// Thermal average of the site displacement, B_n.
    pub fn renormalization(&self, n: usize) -> f64 {
        let s = &self.sites[n];
        (&s.rho * &s.plus).trace().re
    }

    /// Heisenberg-picture operator under the free mode Hamiltonian, t in ps.
    fn evolve(&self, n: usize, op: &Op, t: f64) -> Op {
        let w = WAVENUMBER_TO_ANGULAR * self.sites[n].site.omega * t;
        Op::from_fn(self.levels, self.levels, |j, k| {
            op[(j, k)] * Complex64::from_polar(1.0, w * (j as f64 - k as f64))
        })
    }

    fn single(&self, n: usize, op: Op, coef: Complex64) -> Term {
        let mut factors = vec![None; self.n_sites()];
        factors[n] = Some(op);
        Term { coef, factors }
    }

    fn pair(&self, n: usize, a: Op, m: usize, b: Op, coef: Complex64) -> Term {
        let mut factors = vec![None; self.n_sites()];
        factors[n] = Some(a);
        factors[m] = Some(b);
        Term { coef, factors }
    }

    /// Bath operator multiplying a system operator in the displaced frame, at time t.
    fn bath_operator(&self, op: OperatorKind, v: &DMatrix<f64>, t: f64) -> Vec<Term> {
        let ev = |n: usize, o: &Op| self.evolve(n, o, t);
        match op {
            OperatorKind::Z(p) => {
                let s = &self.sites[p];
                vec![self.single(p, ev(p, &s.quadrature), c((1.0 - s.site.fraction) * s.site.g))]
            }
            OperatorKind::X(n, m) | OperatorKind::Y(n, m) => {
                let (sn, sm) = (&self.sites[n], &self.sites[m]);
                let forward = self.pair(n, ev(n, &sn.plus), m, ev(m, &sm.minus), c(1.0));
                let backward = self.pair(n, ev(n, &sn.minus), m, ev(m, &sm.plus), c(1.0));
                let vnm = v[(n, m)];
                let (cf, cb) = if matches!(op, OperatorKind::X(..)) {
                    (c(0.5 * vnm), c(0.5 * vnm))
                } else {
                    let k = Complex64::new(0.0, -0.5 * vnm);
                    (k, -k)
                };
                vec![
                    Term { coef: cf, ..forward },
                    Term { coef: cb, ..backward },
                ]
            }
        }
    }

    fn expect_product(&self, a: &Term, b: Option<&Term>) -> Complex64 {
        let mut value = a.coef * b.map_or(c(1.0), |t| t.coef);
        for (s, ops) in self.sites.iter().enumerate() {
            let fa = a.factors[s].as_ref();
            let fb = b.and_then(|t| t.factors[s].as_ref());
            let tr = match (fa, fb) {
                (None, None) => continue,
                (Some(x), None) | (None, Some(x)) => (&ops.rho * x).trace(),
                (Some(x), Some(y)) => (&ops.rho * x * y).trace(),
            };
            value *= tr;
        }
        value
    }

    fn mean(&self, terms: &[Term]) -> Complex64 {
        terms.iter().map(|t| self.expect_product(t, None)).sum()
    }

    /// <dE_i(t) dE_j(0)> with dE = E - <E>, in cm^-2 (t in ps, couplings in cm^-1).
    pub fn correlation(&self, v: &DMatrix<f64>, i: OperatorKind, j: OperatorKind, t: f64) -> Complex64 {
        let ei = self.bath_operator(i, v, t);
        let ej = self.bath_operator(j, v, 0.0);
        let mut total = Complex64::new(0.0, 0.0);
        for a in &ei {
            for b in &ej {
                total += self.expect_product(a, Some(b));
            }
        }
        total - self.mean(&ei) * self.mean(&ej)
    }
}
