use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use super::quadrature::{reference_quadrature, tanh_sinh_rule, Domain};
use crate::corr::{KernelKind, ModeSet};
use crate::error::{Error, Result};
use crate::model::{coth_half, BathSpec, SpectralDensityFamily, WAVENUMBER_TO_ANGULAR};
use crate::varopt::SiteFraction;

/// Default relative tolerance of oracle integrals.
pub const ORACLE_TOLERANCE: f64 = 1e-10;

/// One harmonic mode coupled linearly to a site: g (b + b^dag), both in cm^-1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mode {
    pub omega: f64,
    pub g: f64,
}

/// Discrete baths, one independent list of modes per site.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteBath {
    pub sites: Vec<Vec<Mode>>,
    /// Fock-space truncation: total number of quanta kept in the exact propagation.
    pub max_quanta: usize,
}

impl FiniteBath {
    pub fn new(sites: Vec<Vec<Mode>>, max_quanta: usize) -> Result<Self> {
        for m in sites.iter().flatten() {
            if !(m.omega > 0.0 && m.omega.is_finite() && m.g.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "mode needs omega > 0 and finite coupling, got {m:?}"
                )));
            }
        }
        Ok(FiniteBath { sites, max_quanta })
    }

    /// Discretizes every site density of `baths` into `n_modes` modes.
    pub fn from_baths(baths: &BathSpec, n_modes: usize, max_quanta: usize) -> Result<Self> {
        let sites = baths
            .sites()
            .iter()
            .map(|j| discretize_bath(j, n_modes))
            .collect::<Result<Vec<_>>>()?;
        FiniteBath::new(sites, max_quanta)
    }

    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn n_modes(&self) -> usize {
        self.sites.iter().map(Vec::len).sum()
    }

    /// sum_k g_k^2 / omega_k for one site.
    pub fn reorganization(&self, site: usize) -> f64 {
        self.sites[site].iter().map(|m| m.g * m.g / m.omega).sum()
    }

    /// Discrete analogue of the independent-boson exponent Gamma_n(t), t in ps.
    pub fn decoherence(&self, site: usize, beta: f64, t: f64) -> f64 {
        self.sites[site]
            .iter()
            .map(|m| {
                let x = m.g / m.omega;
                x * x * coth_half(beta * m.omega) * (1.0 - (WAVENUMBER_TO_ANGULAR * m.omega * t).cos())
            })
            .sum()
    }

    /// Engine mode sets with weights g_k^2.
    pub fn mode_sets(&self) -> Result<Vec<ModeSet>> {
        self.sites
            .iter()
            .map(|ms| {
                ModeSet::discrete(
                    ms.iter().map(|m| m.omega).collect(),
                    ms.iter().map(|m| m.g * m.g).collect(),
                )
            })
            .collect()
    }
}

/// Panel width for half-line integrals of J: resolves the density and, for t > 0, the phase omega t.
fn oracle_panel(family: &SpectralDensityFamily, t: f64) -> f64 {
    let mut p = 0.5 * family.characteristic_frequency().min(family.smoothness_scale());
    if t > 0.0 {
        p = p.min(PI / (WAVENUMBER_TO_ANGULAR * t));
    }
    p
}

/// Reference integral of g(omega) J(omega) over the half line.
pub fn spectral_integral<G: Fn(f64) -> f64>(family: &SpectralDensityFamily, t: f64, g: G) -> Result<f64> {
    if family.is_zero() {
        return Ok(0.0);
    }
    reference_quadrature(
        |w| family.value(w) * g(w),
        Domain::SemiInfinite {
            panel: oracle_panel(family, t),
        },
        ORACLE_TOLERANCE,
    )
    .map(|e| e.value)
}

/// Gamma(t) = int J coth(beta omega / 2) (1 - cos omega t) / omega^2, t in ps.
/// `t = inf` gives the long-time limit, where the cosine averages out.
pub fn independent_boson_decoherence(family: &SpectralDensityFamily, beta: f64, t: f64) -> Result<f64> {
    family.check_infrared()?;
    if t == 0.0 {
        return Ok(0.0);
    }
    if t.is_infinite() {
        return spectral_integral(family, 0.0, |w| coth_half(beta * w) / (w * w));
    }
    if !(t > 0.0) {
        return Err(Error::InvalidInput(format!("time must be >= 0, got {t}")));
    }
    spectral_integral(family, t, |w| {
        // 1 - cos x = 2 sin^2(x/2) avoids cancellation at small omega
        let s = (0.5 * WAVENUMBER_TO_ANGULAR * w * t).sin();
        coth_half(beta * w) * 2.0 * s * s / (w * w)
    })
}

/// Kernel value at t (ps) by reference quadrature, in the engine's units.
pub fn reference_kernel(
    kind: KernelKind,
    family: &SpectralDensityFamily,
    fraction: &SiteFraction,
    beta: f64,
    t: f64,
) -> Result<Complex64> {
    let vanishes = match (kind, fraction) {
        (KernelKind::Xy | KernelKind::Yz, SiteFraction::Zero) => true,
        (KernelKind::Zz | KernelKind::Yz, SiteFraction::One) => true,
        _ => family.is_zero(),
    };
    if vanishes {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let wr = WAVENUMBER_TO_ANGULAR;
    let amp = |w: f64| -> f64 {
        let f = fraction.value(w);
        match kind {
            KernelKind::Zz => (1.0 - f) * (1.0 - f),
            KernelKind::Xy => f * f / (w * w),
            KernelKind::Yz => f * (1.0 - f) / w,
        }
    };
    let cos_part = |with_coth: bool| {
        spectral_integral(family, t, |w| {
            let thermal = if with_coth { coth_half(beta * w) } else { 1.0 };
            amp(w) * thermal * (wr * w * t).cos()
        })
    };
    // sine integrals vanish identically at t = 0, where the panel sum could not terminate
    let sin_part = |with_coth: bool| {
        if t == 0.0 {
            return Ok(0.0);
        }
        spectral_integral(family, t, |w| {
            let thermal = if with_coth { coth_half(beta * w) } else { 1.0 };
            amp(w) * thermal * (wr * w * t).sin()
        })
    };
    let (re, im) = match kind {
        KernelKind::Zz | KernelKind::Xy => (cos_part(true)?, -sin_part(false)?),
        KernelKind::Yz => (sin_part(true)?, cos_part(false)?),
    };
    let unit = match kind {
        KernelKind::Zz => wr * wr,
        KernelKind::Xy => 1.0,
        KernelKind::Yz => wr,
    };
    Ok(Complex64::new(re, im) * unit)
}

/// Level of the tanh-sinh rule that discretizes the measure J(omega)/omega.
const MEASURE_LEVEL: u32 = 6;

/// Gauss rule for the measure J(omega)/omega d omega: modes sit at the nodes and
/// g_k^2 = w_k omega_k, so sum_k g_k^2 / omega_k equals lambda up to quadrature error
/// of the discretized measure.
///
/// The recurrence coefficients come from the Stieltjes procedure on a fine
/// tanh-sinh discretization; nodes and weights from the Jacobi matrix.
pub fn discretize_bath(family: &SpectralDensityFamily, n_modes: usize) -> Result<Vec<Mode>> {
    if n_modes == 0 {
        return Err(Error::InvalidInput("need at least one mode".into()));
    }
    if family.is_zero() {
        return Ok(Vec::new());
    }
    let panel = oracle_panel(family, 0.0);
    let mut x = Vec::new();
    let mut w = Vec::new();
    let mut mass = 0.0;
    let mut quiet = 0;
    for k in 0.. {
        let mut m = 0.0;
        for (node, weight) in tanh_sinh_rule(k as f64 * panel, (k + 1) as f64 * panel, MEASURE_LEVEL) {
            let mu = weight * family.value(node) / node;
            if mu > 0.0 {
                x.push(node);
                w.push(mu);
                m += mu;
            }
        }
        mass += m;
        if mass > 0.0 && m <= 1e-17 * mass {
            quiet += 1;
            if quiet >= 3 {
                break;
            }
        } else {
            quiet = 0;
        }
        if k > 100_000 {
            return Err(Error::Oracle("spectral measure does not decay".into()));
        }
    }
    if x.len() < n_modes {
        return Err(Error::Oracle(format!(
            "measure has {} support points, fewer than {n_modes} modes",
            x.len()
        )));
    }

    // Stieltjes on the discrete measure, with frequencies scaled to O(1)
    let scale = family.characteristic_frequency();
    let xs: Vec<f64> = x.iter().map(|v| v / scale).collect();
    let mut alpha = Vec::with_capacity(n_modes);
    let mut beta_rec = Vec::with_capacity(n_modes);
    let mut p_prev = vec![0.0; xs.len()];
    let mut p = vec![1.0; xs.len()];
    let mut norm_prev = 1.0;
    for k in 0..n_modes {
        let norm: f64 = p.iter().zip(&w).map(|(pi, wi)| wi * pi * pi).sum();
        let a = p.iter().zip(&w).zip(&xs).map(|((pi, wi), xi)| wi * xi * pi * pi).sum::<f64>() / norm;
        let b = if k == 0 { norm } else { norm / norm_prev };
        alpha.push(a);
        beta_rec.push(b);
        let next: Vec<f64> = (0..xs.len())
            .map(|i| (xs[i] - a) * p[i] - if k == 0 { 0.0 } else { b * p_prev[i] })
            .collect();
        p_prev = std::mem::replace(&mut p, next);
        norm_prev = norm;
    }
    let mu0 = beta_rec[0];
    let jacobi = DMatrix::from_fn(n_modes, n_modes, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j || j + 1 == i {
            beta_rec[i.max(j)].sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jacobi);
    let mut modes: Vec<Mode> = (0..n_modes)
        .map(|k| {
            let omega = eig.eigenvalues[k] * scale;
            let v0 = eig.eigenvectors[(0, k)];
            let weight = mu0 * v0 * v0;
            Mode {
                omega,
                g: (weight * omega).sqrt(),
            }
        })
        .collect();
    if modes.iter().any(|m| !(m.omega > 0.0) || !m.g.is_finite()) {
        return Err(Error::Oracle("Gauss nodes left the positive half line".into()));
    }
    modes.sort_by(|a, b| a.omega.total_cmp(&b.omega));
    Ok(modes)
}
