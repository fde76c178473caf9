//! Bath kernels phi^zz, phi^xy, phi^yz as functions of time.
//!
//! Continuum baths are reduced to a fixed set of frequency nodes (composite
//! 10-point Gauss-Legendre panels, each no wider than one period at t_max),
//! so every tabulated time is evaluated with the same rule and node values do
//! not depend on the time step.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use super::TimeGrid;
use crate::error::{Error, Result};
use crate::model::quad::{self, gauss_legendre_10, Tolerance};
use crate::model::spectral::{coth_half, integrate_over_spectrum};
use crate::model::{BathSpec, SpectralDensityFamily, WAVENUMBER_TO_ANGULAR};
use crate::varopt::{Frame, SiteFraction};

/// Relative weight of the spectral tail dropped beyond the last node.
pub const TAIL_TOLERANCE: f64 = 1e-12;

/// Bath modes in cm^-1 with integration weights (J(omega) d omega, or g^2 for discrete modes).
#[derive(Clone, Debug, PartialEq)]
pub struct ModeSet {
    omega: Vec<f64>,
    weight: Vec<f64>,
}

impl ModeSet {
    pub fn discrete(omega: Vec<f64>, g2: Vec<f64>) -> Result<Self> {
        if omega.len() != g2.len() {
            return Err(Error::InvalidInput(format!(
                "{} mode frequencies but {} couplings",
                omega.len(),
                g2.len()
            )));
        }
        if omega.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidInput("mode frequencies must be positive".into()));
        }
        if g2.iter().any(|&g| !(g >= 0.0 && g.is_finite())) {
            return Err(Error::InvalidInput("squared couplings must be non-negative".into()));
        }
        Ok(ModeSet { omega, weight: g2 })
    }

    /// Quadrature nodes for a continuous density, resolving times up to `t_max_ps`.
    pub fn continuum(
        family: &SpectralDensityFamily,
        beta: f64,
        t_max_ps: f64,
        fraction: &SiteFraction,
    ) -> Result<Self> {
        Self::continuum_graded(family, beta, t_max_ps, fraction_scale(fraction))
    }

    /// As `continuum`, refining towards zero down to `grade / 4` (cm^-1).
    pub fn continuum_graded(
        family: &SpectralDensityFamily,
        beta: f64,
        t_max_ps: f64,
        grade: Option<f64>,
    ) -> Result<Self> {
        if family.is_zero() {
            return Ok(ModeSet {
                omega: Vec::new(),
                weight: Vec::new(),
            });
        }
        let h = panel_width(family, t_max_ps);
        let omega_max = spectral_cutoff(family, beta)?;
        let mut omega = Vec::new();
        let mut weight = Vec::new();
        for (a, b) in panels(h, omega_max, grade) {
            for (x, w) in gauss_legendre_10(a, b) {
                let j = family.value(x);
                if j > 0.0 {
                    omega.push(x);
                    weight.push(w * j);
                }
            }
        }
        Ok(ModeSet { omega, weight })
    }

    pub(crate) fn from_raw(omega: Vec<f64>, weight: Vec<f64>) -> Self {
        ModeSet { omega, weight }
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn weight(&self) -> &[f64] {
        &self.weight
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }
}

/// Widest panel that keeps both the density and the phase omega t_max resolved.
fn panel_width(family: &SpectralDensityFamily, t_max_ps: f64) -> f64 {
    let phase = if t_max_ps > 0.0 {
        2.0 * PI / (WAVENUMBER_TO_ANGULAR * t_max_ps)
    } else {
        f64::INFINITY
    };
    family.smoothness_scale().min(phase)
}

/// Frequency below which F_n switches on, if it is not constant.
pub(crate) fn fraction_scale(fraction: &SiteFraction) -> Option<f64> {
    match *fraction {
        SiteFraction::Variational { g_r, g_b, b, beta } => {
            let c = (b * g_b).abs();
            if c == 0.0 || g_r == 0.0 {
                return None;
            }
            let g = g_r.abs();
            Some((c / (g * beta)).sqrt().max(c / (2.0 * g)))
        }
        _ => None,
    }
}

/// Uniform panels of width h on [0, omega_max]. The first is split geometrically
/// towards zero, down to a quarter of the scale on which F_n switches on, so
/// non-analytic behaviour at omega = 0 (e.g. stretched exponentials) is resolved.
fn panels(h: f64, omega_max: f64, grade: Option<f64>) -> Vec<(f64, f64)> {
    let n = (omega_max / h).ceil().max(1.0) as usize;
    let floor = grade.map_or(h, |s| s.min(h)) * 0.25 / 256.0;
    let mut edges = vec![h];
    while *edges.last().unwrap() > floor && edges.len() < 200 {
        let e = 0.5 * edges.last().unwrap();
        edges.push(e);
    }
    edges.push(0.0);
    edges.reverse();
    let mut out: Vec<(f64, f64)> = edges.windows(2).map(|w| (w[0], w[1])).collect();
    out.extend((1..n).map(|k| (k as f64 * h, (k + 1) as f64 * h)));
    out
}

/// Frequency beyond which every kernel integrand (bounded using 0 <= F <= 1)
/// carries less than `TAIL_TOLERANCE` of its total weight.
pub fn spectral_cutoff(family: &SpectralDensityFamily, beta: f64) -> Result<f64> {
    let scale = family.characteristic_frequency();
    let envelopes: [&dyn Fn(f64) -> f64; 3] = [
        &|w| family.value(w) * coth_half(beta * w),
        &|w| family.value(w) * coth_half(beta * w) / w,
        &|w| family.value(w) * coth_half(beta * w) / (w * w),
    ];
    let tol = Tolerance {
        rel: 1e-6,
        abs: 0.0,
        max_subdivisions: 200,
    };
    let mut cutoff = 0.0f64;
    for env in envelopes {
        let total = integrate_over_spectrum(family, env)?.value;
        if total == 0.0 {
            continue;
        }
        let target = TAIL_TOLERANCE * total;
        let tail = |w0: f64| -> Result<f64> {
            quad::integrate_semi_infinite(|x| env(w0 + x), scale, &tol).map(|e| e.value)
        };
        let mut lo = 0.0;
        let mut hi = scale;
        while tail(hi)? > target {
            lo = hi;
            hi *= 2.0;
            if hi > 1e9 * scale {
                return Err(Error::Integrability(
                    "spectral tail does not decay".into(),
                ));
            }
        }
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if tail(mid)? > target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-3 * hi {
                break;
            }
        }
        cutoff = cutoff.max(hi);
    }
    Ok(cutoff)
}

/// Kernel weights of one fraction on a shared node set (cm^-1 units).
#[derive(Clone, Debug)]
struct NodeWeights {
    zz_coth: Vec<f64>,
    zz: Vec<f64>,
    xy_coth: Vec<f64>,
    xy: Vec<f64>,
    yz_coth: Vec<f64>,
    yz: Vec<f64>,
}

impl NodeWeights {
    fn new(modes: &ModeSet, fraction: &SiteFraction, beta: f64) -> Result<Self> {
        let n = modes.len();
        let mut nw = NodeWeights {
            zz_coth: Vec::with_capacity(n),
            zz: Vec::with_capacity(n),
            xy_coth: Vec::with_capacity(n),
            xy: Vec::with_capacity(n),
            yz_coth: Vec::with_capacity(n),
            yz: Vec::with_capacity(n),
        };
        for (&w, &weight) in modes.omega.iter().zip(&modes.weight) {
            let f = fraction.value(w);
            if !f.is_finite() {
                return Err(Error::Quadrature {
                    t: 0.0,
                    message: format!("displacement fraction singular at omega = {w} cm^-1"),
                });
            }
            let coth = coth_half(beta * w);
            let a = weight * (1.0 - f) * (1.0 - f);
            let b = weight * f * f / (w * w);
            let c = weight * f * (1.0 - f) / w;
            nw.zz_coth.push(a * coth);
            nw.zz.push(a);
            nw.xy_coth.push(b * coth);
            nw.xy.push(b);
            nw.yz_coth.push(c * coth);
            nw.yz.push(c);
        }
        Ok(nw)
    }
}

/// (phi_zz, phi_xy, phi_yz) at time t (ps) for every weight set sharing `omega_rad`,
/// converted to rad/ps powers.
fn evaluate_group(omega_rad: &[f64], weights: &[NodeWeights], t: f64, out: &mut [[Complex64; 3]]) {
    let mut acc = vec![[0.0f64; 6]; weights.len()];
    for (k, &w) in omega_rad.iter().enumerate() {
        let (s, c) = (w * t).sin_cos();
        for (a, nw) in acc.iter_mut().zip(weights) {
            a[0] += nw.zz_coth[k] * c;
            a[1] += nw.zz[k] * s;
            a[2] += nw.xy_coth[k] * c;
            a[3] += nw.xy[k] * s;
            a[4] += nw.yz_coth[k] * s;
            a[5] += nw.yz[k] * c;
        }
    }
    let c2 = WAVENUMBER_TO_ANGULAR * WAVENUMBER_TO_ANGULAR;
    for (o, a) in out.iter_mut().zip(&acc) {
        *o = [
            Complex64::new(a[0], -a[1]) * c2,
            Complex64::new(a[2], -a[3]),
            Complex64::new(a[4], a[5]) * WAVENUMBER_TO_ANGULAR,
        ];
    }
}

/// Kernel time series for one distinct (bath, fraction) pair, sampled every dt/2.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteKernels {
    /// (rad/ps)^2
    pub zz: Vec<Complex64>,
    /// dimensionless
    pub xy: Vec<Complex64>,
    /// rad/ps
    pub yz: Vec<Complex64>,
}

impl SiteKernels {
    fn is_zero(series: &[Complex64]) -> bool {
        series.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    pub fn zz_vanishes(&self) -> bool {
        Self::is_zero(&self.zz)
    }

    pub fn xy_vanishes(&self) -> bool {
        Self::is_zero(&self.xy)
    }

    pub fn yz_vanishes(&self) -> bool {
        Self::is_zero(&self.yz)
    }
}

/// Per-site kernels on the sample grid of a `TimeGrid`.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelSet {
    grid: TimeGrid,
    site_kernel: Vec<usize>,
    kernels: Vec<SiteKernels>,
    modes: Vec<ModeSet>,
}

impl KernelSet {
    /// Tabulates kernels for explicit mode sets. Sites sharing modes and fraction
    /// share one kernel.
    pub fn tabulate(
        modes: &[ModeSet],
        fractions: &[SiteFraction],
        beta: f64,
        grid: &TimeGrid,
    ) -> Result<Self> {
        if modes.len() != fractions.len() {
            return Err(Error::InvalidInput(format!(
                "{} mode sets for {} fractions",
                modes.len(),
                fractions.len()
            )));
        }
        let mut unique: Vec<(&ModeSet, &SiteFraction)> = Vec::new();
        let mut site_kernel = Vec::with_capacity(modes.len());
        for (m, f) in modes.iter().zip(fractions) {
            let idx = match unique.iter().position(|(um, uf)| *um == m && *uf == f) {
                Some(i) => i,
                None => {
                    unique.push((m, f));
                    unique.len() - 1
                }
            };
            site_kernel.push(idx);
        }
        // kernels on the same nodes are evaluated together so each phase is computed once
        let mut kernels = vec![None; unique.len()];
        let mut done = vec![false; unique.len()];
        for first in 0..unique.len() {
            if done[first] {
                continue;
            }
            let group: Vec<usize> = (first..unique.len())
                .filter(|&u| !done[u] && unique[u].0 == unique[first].0)
                .collect();
            let nodes = unique[first].0;
            let omega_rad: Vec<f64> = nodes.omega.iter().map(|w| w * WAVENUMBER_TO_ANGULAR).collect();
            let weights = group
                .iter()
                .map(|&u| NodeWeights::new(nodes, unique[u].1, beta))
                .collect::<Result<Vec<_>>>()?;
            let values: Vec<Vec<[Complex64; 3]>> = (0..grid.n_samples())
                .into_par_iter()
                .map(|j| {
                    let mut out = vec![[Complex64::new(0.0, 0.0); 3]; group.len()];
                    evaluate_group(&omega_rad, &weights, grid.sample_time(j), &mut out);
                    out
                })
                .collect();
            for (g, &u) in group.iter().enumerate() {
                kernels[u] = Some(SiteKernels {
                    zz: values.iter().map(|v| v[g][0]).collect(),
                    xy: values.iter().map(|v| v[g][1]).collect(),
                    yz: values.iter().map(|v| v[g][2]).collect(),
                });
                done[u] = true;
            }
        }
        let kernels: Vec<SiteKernels> = kernels.into_iter().map(|k| k.expect("every kernel evaluated")).collect();
        Ok(KernelSet {
            grid: grid.clone(),
            site_kernel,
            kernels,
            modes: unique.into_iter().map(|(m, _)| m.clone()).collect(),
        })
    }

    /// Kernels for continuous baths in the given frame.
    pub fn for_baths(baths: &BathSpec, frame: &Frame, grid: &TimeGrid) -> Result<Self> {
        let modes = continuum_modes(baths, frame, grid)?;
        Self::tabulate(&modes, &frame.fractions, frame.beta, grid)
    }

    pub(crate) fn from_parts(
        grid: TimeGrid,
        site_kernel: Vec<usize>,
        kernels: Vec<SiteKernels>,
        modes: Vec<ModeSet>,
    ) -> Result<Self> {
        if site_kernel.iter().any(|&k| k >= kernels.len())
            || kernels.len() != modes.len()
            || kernels.iter().any(|k| {
                k.zz.len() != grid.n_samples()
                    || k.xy.len() != grid.n_samples()
                    || k.yz.len() != grid.n_samples()
            })
        {
            return Err(Error::GridMismatch("inconsistent kernel data".into()));
        }
        Ok(KernelSet {
            grid,
            site_kernel,
            kernels,
            modes,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn n_sites(&self) -> usize {
        self.site_kernel.len()
    }

    pub fn site(&self, n: usize) -> &SiteKernels {
        &self.kernels[self.site_kernel[n]]
    }

    /// Frequency nodes (cm^-1) used for site n.
    pub fn nodes(&self, n: usize) -> &ModeSet {
        &self.modes[self.site_kernel[n]]
    }

    pub(crate) fn parts(&self) -> (&[usize], &[SiteKernels], &[ModeSet]) {
        (&self.site_kernel, &self.kernels, &self.modes)
    }

    pub fn phi_zz(&self, n: usize, sample: usize) -> Complex64 {
        self.site(n).zz[sample]
    }

    pub fn phi_xy(&self, n: usize, sample: usize) -> Complex64 {
        self.site(n).xy[sample]
    }

    pub fn phi_yz(&self, n: usize, sample: usize) -> Complex64 {
        self.site(n).yz[sample]
    }
}

/// Node sets for continuous baths. Sites with the same density share one node set,
/// graded for the sharpest fraction among them.
pub fn continuum_modes(baths: &BathSpec, frame: &Frame, grid: &TimeGrid) -> Result<Vec<ModeSet>> {
    baths.check_matches(frame.n_sites())?;
    let mut built: Vec<(&SpectralDensityFamily, ModeSet)> = Vec::new();
    let mut out = Vec::with_capacity(baths.n_sites());
    for n in 0..baths.n_sites() {
        let family = baths.site(n);
        if let Some((_, m)) = built.iter().find(|(f, _)| *f == family) {
            out.push(m.clone());
            continue;
        }
        let grade = (0..baths.n_sites())
            .filter(|&k| baths.site(k) == family)
            .filter_map(|k| fraction_scale(&frame.fractions[k]))
            .reduce(f64::min);
        let modes = ModeSet::continuum_graded(family, frame.beta, grid.t_max(), grade)?;
        built.push((family, modes.clone()));
        out.push(modes);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelKind {
    Zz,
    Xy,
    Yz,
}

/// Direct adaptive evaluation of one kernel at one time, independent of any grid.
pub fn evaluate_kernel(
    kind: KernelKind,
    family: &SpectralDensityFamily,
    fraction: &SiteFraction,
    beta: f64,
    t: f64,
) -> Result<Complex64> {
    if t < 0.0 {
        return Err(Error::InvalidInput(format!("kernel time must be >= 0, got {t}")));
    }
    if family.is_zero() {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let wr = WAVENUMBER_TO_ANGULAR;
    let amp = |w: f64| -> f64 {
        let f = fraction.value(w);
        let j = family.value(w);
        match kind {
            KernelKind::Zz => j * (1.0 - f) * (1.0 - f),
            KernelKind::Xy => j * f * f / (w * w),
            KernelKind::Yz => j * f * (1.0 - f) / w,
        }
    };
    let omega_max = spectral_cutoff(family, beta)?;
    let h = panel_width(family, t.max(1e-300));
    let scale = integrate_over_spectrum(family, |w| amp(w).abs() * coth_half(beta * w))
        .map_err(|e| Error::Quadrature {
            t,
            message: e.to_string(),
        })?
        .value;
    if scale == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let tol = Tolerance {
        rel: 1e-13,
        abs: 1e-16 * scale,
        max_subdivisions: 200,
    };
    let (mut re, mut im) = (0.0, 0.0);
    for (a, b) in panels(h, omega_max, fraction_scale(fraction)) {
        let err = |e: Error| Error::Quadrature {
            t,
            message: e.to_string(),
        };
        let (f_re, f_im): (Box<dyn Fn(f64) -> f64>, Box<dyn Fn(f64) -> f64>) = match kind {
            KernelKind::Zz | KernelKind::Xy => (
                Box::new(|w: f64| amp(w) * coth_half(beta * w) * (wr * w * t).cos()),
                Box::new(|w: f64| -amp(w) * (wr * w * t).sin()),
            ),
            KernelKind::Yz => (
                Box::new(|w: f64| amp(w) * coth_half(beta * w) * (wr * w * t).sin()),
                Box::new(|w: f64| amp(w) * (wr * w * t).cos()),
            ),
        };
        re += quad::integrate(f_re, a, b, &tol).map_err(err)?.value;
        im += quad::integrate(f_im, a, b, &tol).map_err(err)?.value;
    }
    let unit = match kind {
        KernelKind::Zz => wr * wr,
        KernelKind::Xy => 1.0,
        KernelKind::Yz => wr,
    };
    Ok(Complex64::new(re, im) * unit)
}

/// phi^zz at time t (ps), in (rad/ps)^2.
pub fn phi_zz(family: &SpectralDensityFamily, fraction: &SiteFraction, beta: f64, t: f64) -> Result<Complex64> {
    evaluate_kernel(KernelKind::Zz, family, fraction, beta, t)
}

/// phi^xy at time t (ps), dimensionless.
pub fn phi_xy(family: &SpectralDensityFamily, fraction: &SiteFraction, beta: f64, t: f64) -> Result<Complex64> {
    evaluate_kernel(KernelKind::Xy, family, fraction, beta, t)
}

/// phi^yz at time t (ps), in rad/ps.
pub fn phi_yz(family: &SpectralDensityFamily, fraction: &SiteFraction, beta: f64, t: f64) -> Result<Complex64> {
    evaluate_kernel(KernelKind::Yz, family, fraction, beta, t)
}
