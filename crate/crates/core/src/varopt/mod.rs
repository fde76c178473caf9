//! Variational minimization of the free-energy bound.
//!
//! The transformed system Hamiltonian depends on the per-site renormalization
//! parameters {B_n, R_n}. Stationarity of the bound fixes the mode displacement
//! fraction F_n(omega) in closed form given the bound gradients, which in turn
//! determines {B_n, R_n} through two frequency integrals. The pair of maps is
//! iterated to self-consistency from several starting points.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::model::spectral::{coth_half, integrate_over_spectrum};
use crate::model::{BathSpec, SiteNetwork};

mod solve;

pub use solve::{solve_variational, Candidate, SolveOptions, StartPoint, VariationalSolution};

/// Per-site coupling renormalization factors B_n and energy shifts R_n (cm^-1).
#[derive(Clone, Debug, PartialEq)]
pub struct RenormalizationState {
    pub b: Vec<f64>,
    pub r: Vec<f64>,
}

impl RenormalizationState {
    pub fn new(b: Vec<f64>, r: Vec<f64>) -> Result<Self> {
        if b.len() != r.len() {
            return Err(Error::InvalidInput(format!(
                "{} renormalization factors but {} shifts",
                b.len(),
                r.len()
            )));
        }
        if let Some(x) = b.iter().find(|&&x| !(x > 0.0 && x <= 1.0)) {
            return Err(Error::InvalidInput(format!(
                "renormalization factor {x} outside (0, 1]"
            )));
        }
        if r.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite energy shift".into()));
        }
        Ok(RenormalizationState { b, r })
    }

    /// Undisplaced frame: F = 0, so B = 1 and R = 0.
    pub fn weak(n_sites: usize) -> Self {
        RenormalizationState {
            b: vec![1.0; n_sites],
            r: vec![0.0; n_sites],
        }
    }

    /// Fully displaced frame: F = 1, so R = -lambda and B from the thermal integral.
    pub fn polaron(baths: &BathSpec) -> Result<Self> {
        let fractions = vec![SiteFraction::One; baths.n_sites()];
        renormalization_from_fractions(baths, &fractions)
    }

    pub fn n_sites(&self) -> usize {
        self.b.len()
    }

    /// Sup-norm distance over {B_n, R_n / lambda_n}.
    pub fn distance(&self, other: &Self, lambdas: &[f64]) -> f64 {
        let mut d = 0.0f64;
        for n in 0..self.b.len() {
            d = d.max((self.b[n] - other.b[n]).abs());
            let scale = if lambdas[n] > 0.0 { lambdas[n] } else { 1.0 };
            d = d.max((self.r[n] - other.r[n]).abs() / scale);
        }
        d
    }

    /// self + alpha (target - self)
    pub fn mix_towards(&self, target: &Self, alpha: f64) -> Self {
        let lerp = |a: &[f64], b: &[f64]| -> Vec<f64> {
            a.iter().zip(b).map(|(x, y)| x + alpha * (y - x)).collect()
        };
        RenormalizationState {
            b: lerp(&self.b, &target.b),
            r: lerp(&self.r, &target.r),
        }
    }
}

/// H_S with energies shifted by R_n and couplings scaled by B_n B_m.
pub fn transformed_system_hamiltonian(net: &SiteNetwork, state: &RenormalizationState) -> DMatrix<f64> {
    let n = net.n_sites();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            net.energies()[i] + state.r[i]
        } else {
            state.b[i] * state.b[j] * net.coupling(i, j)
        }
    })
}

/// Boltzmann weights of the eigenstates, shifted for overflow safety.
fn boltzmann(eigen: &SymmetricEigen<f64, nalgebra::Dyn>, beta: f64) -> (f64, Vec<f64>) {
    let e_min = eigen.eigenvalues.min();
    let w: Vec<f64> = eigen
        .eigenvalues
        .iter()
        .map(|&e| (-beta * (e - e_min)).exp())
        .collect();
    (e_min, w)
}

/// System part of the Feynman-Bogoliubov bound, -(1/beta) ln tr exp(-beta H~_S), in cm^-1.
///
/// The bath partition function does not depend on the transformation and is omitted.
pub fn free_energy_bound(net: &SiteNetwork, state: &RenormalizationState, beta: f64) -> f64 {
    let h = transformed_system_hamiltonian(net, state);
    let eigen = SymmetricEigen::new(h);
    let (e_min, w) = boltzmann(&eigen, beta);
    e_min - w.iter().sum::<f64>().ln() / beta
}

/// Thermal density matrix exp(-beta H) / Z of a real symmetric Hamiltonian.
pub fn thermal_state(h: &DMatrix<f64>, beta: f64) -> DMatrix<f64> {
    let eigen = SymmetricEigen::new(h.clone());
    let (_, w) = boltzmann(&eigen, beta);
    let z: f64 = w.iter().sum();
    let v = &eigen.eigenvectors;
    let n = h.nrows();
    let mut rho = DMatrix::zeros(n, n);
    for (k, wk) in w.iter().enumerate() {
        let col = v.column(k);
        rho += (wk / z) * col * col.transpose();
    }
    rho
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundGradients {
    /// dA_B/dR_n: thermal population of site n.
    pub d_r: Vec<f64>,
    /// dA_B/dB_n = 2 sum_{m != n} B_m V_nm Re <m|rho_th|n>, in cm^-1.
    pub d_b: Vec<f64>,
}

pub fn bound_gradients(net: &SiteNetwork, state: &RenormalizationState, beta: f64) -> BoundGradients {
    let h = transformed_system_hamiltonian(net, state);
    let rho = thermal_state(&h, beta);
    let n = net.n_sites();
    let d_r = (0..n).map(|i| rho[(i, i)]).collect();
    let d_b = (0..n)
        .map(|i| {
            2.0 * (0..n)
                .filter(|&m| m != i)
                .map(|m| state.b[m] * net.coupling(i, m) * rho[(m, i)])
                .sum::<f64>()
        })
        .collect();
    BoundGradients { d_r, d_b }
}

/// Fraction of the full polaron displacement applied to a mode of frequency omega.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SiteFraction {
    /// No displacement (weak-coupling frame).
    Zero,
    /// Full displacement (polaron frame).
    One,
    /// F(omega) = 2 omega g_r / (2 omega g_r - b g_b coth(beta omega / 2)).
    Variational { g_r: f64, g_b: f64, b: f64, beta: f64 },
}

/// Denominators smaller than this are treated as singular.
pub const SINGULAR_DENOMINATOR: f64 = 1e-30;

impl SiteFraction {
    /// Builds the stationary fraction for one site. A site with vanishing thermal
    /// population contributes nothing to the bound and is left undisplaced.
    pub fn from_gradients(g_r: f64, g_b: f64, b: f64, beta: f64) -> Self {
        if g_r.abs() <= f64::MIN_POSITIVE {
            SiteFraction::Zero
        } else if g_b == 0.0 {
            SiteFraction::One
        } else {
            SiteFraction::Variational { g_r, g_b, b, beta }
        }
    }

    /// F(omega) at omega > 0 (cm^-1). NaN where the closed form is singular.
    #[inline]
    pub fn value(&self, omega: f64) -> f64 {
        match *self {
            SiteFraction::Zero => 0.0,
            SiteFraction::One => 1.0,
            SiteFraction::Variational { g_r, g_b, b, beta } => {
                let num = 2.0 * omega * g_r;
                let den = num - b * g_b * coth_half(beta * omega);
                if den.abs() < SINGULAR_DENOMINATOR {
                    f64::NAN
                } else {
                    num / den
                }
            }
        }
    }

    /// True when the sign conditions guarantee 0 <= F(omega) <= 1 for all omega > 0.
    pub fn is_bounded(&self) -> bool {
        match *self {
            SiteFraction::Zero | SiteFraction::One => true,
            SiteFraction::Variational { g_r, g_b, b, .. } => g_r >= 0.0 && b * g_b <= 0.0,
        }
    }

    /// Frequency at which the denominator changes sign, if any.
    ///
    /// 2 omega g_r tanh(beta omega / 2) is monotone in omega and sweeps (0, sign(g_r) inf),
    /// so a root exists exactly when g_r and b g_b share a sign.
    pub fn singular_frequency(&self) -> Option<f64> {
        let SiteFraction::Variational { g_r, g_b, b, beta } = *self else {
            return None;
        };
        let c = b * g_b;
        if g_r * c <= 0.0 {
            return None;
        }
        let h = |w: f64| 2.0 * w * g_r.abs() * (0.5 * beta * w).tanh() - c.abs();
        let (mut lo, mut hi) = (f64::MIN_POSITIVE.sqrt(), 1.0f64);
        while h(hi) < 0.0 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = (lo * hi).sqrt();
            if h(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        Some(0.5 * (lo + hi))
    }
}

/// F_n(omega) from the bound gradients; errors where the denominator vanishes.
pub fn displacement_fraction(
    omega: f64,
    site: usize,
    gradients: &BoundGradients,
    b: f64,
    beta: f64,
) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(Error::InvalidInput(format!(
            "displacement fraction needs omega > 0, got {omega}"
        )));
    }
    let (g_r, g_b) = (gradients.d_r[site], gradients.d_b[site]);
    let den = 2.0 * omega * g_r - b * g_b * coth_half(beta * omega);
    if den.abs() < SINGULAR_DENOMINATOR {
        return Err(Error::SingularFraction { site, omega });
    }
    Ok(2.0 * omega * g_r / den)
}

pub fn site_fractions(
    gradients: &BoundGradients,
    state: &RenormalizationState,
    beta: f64,
) -> Vec<SiteFraction> {
    (0..state.n_sites())
        .map(|n| SiteFraction::from_gradients(gradients.d_r[n], gradients.d_b[n], state.b[n], beta))
        .collect()
}

/// Evaluates B_n = exp[-1/2 int F^2 J coth / omega^2] and R_n = int (J/omega) F (F - 2).
pub fn renormalization_from_fractions(
    baths: &BathSpec,
    fractions: &[SiteFraction],
) -> Result<RenormalizationState> {
    let beta = baths.beta();
    let mut b = Vec::with_capacity(fractions.len());
    let mut r = Vec::with_capacity(fractions.len());
    for (n, frac) in fractions.iter().enumerate() {
        let j = baths.site(n);
        if matches!(frac, SiteFraction::Zero) {
            b.push(1.0);
            r.push(0.0);
            continue;
        }
        if let Some(omega) = frac.singular_frequency() {
            return Err(Error::SingularFraction { site: n, omega });
        }
        let exponent = integrate_over_spectrum(j, |w| {
            let f = frac.value(w);
            f * f * j.value(w) * coth_half(beta * w) / (w * w)
        })
        .map_err(|e| site_error(e, n))?;
        let shift = integrate_over_spectrum(j, |w| {
            let f = frac.value(w);
            j.value(w) / w * f * (f - 2.0)
        })
        .map_err(|e| site_error(e, n))?;
        b.push((-0.5 * exponent.value).exp());
        r.push(shift.value);
    }
    Ok(RenormalizationState { b, r })
}

fn site_error(e: Error, site: usize) -> Error {
    match e {
        Error::Integrability(msg) => Error::Integrability(format!("site {}: {msg}", site + 1)),
        other => other,
    }
}

/// Displacement frame handed to the master equation: renormalization plus F_n.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub state: RenormalizationState,
    pub fractions: Vec<SiteFraction>,
    /// Inverse temperature in cm.
    pub beta: f64,
}

impl Frame {
    /// F = 0: the untransformed (weak-coupling) frame.
    pub fn weak(n_sites: usize, beta: f64) -> Self {
        Frame {
            state: RenormalizationState::weak(n_sites),
            fractions: vec![SiteFraction::Zero; n_sites],
            beta,
        }
    }

    /// F = 1: the fully displaced polaron frame.
    pub fn polaron(baths: &BathSpec) -> Result<Self> {
        baths.check_infrared()?;
        Ok(Frame {
            state: RenormalizationState::polaron(baths)?,
            fractions: vec![SiteFraction::One; baths.n_sites()],
            beta: baths.beta(),
        })
    }

    pub fn n_sites(&self) -> usize {
        self.state.n_sites()
    }
}

/// One evaluation of the self-consistency map at `state`.
#[derive(Clone, Debug)]
pub struct FixedPointImage {
    pub image: RenormalizationState,
    pub gradients: BoundGradients,
    pub fractions: Vec<SiteFraction>,
}

pub fn fixed_point_image(
    net: &SiteNetwork,
    baths: &BathSpec,
    state: &RenormalizationState,
) -> Result<FixedPointImage> {
    let beta = baths.beta();
    let gradients = bound_gradients(net, state, beta);
    let fractions = site_fractions(&gradients, state, beta);
    let image = renormalization_from_fractions(baths, &fractions)?;
    Ok(FixedPointImage {
        image,
        gradients,
        fractions,
    })
}

/// Damped update state + mixing (map(state) - state).
pub fn self_consistency_step(
    net: &SiteNetwork,
    baths: &BathSpec,
    state: &RenormalizationState,
    mixing: f64,
) -> Result<RenormalizationState> {
    if !(mixing > 0.0 && mixing <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "mixing must lie in (0, 1], got {mixing}"
        )));
    }
    let out = fixed_point_image(net, baths, state)?;
    Ok(state.mix_towards(&out.image, mixing))
}
