//! Spectral densities J(omega) and thermal factors.
//!
//! All frequencies in this module are wavenumbers (cm^-1); J has units of cm^-1.

use crate::error::{Error, Result};
use crate::model::quad::{self, Estimate, Tolerance};

/// Default prefactors and cutoffs of the smooth two-term FMO density.
pub const FMO_C1: f64 = 3.053e-5;
pub const FMO_C2: f64 = 1.908e-5;
pub const FMO_OMEGA_1: f64 = 0.575;
pub const FMO_OMEGA_2: f64 = 2.0;

/// Low-frequency exponent at or below which polaron-type integrals diverge
/// at finite temperature (the integrand J coth / omega^2 behaves as omega^(s-3)).
pub const INFRARED_EXPONENT_LIMIT: f64 = 2.0;

#[derive(Clone, Debug, PartialEq)]
pub enum SpectralDensityFamily {
    /// (lambda / 2) (omega / omega_c)^3 exp(-omega / omega_c)
    CubicExponential { lambda: f64, omega_c: f64 },
    /// Two stretched-exponential terms; `eta` scales the overall coupling.
    FmoSmooth {
        eta: f64,
        omega_1: f64,
        omega_2: f64,
        c_1: f64,
        c_2: f64,
    },
    Tabulated(TabulatedDensity),
}

impl SpectralDensityFamily {
    pub fn cubic(lambda: f64, omega_c: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "reorganization energy must be finite and >= 0, got {lambda}"
            )));
        }
        if !(omega_c.is_finite() && omega_c > 0.0) {
            return Err(Error::InvalidInput(format!(
                "cutoff frequency must be positive, got {omega_c}"
            )));
        }
        Ok(SpectralDensityFamily::CubicExponential { lambda, omega_c })
    }

    /// FMO smooth density with the default constants.
    pub fn fmo(eta: f64) -> Result<Self> {
        Self::fmo_with(eta, FMO_OMEGA_1, FMO_OMEGA_2, FMO_C1, FMO_C2)
    }

    pub fn fmo_with(eta: f64, omega_1: f64, omega_2: f64, c_1: f64, c_2: f64) -> Result<Self> {
        let finite_nonneg = |x: f64| x.is_finite() && x >= 0.0;
        if !(finite_nonneg(eta) && finite_nonneg(c_1) && finite_nonneg(c_2)) {
            return Err(Error::InvalidInput(
                "FMO density: eta, c_1, c_2 must be finite and >= 0".into(),
            ));
        }
        if !(omega_1.is_finite() && omega_1 > 0.0 && omega_2.is_finite() && omega_2 > 0.0) {
            return Err(Error::InvalidInput(
                "FMO density: omega_1 and omega_2 must be positive".into(),
            ));
        }
        Ok(SpectralDensityFamily::FmoSmooth {
            eta,
            omega_1,
            omega_2,
            c_1,
            c_2,
        })
    }

    /// J(omega); rejects negative frequencies.
    pub fn evaluate(&self, omega: f64) -> Result<f64> {
        if omega < 0.0 || omega.is_nan() {
            return Err(Error::NegativeFrequency(omega));
        }
        Ok(self.value(omega))
    }

    /// J(omega) for omega >= 0 without the sign check. Used in integrands.
    #[inline]
    pub fn value(&self, omega: f64) -> f64 {
        if omega <= 0.0 {
            return 0.0;
        }
        match *self {
            SpectralDensityFamily::CubicExponential { lambda, omega_c } => {
                let x = omega / omega_c;
                0.5 * lambda * x * x * x * (-x).exp()
            }
            SpectralDensityFamily::FmoSmooth {
                eta,
                omega_1,
                omega_2,
                c_1,
                c_2,
            } => {
                let w5 = omega.powi(5);
                let t1 = c_1 * w5 / omega_1.powi(4) * (-(omega / omega_1).sqrt()).exp();
                let t2 = c_2 * w5 / omega_2.powi(4) * (-(omega / omega_2).sqrt()).exp();
                eta * (t1 + t2)
            }
            SpectralDensityFamily::Tabulated(ref tab) => tab.value(omega),
        }
    }

    /// Frequency near the bulk of J(omega)/omega; sets the first quadrature panel.
    pub fn characteristic_frequency(&self) -> f64 {
        match *self {
            SpectralDensityFamily::CubicExponential { omega_c, .. } => omega_c,
            // omega^4 exp(-sqrt(omega/w)) peaks at omega = 64 w
            SpectralDensityFamily::FmoSmooth {
                omega_1, omega_2, ..
            } => 64.0 * omega_1.max(omega_2),
            SpectralDensityFamily::Tabulated(ref tab) => tab.peak_frequency(),
        }
    }

    /// Length over which the density varies appreciably; bounds quadrature panel widths.
    pub fn smoothness_scale(&self) -> f64 {
        match *self {
            SpectralDensityFamily::CubicExponential { omega_c, .. } => 0.5 * omega_c,
            SpectralDensityFamily::FmoSmooth {
                omega_1, omega_2, ..
            } => 16.0 * omega_1.min(omega_2),
            SpectralDensityFamily::Tabulated(ref tab) => tab.min_spacing(),
        }
    }

    /// Exponent s of the low-frequency behaviour J ~ omega^s, if known.
    pub fn low_frequency_exponent(&self) -> Option<f64> {
        match *self {
            SpectralDensityFamily::CubicExponential { .. } => Some(3.0),
            SpectralDensityFamily::FmoSmooth { .. } => Some(5.0),
            SpectralDensityFamily::Tabulated(ref tab) => tab.low_exponent,
        }
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            SpectralDensityFamily::CubicExponential { lambda, .. } => lambda == 0.0,
            SpectralDensityFamily::FmoSmooth { eta, c_1, c_2, .. } => {
                eta == 0.0 || (c_1 == 0.0 && c_2 == 0.0)
            }
            SpectralDensityFamily::Tabulated(ref tab) => tab.values.iter().all(|&v| v == 0.0),
        }
    }

    /// Rejects densities whose low-frequency behaviour makes the displacement
    /// integrals diverge (Ohmic and sub-Ohmic, and anything with s <= 2).
    pub fn check_infrared(&self) -> Result<()> {
        match self.low_frequency_exponent() {
            Some(s) if s <= INFRARED_EXPONENT_LIMIT && !self.is_zero() => {
                Err(Error::InfraredDivergence(format!(
                    "low-frequency exponent {s:.3} <= {INFRARED_EXPONENT_LIMIT}; \
                     polaron and variational frames need a super-Ohmic density"
                )))
            }
            _ => Ok(()),
        }
    }
}

/// Spectral density given on a grid, interpolated by monotone piecewise cubics.
///
/// Below the first positive knot the density follows the power law fitted to
/// the first two positive knots; above the last knot it is zero.
#[derive(Clone, Debug, PartialEq)]
pub struct TabulatedDensity {
    omega: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
    low_exponent: Option<f64>,
}

impl TabulatedDensity {
    pub fn new(omega: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if omega.len() != values.len() {
            return Err(Error::InvalidInput(format!(
                "tabulated density: {} frequencies but {} values",
                omega.len(),
                values.len()
            )));
        }
        let (mut omega, mut values) = (omega, values);
        if omega.first() == Some(&0.0) {
            if values[0] != 0.0 {
                return Err(Error::InvalidInput(
                    "tabulated density must vanish at omega = 0".into(),
                ));
            }
            omega.remove(0);
            values.remove(0);
        }
        if omega.len() < 2 {
            return Err(Error::InvalidInput(
                "tabulated density needs at least two positive frequencies".into(),
            ));
        }
        for (i, (&w, &j)) in omega.iter().zip(&values).enumerate() {
            if !(w.is_finite() && w > 0.0 && j.is_finite() && j >= 0.0) {
                return Err(Error::InvalidInput(format!(
                    "tabulated density: bad point {i} ({w}, {j})"
                )));
            }
            if i > 0 && omega[i - 1] >= w {
                return Err(Error::InvalidInput(
                    "tabulated density: frequencies must be strictly increasing".into(),
                ));
            }
        }
        let slopes = pchip_slopes(&omega, &values);
        let low_exponent = if values[0] > 0.0 && values[1] > 0.0 {
            Some((values[1] / values[0]).ln() / (omega[1] / omega[0]).ln())
        } else {
            None
        };
        Ok(TabulatedDensity {
            omega,
            values,
            slopes,
            low_exponent,
        })
    }

    pub fn knots(&self) -> (&[f64], &[f64]) {
        (&self.omega, &self.values)
    }

    fn value(&self, w: f64) -> f64 {
        let n = self.omega.len();
        if w < self.omega[0] {
            return match self.low_exponent {
                Some(s) => self.values[0] * (w / self.omega[0]).powf(s),
                // first knot is zero: the density vanishes below it
                None => 0.0,
            };
        }
        if w > self.omega[n - 1] {
            return 0.0;
        }
        let k = match self.omega.binary_search_by(|x| x.total_cmp(&w)) {
            Ok(i) => return self.values[i],
            Err(i) => i - 1,
        };
        let (x0, x1) = (self.omega[k], self.omega[k + 1]);
        let h = x1 - x0;
        let t = (w - x0) / h;
        let (y0, y1) = (self.values[k], self.values[k + 1]);
        let (d0, d1) = (self.slopes[k], self.slopes[k + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        (h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1).max(0.0)
    }

    fn peak_frequency(&self) -> f64 {
        let (i, _) = self
            .values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("at least two knots");
        self.omega[i]
    }

    fn min_spacing(&self) -> f64 {
        let span = self.omega[self.omega.len() - 1];
        self.omega
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(span, f64::min)
            .max(span * 1e-4)
    }
}

/// Fritsch-Carlson monotone slopes.
fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
    let mut d = vec![0.0; n];
    if n == 2 {
        d[0] = delta[0];
        d[1] = delta[0];
        return d;
    }
    for k in 1..n - 1 {
        if delta[k - 1] * delta[k] <= 0.0 {
            d[k] = 0.0;
        } else {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
        }
    }
    let end = |h0: f64, h1: f64, d0: f64, d1: f64| {
        let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if s * d0 <= 0.0 {
            0.0
        } else if d0 * d1 <= 0.0 && s.abs() > 3.0 * d0.abs() {
            3.0 * d0
        } else {
            s
        }
    };
    d[0] = end(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

/// coth(x / 2) for x = beta * omega > 0, with a series for small x.
#[inline]
pub fn coth_half(x: f64) -> f64 {
    if x < 1e-2 {
        // 2/x + x/6 - x^3/360 ; next term is O(x^5)
        2.0 / x + x / 6.0 - x * x * x / 360.0
    } else if x > 80.0 {
        1.0
    } else {
        1.0 / (0.5 * x).tanh()
    }
}

/// coth(beta omega / 2). Returns +inf at omega = 0; callers never hit that
/// point because every integrand carries the omega -> 0 limit analytically.
pub fn coth_factor(omega: f64, beta: f64) -> f64 {
    let x = beta * omega;
    if x == 0.0 {
        f64::INFINITY
    } else {
        coth_half(x)
    }
}

/// Engine tolerance for non-oscillatory frequency integrals.
pub fn default_tolerance() -> Tolerance {
    Tolerance {
        rel: 1e-12,
        abs: 1e-300,
        max_subdivisions: 400,
    }
}

/// Integrate `g(omega)` over (0, inf) using the density's natural scale.
pub fn integrate_over_spectrum<F: Fn(f64) -> f64>(
    family: &SpectralDensityFamily,
    g: F,
) -> Result<Estimate> {
    if family.is_zero() {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
        });
    }
    quad::integrate_semi_infinite(g, family.characteristic_frequency(), &default_tolerance())
}

/// lambda = int J(omega) / omega d omega.
pub fn reorganization_energy(family: &SpectralDensityFamily) -> Result<f64> {
    if let Some(s) = family.low_frequency_exponent() {
        if s <= 0.0 && !family.is_zero() {
            return Err(Error::Integrability(format!(
                "J(omega)/omega is not integrable at omega = 0 (exponent {s:.3})"
            )));
        }
    }
    integrate_over_spectrum(family, |w| family.value(w) / w).map(|e| e.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_at_cutoff() {
        let j = SpectralDensityFamily::cubic(60.0, 200.0).unwrap();
        let v = j.evaluate(200.0).unwrap();
        assert!((v - 30.0 * (-1f64).exp()).abs() < 1e-12);
        assert!((v - 11.036).abs() < 1e-3);
    }

    #[test]
    fn zero_frequency_vanishes() {
        for j in [
            SpectralDensityFamily::cubic(60.0, 200.0).unwrap(),
            SpectralDensityFamily::fmo(1.0).unwrap(),
            SpectralDensityFamily::Tabulated(
                TabulatedDensity::new(vec![1.0, 2.0, 3.0], vec![1.0, 8.0, 27.0]).unwrap(),
            ),
        ] {
            assert_eq!(j.evaluate(0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn negative_frequency_rejected() {
        let j = SpectralDensityFamily::cubic(60.0, 200.0).unwrap();
        assert!(matches!(j.evaluate(-1.0), Err(Error::NegativeFrequency(_))));
    }

    #[test]
    fn fmo_at_fifty_wavenumbers() {
        // Reference from an independent 50-digit evaluation of the two-term formula.
        let j = SpectralDensityFamily::fmo(1.0).unwrap();
        let v = j.evaluate(50.0).unwrap();
        let reference = 10.292_889_592_874_077;
        assert!(((v - reference) / reference).abs() < 1e-13, "{v}");
    }

    #[test]
    fn cubic_reorganization_is_lambda() {
        for &(l, wc) in &[(60.0, 200.0), (180.0, 200.0), (1e-3, 50.0), (2.0, 1000.0)] {
            let j = SpectralDensityFamily::cubic(l, wc).unwrap();
            let r = reorganization_energy(&j).unwrap();
            assert!(((r - l) / l).abs() < 1e-8, "{l} {wc} -> {r}");
        }
    }

    #[test]
    fn zero_density_has_zero_reorganization() {
        let j = SpectralDensityFamily::cubic(0.0, 200.0).unwrap();
        assert_eq!(reorganization_energy(&j).unwrap(), 0.0);
    }

    #[test]
    fn coth_values() {
        assert!((coth_half(2.0) - 1.313_035_285_499_331_3).abs() < 1e-14);
        assert_eq!(coth_half(1e3), 1.0);
        let x = 1e-6;
        let approx = 2.0 / x + x / 6.0;
        assert!(((coth_half(x) - approx) / approx).abs() < 1e-12);
    }

    #[test]
    fn coth_series_matches_direct_at_switch() {
        let x: f64 = 1e-2 * (1.0 - 1e-12);
        let direct = 1.0 / (0.5 * x).tanh();
        assert!(((coth_half(x) - direct) / direct).abs() < 1e-14);
    }

    #[test]
    fn tabulated_low_frequency_power_law() {
        let w: Vec<f64> = (1..=20).map(|k| k as f64 * 10.0).collect();
        let j: Vec<f64> = w.iter().map(|&x| x.powi(3) * (-x / 100.0).exp()).collect();
        let tab = TabulatedDensity::new(w, j).unwrap();
        let s = tab.low_exponent.unwrap();
        assert!((s - 2.9).abs() < 0.2, "{s}");
        let fam = SpectralDensityFamily::Tabulated(tab);
        assert!(fam.check_infrared().is_ok());
        assert_eq!(fam.value(500.0), 0.0);
    }

    #[test]
    fn ohmic_tabulated_is_rejected() {
        let w: Vec<f64> = (1..=20).map(|k| k as f64).collect();
        let j: Vec<f64> = w.iter().map(|&x| x * (-x / 10.0).exp()).collect();
        let fam = SpectralDensityFamily::Tabulated(TabulatedDensity::new(w, j).unwrap());
        assert!(matches!(
            fam.check_infrared(),
            Err(Error::InfraredDivergence(_))
        ));
    }

    #[test]
    fn pchip_does_not_overshoot() {
        let w = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let j = vec![0.0, 0.0, 5.0, 5.0, 0.0];
        let fam = SpectralDensityFamily::Tabulated(TabulatedDensity::new(w, j).unwrap());
        for k in 0..=400 {
            let x = 1.0 + k as f64 * 0.01;
            let v = fam.value(x);
            assert!((0.0..=5.0 + 1e-12).contains(&v), "{x} -> {v}");
        }
    }
}

#[cfg(test)]
mod fmo_reorganization {
    use super::*;

    #[test]
    fn fmo_reorganization_matches_reference() {
        // 40-digit quadrature of J/omega (equivalently 2 * 9! * (c1 w1 + c2 w2)).
        let reference = 40.435_536_96;
        let j = SpectralDensityFamily::fmo(1.0).unwrap();
        let r = reorganization_energy(&j).unwrap();
        assert!(((r - reference) / reference).abs() < 1e-9, "{r}");
        let j2 = SpectralDensityFamily::fmo(2.0).unwrap();
        let r2 = reorganization_energy(&j2).unwrap();
        assert!(((r2 - 2.0 * r) / r).abs() < 1e-12);
    }
}
