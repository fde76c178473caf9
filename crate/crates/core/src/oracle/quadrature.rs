//! Tanh-sinh (double exponential) quadrature, used as a reference that shares
//! no nodes with the Gauss rules of the engine.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::model::quad::Estimate;

/// Step-size halvings before giving up.
const MAX_LEVEL: u32 = 12;
/// Abscissae are generated for |u| <= U_MAX; beyond it the weights are below 1e-40.
const U_MAX: f64 = 3.5;
/// Panels contributing less than this fraction of the accumulated |f| mass end the half-line sum.
const TAIL_FRACTION: f64 = 1e-17;
const MAX_PANELS: usize = 200_000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Domain {
    Finite(f64, f64),
    /// [0, inf) split into panels of the given width.
    SemiInfinite { panel: f64 },
}

/// Node pair (a + d, b - d) and weight for the substitution x = c + r tanh(pi/2 sinh u).
#[inline]
fn abscissa(u: f64, r: f64) -> (f64, f64) {
    let v = FRAC_PI_2 * u.sinh();
    let e = (-2.0 * v).exp();
    // distance from the nearest endpoint, without cancellation
    let d = r * 2.0 * e / (1.0 + e);
    let w = r * FRAC_PI_2 * u.cosh() * 4.0 * e / ((1.0 + e) * (1.0 + e));
    (d, w)
}

/// Fixed tanh-sinh rule of step 2^-level on [a, b].
pub fn tanh_sinh_rule(a: f64, b: f64, level: u32) -> Vec<(f64, f64)> {
    let r = 0.5 * (b - a);
    let c = 0.5 * (a + b);
    let h = 0.5f64.powi(level as i32);
    let k_max = (U_MAX / h) as i64;
    let mut out = vec![(c, h * r * FRAC_PI_2)];
    for k in 1..=k_max {
        let (d, w) = abscissa(k as f64 * h, r);
        if d == 0.0 {
            break;
        }
        out.push((a + d, h * w));
        out.push((b - d, h * w));
    }
    out
}

/// Adaptive tanh-sinh on [a, b]. Returns the estimate and the integral of |f|.
///
/// The error estimate is the change between the last two levels, which is
/// pessimistic for analytic integrands (the error roughly squares per level).
pub fn tanh_sinh<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<(Estimate, f64)> {
    if a == b {
        return Ok((Estimate { value: 0.0, error: 0.0 }, 0.0));
    }
    let r = 0.5 * (b - a);
    let c = 0.5 * (a + b);
    let eval = |u: f64| -> Result<(f64, f64)> {
        let (d, w) = abscissa(u, r);
        if d == 0.0 {
            return Ok((0.0, 0.0));
        }
        let (fl, fr) = (f(a + d), f(b - d));
        if !(fl.is_finite() && fr.is_finite()) {
            return Err(Error::Oracle(format!(
                "non-finite integrand near x = {:e} or {:e}",
                a + d,
                b - d
            )));
        }
        Ok((w * (fl + fr), w * (fl.abs() + fr.abs())))
    };
    let f0 = f(c);
    if !f0.is_finite() {
        return Err(Error::Oracle(format!("non-finite integrand at x = {c:e}")));
    }
    let mut sum = r * FRAC_PI_2 * f0;
    let mut abs_sum = sum.abs();
    for k in 1..=(U_MAX as i64) {
        let (s, a_s) = eval(k as f64)?;
        sum += s;
        abs_sum += a_s;
    }
    let mut h = 1.0;
    let mut prev = h * sum;
    for level in 1..=MAX_LEVEL {
        h *= 0.5;
        let mut k = 1;
        while (k as f64) * h <= U_MAX {
            let (s, a_s) = eval(k as f64 * h)?;
            sum += s;
            abs_sum += a_s;
            k += 2;
        }
        let value = h * sum;
        let error = (value - prev).abs();
        let mass = h * abs_sum;
        if level >= 3 && error <= (tol * value.abs()).max(1e-15 * mass) {
            return Ok((Estimate { value, error }, mass));
        }
        prev = value;
    }
    Err(Error::Oracle(format!(
        "tanh-sinh on [{a:e}, {b:e}] missed relative tolerance {tol:e} (last change {:e})",
        (h * sum - prev).abs()
    )))
}

/// Reference integral of `f` over `domain` to relative tolerance `tol`.
///
/// On the half line, panels are summed until three in a row carry less than
/// 1e-17 of the accumulated |f| mass. An integrand that is zero everywhere
/// never terminates and is reported as an error.
pub fn reference_quadrature<F: Fn(f64) -> f64>(f: F, domain: Domain, tol: f64) -> Result<Estimate> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    match domain {
        Domain::Finite(a, b) => {
            if !(a.is_finite() && b.is_finite()) {
                return Err(Error::InvalidInput("finite domain needs finite limits".into()));
            }
            tanh_sinh(&f, a, b, tol).map(|(e, _)| e)
        }
        Domain::SemiInfinite { panel } => {
            if !(panel > 0.0 && panel.is_finite()) {
                return Err(Error::InvalidInput(format!("panel width must be positive, got {panel}")));
            }
            let mut total = Estimate { value: 0.0, error: 0.0 };
            let mut mass = 0.0;
            let mut quiet = 0;
            for k in 0..MAX_PANELS {
                let (est, m) = tanh_sinh(&f, k as f64 * panel, (k + 1) as f64 * panel, tol)?;
                total.value += est.value;
                total.error += est.error;
                mass += m;
                if mass > 0.0 && m <= TAIL_FRACTION * mass {
                    quiet += 1;
                    if quiet >= 3 {
                        return Ok(total);
                    }
                } else {
                    quiet = 0;
                }
            }
            Err(Error::Oracle(format!(
                "integrand has not decayed after {MAX_PANELS} panels of width {panel:e}"
            )))
        }
    }
}
