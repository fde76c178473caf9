//! Adaptive Gauss-Kronrod quadrature (10-point Gauss / 21-point Kronrod)
//! on finite and semi-infinite intervals.

use crate::error::{Error, Result};

/// Kronrod abscissae on [-1, 1], descending, last one is the centre.
pub(crate) const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_980_569_514,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// 10-point Gauss weights, paired with `XGK[1], XGK[3], ..., XGK[9]`.
pub(crate) const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Nodes and weights of the 10-point Gauss-Legendre rule mapped to [a, b].
pub fn gauss_legendre_10(a: f64, b: f64) -> [(f64, f64); 10] {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut out = [(0.0, 0.0); 10];
    for (k, &w) in WG.iter().enumerate() {
        let x = XGK[2 * k + 1];
        out[2 * k] = (c - h * x, h * w);
        out[2 * k + 1] = (c + h * x, h * w);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
    /// Maximum number of interval bisections per finite panel.
    pub max_subdivisions: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            rel: 1e-12,
            abs: 1e-300,
            max_subdivisions: 200,
        }
    }
}

fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<(f64, f64)> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[10];
    let mut gauss = 0.0;
    for k in 0..10 {
        let dx = h * XGK[k];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[k] * s;
        if k % 2 == 1 {
            gauss += WG[k / 2] * s;
        }
    }
    let value = kronrod * h;
    if !value.is_finite() {
        return Err(Error::Integrability(format!(
            "non-finite integrand on [{a:e}, {b:e}]"
        )));
    }
    let err = ((kronrod - gauss) * h).abs();
    Ok((value, err))
}

/// Adaptive bisection on a finite interval.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: &Tolerance) -> Result<Estimate> {
    if a == b {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
        });
    }
    let (v, e) = gk21(&f, a, b)?;
    let mut intervals = vec![(a, b, v, e)];
    let mut total = v;
    let mut total_err = e;
    for _ in 0..tol.max_subdivisions {
        if total_err <= tol.abs.max(tol.rel * total.abs()) {
            return Ok(Estimate {
                value: total,
                error: total_err,
            });
        }
        let (idx, _) = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, v0, e0) = intervals.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // interval exhausted at double precision
            intervals.push((lo, hi, v0, 0.0));
            total_err -= e0;
            continue;
        }
        let (v1, e1) = gk21(&f, lo, mid)?;
        let (v2, e2) = gk21(&f, mid, hi)?;
        total += v1 + v2 - v0;
        total_err += e1 + e2 - e0;
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
    }
    // recompute from scratch to shed accumulated rounding
    total = intervals.iter().map(|x| x.2).sum();
    total_err = intervals.iter().map(|x| x.3).sum();
    if total_err <= tol.abs.max(tol.rel * total.abs()) * 10.0 {
        Ok(Estimate {
            value: total,
            error: total_err,
        })
    } else {
        Err(Error::Integrability(format!(
            "adaptive quadrature on [{a:e}, {b:e}] stalled: estimate {total:e} +/- {total_err:e}"
        )))
    }
}

/// Relative size of a panel below which the remaining tail is treated as negligible.
pub const TAIL_FRACTION: f64 = 1e-13;

/// Integrate over [0, inf) with geometrically growing panels.
///
/// The first panel is [0, scale]; panel k covers [scale 2^(k-1), scale 2^k].
/// Integration stops once two consecutive panels each contribute less than
/// `TAIL_FRACTION` of the accumulated value (the integrands used here decay
/// at least like a stretched exponential).
pub fn integrate_semi_infinite<F: Fn(f64) -> f64>(
    f: F,
    scale: f64,
    tol: &Tolerance,
) -> Result<Estimate> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "semi-infinite quadrature scale must be positive, got {scale}"
        )));
    }
    let first = integrate(&f, 0.0, scale, tol)?;
    let mut total = first.value;
    let mut error = first.error;
    let mut lo = scale;
    let mut quiet = 0;
    for _ in 0..48 {
        let hi = 2.0 * lo;
        let panel = integrate(&f, lo, hi, tol)?;
        total += panel.value;
        error += panel.error;
        lo = hi;
        if panel.value.abs() <= TAIL_FRACTION * total.abs() + tol.abs {
            quiet += 1;
            if quiet >= 2 && lo >= 8.0 * scale {
                return Ok(Estimate {
                    value: total,
                    error: error + panel.value.abs(),
                });
            }
        } else {
            quiet = 0;
        }
    }
    Err(Error::Integrability(format!(
        "tail does not decay up to omega = {lo:e} (accumulated {total:e})"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_weights_sum_to_two() {
        let s: f64 = WG.iter().sum::<f64>() * 2.0;
        assert!((s - 2.0).abs() < 1e-14);
        let k: f64 = WGK[..10].iter().sum::<f64>() * 2.0 + WGK[10];
        assert!((k - 2.0).abs() < 1e-14);
    }

    #[test]
    fn gauss_legendre_exact_for_degree_19() {
        let r = gauss_legendre_10(0.0, 2.0);
        let v: f64 = r.iter().map(|&(x, w)| w * x.powi(19)).sum();
        let exact = 2f64.powi(20) / 20.0;
        assert!(((v - exact) / exact).abs() < 1e-13);
    }

    #[test]
    fn polynomial_times_exponential() {
        let est = integrate_semi_infinite(|x| x * x * (-x).exp(), 1.0, &Tolerance::default())
            .unwrap();
        assert!((est.value - 2.0).abs() < 1e-12, "{}", est.value);
    }

    #[test]
    fn finite_interval_sine() {
        let est = integrate(f64::sin, 0.0, std::f64::consts::PI, &Tolerance::default()).unwrap();
        assert!((est.value - 2.0).abs() < 1e-13);
    }

    #[test]
    fn divergent_tail_is_reported() {
        let r = integrate_semi_infinite(|x| 1.0 / (1.0 + x), 1.0, &Tolerance::default());
        assert!(matches!(r, Err(Error::Integrability(_))));
    }
}
