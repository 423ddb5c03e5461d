//! Adaptive Gauss–Kronrod (7/15) quadrature on finite intervals.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("quadrature did not reach tolerance {tol:e} within {max_intervals} intervals (estimate {estimate}, error {error:e})")]
    NotConverged {
        tol: f64,
        max_intervals: usize,
        estimate: f64,
        error: f64,
    },
    #[error("integrand returned a non-finite value")]
    NonFinite,
}

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the odd-indexed Kronrod nodes (the 7-point rule).
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// One 15-point Kronrod evaluation on `[a, b]`, returning `(estimate, error)`.
///
/// The error is the difference to the embedded 7-point Gauss rule. Endpoints
/// are never evaluated.
pub fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Globally adaptive integration of `f` over `[a, b]` to absolute tolerance
/// `tol`, bisecting the interval with the largest error estimate first.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64, QuadratureError> {
    integrate_with_limit(f, a, b, tol, 4000)
}

pub fn integrate_with_limit<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    tol: f64,
    max_intervals: usize,
) -> Result<f64, QuadratureError> {
    if a == b {
        return Ok(0.0);
    }
    let (v, e) = gk15(&f, a, b);
    if !v.is_finite() || !e.is_finite() {
        return Err(QuadratureError::NonFinite);
    }
    // (lo, hi, value, error)
    let mut intervals: Vec<(f64, f64, f64, f64)> = vec![(a, b, v, e)];
    let mut total = v;
    let mut total_err = e;
    while total_err > tol {
        if intervals.len() >= max_intervals {
            return Err(QuadratureError::NotConverged {
                tol,
                max_intervals,
                estimate: total,
                error: total_err,
            });
        }
        let worst = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let (lo, hi, pv, pe) = intervals.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // Interval cannot be split further in floating point; accept it.
            intervals.push((lo, hi, pv, 0.0));
            total_err -= pe;
            continue;
        }
        let (lv, le) = gk15(&f, lo, mid);
        let (rv, re) = gk15(&f, mid, hi);
        if !(lv.is_finite() && rv.is_finite() && le.is_finite() && re.is_finite()) {
            return Err(QuadratureError::NonFinite);
        }
        total += lv + rv - pv;
        total_err += le + re - pe;
        intervals.push((lo, mid, lv, le));
        intervals.push((mid, hi, rv, re));
    }
    // Re-sum to shed the drift accumulated by incremental updates.
    Ok(intervals.iter().map(|iv| iv.2).sum())
}
