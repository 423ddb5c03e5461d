//! One-dimensional reward distributions.
//!
//! Every family lives on `[0, ∞)` and is sampled exclusively by inverse
//! transform, so two engines fed the same uniform stream see the same draws.
//! Besides CDF/quantile/sampling, this module decides the monotone hazard rate
//! property, checks first-order stochastic dominance on a grid, and computes
//! expected order statistics by quadrature on the quantile scale.

mod parse;

pub use parse::ParseError;

use thiserror::Error;

use crate::quadrature::{self, QuadratureError};
use crate::rng::UniformSource;

/// Absolute tolerance promised by [`expected_order_statistic`].
pub const ORDER_STAT_TOL: f64 = 1e-8;

/// Strictness tolerance of [`fosd_check`].
pub const FOSD_TOL: f64 = 1e-12;

/// Grid size used by callers that do not pick one.
pub const DEFAULT_FOSD_GRID: usize = 10_000;

const HAZARD_GRID: usize = 256;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistributionError {
    #[error("invalid parameter {param} = {value}: {reason}")]
    InvalidParameter {
        param: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("empirical distribution needs at least one finite nonnegative value")]
    EmptySample,
    #[error("monotone hazard rate is undecidable analytically for empirical distributions")]
    MhrUndecidable,
    #[error("expectation diverges: {0}")]
    Divergent(&'static str),
    #[error("order statistic rank {j} out of range for {n} draws")]
    BadRank { n: usize, j: usize },
    #[error("grid size must be at least 2, got {0}")]
    GridTooSmall(usize),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// A parametric reward distribution.
///
/// Construct through the checked constructors or by parsing a spec string such
/// as `exp(rate=1)`; `Display` writes the canonical spec string back.
#[derive(Debug, Clone, PartialEq)]
pub enum DistributionSpec {
    PointMass { at: f64 },
    Uniform { lo: f64, hi: f64 },
    Exponential { rate: f64 },
    /// Shape restricted to `>= 1`, the MHR range.
    Weibull { shape: f64, scale: f64 },
    /// CDF `1 - 1/x` on `[1, cap)` with an atom of mass `1/cap` at `cap`.
    /// An infinite cap is the untruncated equal-revenue distribution.
    EqualRevenueTruncated { cap: f64 },
    /// Sorted nonnegative sample, each point with mass `1/len`.
    Empirical { values: Vec<f64> },
}

fn check(ok: bool, param: &'static str, value: f64, reason: &'static str) -> Result<(), DistributionError> {
    if ok {
        Ok(())
    } else {
        Err(DistributionError::InvalidParameter { param, value, reason })
    }
}

impl DistributionSpec {
    pub fn point_mass(at: f64) -> Result<Self, DistributionError> {
        check(at.is_finite() && at >= 0.0, "a", at, "must be finite and >= 0")?;
        Ok(Self::PointMass { at })
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self, DistributionError> {
        check(lo.is_finite() && lo >= 0.0, "a", lo, "must be finite and >= 0")?;
        check(hi.is_finite() && hi > lo, "b", hi, "must be finite and > a")?;
        Ok(Self::Uniform { lo, hi })
    }

    pub fn exponential(rate: f64) -> Result<Self, DistributionError> {
        check(rate.is_finite() && rate > 0.0, "rate", rate, "must be finite and > 0")?;
        Ok(Self::Exponential { rate })
    }

    pub fn weibull(shape: f64, scale: f64) -> Result<Self, DistributionError> {
        check(shape.is_finite() && shape >= 1.0, "shape", shape, "must be finite and >= 1")?;
        check(scale.is_finite() && scale > 0.0, "scale", scale, "must be finite and > 0")?;
        Ok(Self::Weibull { shape, scale })
    }

    pub fn equal_revenue(cap: f64) -> Result<Self, DistributionError> {
        check(cap > 1.0, "cap", cap, "must be > 1 (inf for untruncated)")?;
        Ok(Self::EqualRevenueTruncated { cap })
    }

    pub fn empirical(mut values: Vec<f64>) -> Result<Self, DistributionError> {
        if values.is_empty() {
            return Err(DistributionError::EmptySample);
        }
        for &v in &values {
            check(v.is_finite() && v >= 0.0, "values", v, "must be finite and >= 0")?;
        }
        values.sort_by(f64::total_cmp);
        Ok(Self::Empirical { values })
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            Self::PointMass { .. } => "point",
            Self::Uniform { .. } => "uniform",
            Self::Exponential { .. } => "exp",
            Self::Weibull { .. } => "weibull",
            Self::EqualRevenueTruncated { .. } => "equalrev",
            Self::Empirical { .. } => "empirical",
        }
    }

    /// Infimum of the support.
    pub fn support_min(&self) -> f64 {
        match self {
            Self::PointMass { at } => *at,
            Self::Uniform { lo, .. } => *lo,
            Self::Exponential { .. } | Self::Weibull { .. } => 0.0,
            Self::EqualRevenueTruncated { .. } => 1.0,
            Self::Empirical { values } => values[0],
        }
    }

    /// Supremum of the support (may be infinite).
    pub fn support_max(&self) -> f64 {
        match self {
            Self::PointMass { at } => *at,
            Self::Uniform { hi, .. } => *hi,
            Self::Exponential { .. } | Self::Weibull { .. } => f64::INFINITY,
            Self::EqualRevenueTruncated { cap } => *cap,
            Self::Empirical { values } => values[values.len() - 1],
        }
    }

    /// True when the distribution has no atoms.
    pub fn is_continuous(&self) -> bool {
        match self {
            Self::Uniform { .. } | Self::Exponential { .. } | Self::Weibull { .. } => true,
            Self::EqualRevenueTruncated { cap } => cap.is_infinite(),
            Self::PointMass { .. } | Self::Empirical { .. } => false,
        }
    }

    /// Quantile range `(0, u_max)` on which the quantile is continuous and
    /// strictly increasing. `None` for purely atomic families.
    pub fn continuous_quantile_range(&self) -> Option<f64> {
        match self {
            Self::Uniform { .. } | Self::Exponential { .. } | Self::Weibull { .. } => Some(1.0),
            Self::EqualRevenueTruncated { cap } => Some(1.0 - 1.0 / cap),
            Self::PointMass { .. } | Self::Empirical { .. } => None,
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Self::PointMass { at } => {
                if x >= *at {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            Self::Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-rate * x).exp_m1()
                }
            }
            Self::Weibull { shape, scale } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-(x / scale).powf(*shape)).exp_m1()
                }
            }
            Self::EqualRevenueTruncated { cap } => {
                if x < 1.0 {
                    0.0
                } else if x >= *cap {
                    1.0
                } else {
                    1.0 - 1.0 / x
                }
            }
            Self::Empirical { values } => {
                let count = values.partition_point(|&v| v <= x);
                count as f64 / values.len() as f64
            }
        }
    }

    /// Survival function `1 - F(x)`, computed without cancellation where the
    /// family allows it.
    pub fn survival(&self, x: f64) -> f64 {
        match self {
            Self::Exponential { rate } if x > 0.0 => (-rate * x).exp(),
            Self::Weibull { shape, scale } if x > 0.0 => (-(x / scale).powf(*shape)).exp(),
            Self::EqualRevenueTruncated { cap } if x >= 1.0 && x < *cap => 1.0 / x,
            _ => 1.0 - self.cdf(x),
        }
    }

    /// Density of the continuous part (0 for atomic families).
    pub fn pdf(&self, x: f64) -> f64 {
        match self {
            Self::PointMass { .. } | Self::Empirical { .. } => 0.0,
            Self::Uniform { lo, hi } => {
                if x >= *lo && x <= *hi {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            Self::Exponential { rate } => {
                if x < 0.0 {
                    0.0
                } else {
                    rate * (-rate * x).exp()
                }
            }
            Self::Weibull { shape, scale } => {
                if x < 0.0 {
                    0.0
                } else {
                    let z = x / scale;
                    shape / scale * z.powf(shape - 1.0) * (-z.powf(*shape)).exp()
                }
            }
            Self::EqualRevenueTruncated { cap } => {
                if x >= 1.0 && x < *cap {
                    1.0 / (x * x)
                } else {
                    0.0
                }
            }
        }
    }

    /// Generalized inverse `inf { x : F(x) >= u }` for `u` in `[0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match self {
            Self::PointMass { at } => *at,
            Self::Uniform { lo, hi } => lo + u * (hi - lo),
            Self::Exponential { rate } => -(-u).ln_1p() / rate,
            Self::Weibull { shape, scale } => scale * (-(-u).ln_1p()).powf(1.0 / shape),
            Self::EqualRevenueTruncated { cap } => {
                if u >= 1.0 - 1.0 / cap {
                    *cap
                } else {
                    1.0 / (1.0 - u)
                }
            }
            Self::Empirical { values } => {
                let m = values.len();
                let idx = ((u * m as f64).ceil() as usize).clamp(1, m) - 1;
                values[idx]
            }
        }
    }

    /// One draw by inverse transform of a single uniform.
    pub fn sample<S: UniformSource + ?Sized>(&self, rng: &mut S) -> f64 {
        self.quantile(rng.uniform())
    }

    /// Hazard rate `f(x) / (1 - F(x))` of the continuous part.
    pub fn hazard(&self, x: f64) -> f64 {
        match self {
            Self::Exponential { rate } => *rate,
            Self::Weibull { shape, scale } => {
                let z = (x / scale).max(0.0);
                shape / scale * z.powf(shape - 1.0)
            }
            Self::EqualRevenueTruncated { cap } => {
                if x >= 1.0 && x < *cap {
                    1.0 / x
                } else {
                    0.0
                }
            }
            _ => {
                let s = self.survival(x);
                if s > 0.0 {
                    self.pdf(x) / s
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// Expected value. Infinite-mean families are reported as divergent.
    pub fn mean(&self) -> Result<f64, DistributionError> {
        expected_order_statistic(self, 1, 1)
    }

    /// Whether every moment used by the auction model is finite.
    pub fn has_finite_mean(&self) -> bool {
        !matches!(self, Self::EqualRevenueTruncated { cap } if cap.is_infinite())
    }
}

/// Evaluated hazard rates, returned as evidence by [`is_mhr`].
#[derive(Debug, Clone, PartialEq)]
pub struct HazardProfile {
    /// `(x, h(x))` pairs in increasing `x`.
    pub points: Vec<(f64, f64)>,
    /// Whether the evaluated hazards are nondecreasing along the grid.
    pub monotone: bool,
}

impl HazardProfile {
    fn from_points(points: Vec<(f64, f64)>) -> Self {
        let monotone = points
            .windows(2)
            .all(|w| w[1].1 >= w[0].1 - 1e-12 * w[0].1.abs().max(1.0));
        Self { points, monotone }
    }
}

/// Hazard rates on a quantile-spaced grid of the continuous part.
///
/// For empirical samples this is the discrete hazard `P(X = x) / P(X >= x)`
/// at each distinct sample point; point masses yield an empty profile.
pub fn hazard_profile(d: &DistributionSpec) -> HazardProfile {
    if let DistributionSpec::Empirical { values } = d {
        let m = values.len() as f64;
        let mut points = Vec::new();
        let mut i = 0;
        while i < values.len() {
            let x = values[i];
            let j = values.partition_point(|&v| v <= x);
            let at_least = (values.len() - i) as f64 / m;
            let mass = (j - i) as f64 / m;
            points.push((x, mass / at_least));
            i = j;
        }
        return HazardProfile::from_points(points);
    }
    let Some(u_max) = d.continuous_quantile_range() else {
        return HazardProfile::from_points(Vec::new());
    };
    let points = (0..HAZARD_GRID)
        .map(|i| {
            let u = u_max * (i as f64 + 0.5) / HAZARD_GRID as f64;
            let x = d.quantile(u);
            (x, d.hazard(x))
        })
        .collect();
    HazardProfile::from_points(points)
}

/// Decide the monotone hazard rate condition analytically per family.
///
/// Exponential hazards are constant, uniform hazards `1/(b - x)` increase,
/// Weibull hazards with shape `>= 1` are nondecreasing, the equal-revenue
/// hazard `1/x` strictly decreases, and a point mass is vacuously MHR.
pub fn is_mhr(d: &DistributionSpec) -> Result<(bool, HazardProfile), DistributionError> {
    let verdict = match d {
        DistributionSpec::PointMass { .. } => true,
        DistributionSpec::Uniform { .. } => true,
        DistributionSpec::Exponential { .. } => true,
        DistributionSpec::Weibull { shape, .. } => *shape >= 1.0,
        DistributionSpec::EqualRevenueTruncated { .. } => false,
        DistributionSpec::Empirical { .. } => return Err(DistributionError::MhrUndecidable),
    };
    Ok((verdict, hazard_profile(d)))
}

/// Grid check that `lower` is first-order stochastically dominated by `upper`,
/// i.e. `F_lower(x) >= F_upper(x)` everywhere.
///
/// The grid is the union of both quantile functions at `grid_size` midpoints,
/// plus each support minimum, each point and its left neighbour. A `false` is
/// a certificate of non-domination; a `true` only says no violation was found
/// on the grid.
pub fn fosd_check(
    lower: &DistributionSpec,
    upper: &DistributionSpec,
    grid_size: usize,
) -> Result<bool, DistributionError> {
    if grid_size < 2 {
        return Err(DistributionError::GridTooSmall(grid_size));
    }
    let mut xs = Vec::with_capacity(4 * grid_size + 4);
    for d in [lower, upper] {
        xs.push(d.support_min());
        if d.support_max().is_finite() {
            xs.push(d.support_max());
        }
        for i in 0..grid_size {
            let u = (i as f64 + 0.5) / grid_size as f64;
            xs.push(d.quantile(u));
        }
    }
    let n = xs.len();
    for i in 0..n {
        xs.push(xs[i].next_down());
    }
    Ok(xs
        .iter()
        .all(|&x| lower.cdf(x) >= upper.cdf(x) - FOSD_TOL))
}

fn ln_choose(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln()).sum()
}

/// `P(U_(r:n) <= p)` for the `r`-th smallest of `n` standard uniforms.
pub fn uniform_order_stat_cdf(n: usize, r: usize, p: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    let mut total = 0.0;
    for s in r..=n {
        total += (ln_choose(n, s) + s as f64 * lp + (n - s) as f64 * lq).exp();
    }
    total.min(1.0)
}

/// Expected `j`-th largest of `n` i.i.d. draws from `d`.
///
/// Computed as `∫ Q(u) w(u) du` with `w` the Beta density of the matching
/// uniform order statistic, by adaptive quadrature to [`ORDER_STAT_TOL`].
/// Atoms are handled exactly by splitting at the quantile jumps.
pub fn expected_order_statistic(d: &DistributionSpec, n: usize, j: usize) -> Result<f64, DistributionError> {
    if n == 0 || j == 0 || j > n {
        return Err(DistributionError::BadRank { n, j });
    }
    // r-th smallest
    let r = n - j + 1;
    let tol = ORDER_STAT_TOL * 1e-2;
    let ln_norm = ln_choose(n - 1, r - 1) + (n as f64).ln();
    let weight = move |u: f64| -> f64 {
        if u <= 0.0 || u >= 1.0 {
            return 0.0;
        }
        (ln_norm + (r - 1) as f64 * u.ln() + (n - r) as f64 * (-u).ln_1p()).exp()
    };
    match d {
        DistributionSpec::PointMass { at } => Ok(*at),
        DistributionSpec::Empirical { values } => {
            let m = values.len();
            let mut prev = 0.0;
            let mut total = 0.0;
            for (i, &v) in values.iter().enumerate() {
                let next = uniform_order_stat_cdf(n, r, (i + 1) as f64 / m as f64);
                total += v * (next - prev);
                prev = next;
            }
            Ok(total)
        }
        DistributionSpec::EqualRevenueTruncated { cap } => {
            if cap.is_infinite() {
                if j == 1 {
                    return Err(DistributionError::Divergent(
                        "the maximum of untruncated equal-revenue draws has infinite mean",
                    ));
                }
                return Ok(quadrature::integrate(|u| weight(u) / (1.0 - u), 0.0, 1.0, tol)?);
            }
            let split = 1.0 - 1.0 / cap;
            let body = quadrature::integrate(|u| weight(u) / (1.0 - u), 0.0, split, tol)?;
            let atom = cap * (1.0 - uniform_order_stat_cdf(n, r, split));
            Ok(body + atom)
        }
        _ => Ok(quadrature::integrate(|u| d.quantile(u) * weight(u), 0.0, 1.0, tol)?),
    }
}
