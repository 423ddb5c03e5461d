//! Symmetric first-price auction equilibrium bids.
//!
//! Bids are indexed by a builder's quantile rank `u` rather than its value:
//!
//! `b(u) = Q(u) - G(Q(u)) / u^{k-1}`, with `G(v) = ∫_{lo}^{v} F^{k-1}`,
//!
//! which is `E[Q(S) | S < u]` for `S` the highest of the other `k - 1`
//! ranks. For continuous values this is the familiar `β(v) = v - ∫ (F/F(v))^{k-1}`.
//! Where the value distribution has an atom, builders sharing the atom value
//! bid by their rank inside it, which is the mixed equilibrium on that atom;
//! a point mass therefore bids its value. In every case the expected winning
//! bid equals the expected second-highest value.

use super::{AuctionError, BuilderEcosystem};
use crate::distributions::DistributionSpec;
use crate::quadrature;

/// Absolute tolerance of the shading integral.
pub const BID_TOL: f64 = 1e-8;

const TABLE_CELLS: usize = 2048;

/// Smallest `u^{k-1}` the table divides by; lower ranks integrate directly.
const MIN_SCALE: f64 = 1e-200;

/// `v - ∫_{lo}^{v} (F(y)/u)^{k-1} dy`, the bid at rank `u` with value `v = Q(u)`.
fn direct_bid(d: &DistributionSpec, k: usize, v: f64, u: f64) -> Result<f64, AuctionError> {
    let lo = d.support_min();
    if v <= lo || u <= 0.0 {
        return Ok(lo);
    }
    let power = (k - 1) as i32;
    let shading = match d {
        DistributionSpec::PointMass { .. } => 0.0,
        DistributionSpec::Empirical { .. } => step_integral(d, lo, v, power) / u.powi(power),
        _ => quadrature::integrate(|y| (d.cdf(y) / u).powi(power), lo, v, BID_TOL * 1e-2)?,
    };
    Ok(v - shading)
}

/// `∫_{a}^{b} F^{p}` for a step CDF, exactly.
fn step_integral(d: &DistributionSpec, a: f64, b: f64, power: i32) -> f64 {
    let DistributionSpec::Empirical { values } = d else {
        unreachable!("step integrals are only taken of empirical distributions")
    };
    let mut acc = 0.0;
    let mut from = a;
    for &x in values.iter() {
        if x <= from {
            continue;
        }
        let to = x.min(b);
        acc += d.cdf(from).powi(power) * (to - from);
        from = to;
        if from >= b {
            break;
        }
    }
    if b > from {
        acc += d.cdf(from).powi(power) * (b - from);
    }
    acc
}

/// Equilibrium bid of a builder with value `v` among `k` i.i.d. builders.
///
/// At an atom this is the bid of the highest rank sharing the value, the top
/// of that atom's mixing interval.
pub fn bne_bid(v: f64, eco: &BuilderEcosystem) -> Result<f64, AuctionError> {
    let d = eco.value_dist();
    direct_bid(d, eco.k(), v, d.cdf(v))
}

/// Equilibrium bid of the builder at quantile rank `u ∈ [0, 1]`.
pub fn bne_bid_at_rank(u: f64, eco: &BuilderEcosystem) -> Result<f64, AuctionError> {
    let d = eco.value_dist();
    direct_bid(d, eco.k(), d.quantile(u), u)
}

/// Tabulated bid function for Monte Carlo use.
///
/// Stores `G` at the value quantiles `j / 2048` (at every support point for
/// empirical values); a query adds the integral over the final partial cell.
#[derive(Debug, Clone)]
pub struct BidFunction {
    dist: DistributionSpec,
    k: usize,
    knots: Vec<f64>,
    cumulative: Vec<f64>,
}

impl BidFunction {
    pub fn new(eco: &BuilderEcosystem) -> Result<Self, AuctionError> {
        let dist = eco.value_dist().clone();
        let k = eco.k();
        let power = (k - 1) as i32;
        let mut knots = vec![dist.support_min()];
        match &dist {
            DistributionSpec::PointMass { .. } => {}
            DistributionSpec::Empirical { values } => {
                for &x in values.iter() {
                    if x > *knots.last().unwrap() {
                        knots.push(x);
                    }
                }
            }
            _ => {
                let u_max = dist.continuous_quantile_range().unwrap_or(1.0);
                for j in 1..TABLE_CELLS {
                    let x = dist.quantile(u_max * j as f64 / TABLE_CELLS as f64);
                    if x > *knots.last().unwrap() {
                        knots.push(x);
                    }
                }
                if dist.support_max().is_finite() && dist.support_max() > *knots.last().unwrap() {
                    knots.push(dist.support_max());
                }
            }
        }
        let mut cumulative = vec![0.0];
        let mut acc = 0.0;
        for w in knots.windows(2) {
            acc += match &dist {
                DistributionSpec::Empirical { .. } => dist.cdf(w[0]).powi(power) * (w[1] - w[0]),
                _ => quadrature::integrate(|y| dist.cdf(y).powi(power), w[0], w[1], 1e-14)?,
            };
            cumulative.push(acc);
        }
        Ok(Self {
            dist,
            k,
            knots,
            cumulative,
        })
    }

    /// `G(v) = ∫_{lo}^{v} F^{k-1}`.
    fn shading_mass(&self, v: f64, scale: f64) -> f64 {
        let power = (self.k - 1) as i32;
        let cell = self.knots.partition_point(|&x| x <= v) - 1;
        let from = self.knots[cell];
        let tail = if v <= from {
            0.0
        } else if let DistributionSpec::Empirical { .. } = self.dist {
            self.dist.cdf(from).powi(power) * (v - from)
        } else {
            let f = |y: f64| self.dist.cdf(y).powi(power);
            quadrature::integrate(f, from, v, 1e-13 * scale.max(1e-3)).unwrap_or_else(|_| quadrature::gk15(&f, from, v).0)
        };
        self.cumulative[cell] + tail
    }

    /// Bid of the builder at quantile rank `u`.
    pub fn bid_at_rank(&self, u: f64) -> f64 {
        let v = self.dist.quantile(u);
        let lo = self.knots[0];
        if v <= lo || u <= 0.0 {
            return lo;
        }
        let scale = u.powi((self.k - 1) as i32);
        if !(scale > MIN_SCALE) {
            return direct_bid(&self.dist, self.k, v, u).unwrap_or(lo);
        }
        v - self.shading_mass(v, scale) / scale
    }

    /// Bid of a builder with value `v` (the highest rank sharing it).
    pub fn bid(&self, v: f64) -> f64 {
        let lo = self.knots[0];
        if v <= lo {
            return lo;
        }
        let u = self.dist.cdf(v);
        let scale = u.powi((self.k - 1) as i32);
        if !(scale > MIN_SCALE) {
            return direct_bid(&self.dist, self.k, v, u).unwrap_or(lo);
        }
        v - self.shading_mass(v, scale) / scale
    }
}
