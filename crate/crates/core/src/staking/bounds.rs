//! Block-count bounds for ε-centralization and the Yule moments behind them.

use super::{ProcessConfig, ProcessError};

/// Bounds on the number of blocks before the target producer holds a `1 - ε`
/// share, each holding with failure probability below `prob_cap = 8β`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CentralizationBounds {
    /// Past this many blocks the target is non-centralized w.p. `< 8β`.
    /// Infinite when the target's multiplier does not strictly lead.
    pub upper_blocks: f64,
    /// Before this many blocks the target is centralized w.p. `< 8β`.
    /// Clamped at 0.
    pub lower_blocks: f64,
    pub prob_cap: f64,
    pub beta: f64,
    pub rho: f64,
    /// Critical time of the continuous embedding behind the upper bound.
    pub critical_time: f64,
    /// The upper bound carries information (target strictly leads `μ_2`).
    pub upper_applicable: bool,
    /// The lower bound is the trivial 0 (negative raw value or target does
    /// not strictly lead `μ_n`).
    pub lower_vacuous: bool,
}

/// `(E[Π(t)], Var bound)` of a Yule stake process started at `pi0` with jump
/// `μ r`: `π e^{μ r t}` and `μ r π e^{2 μ r t}`.
pub fn yule_moments(pi0: f64, mu: f64, r: f64, t: f64) -> (f64, f64) {
    let g = mu * r;
    (pi0 * (g * t).exp(), g * pi0 * (2.0 * g * t).exp())
}

/// Evaluates both block-count bounds for the target producer, with `μ_1` its
/// multiplier, `μ_2` the largest and `μ_n` the smallest among the rest.
pub fn theorem_bounds(cfg: &ProcessConfig) -> Result<CentralizationBounds, ProcessError> {
    if cfg.n() < 2 {
        return Err(ProcessError::InvalidConfig("bounds need at least two producers".into()));
    }
    let mu = cfg.mu();
    let t = cfg.target();
    let r = cfg.r();
    let others = || mu.iter().enumerate().filter(move |(i, _)| *i != t).map(|(_, m)| *m);
    let mu1 = mu[t];
    let mu2 = others().fold(f64::NEG_INFINITY, f64::max);
    let mun = others().fold(f64::INFINITY, f64::min);
    let (pi1, pi_rest) = cfg.split_initial();
    Ok(bounds_from_parts(
        BoundInputs {
            mu1,
            mu2,
            mun,
            r,
            pi1,
            pi_rest,
        },
        cfg.epsilon(),
    ))
}

/// Multipliers and stakes entering the bounds, split as target vs. rest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    /// Target's multiplier.
    pub mu1: f64,
    /// Largest multiplier among the others.
    pub mu2: f64,
    /// Smallest multiplier among the others.
    pub mun: f64,
    pub r: f64,
    /// Target's initial stake.
    pub pi1: f64,
    /// Initial stake of all others together.
    pub pi_rest: f64,
}

/// [`theorem_bounds`] on raw inputs, with no stake-resolution constraint.
pub fn bounds_from_parts(inp: BoundInputs, eps: f64) -> CentralizationBounds {
    let BoundInputs {
        mu1,
        mu2,
        mun,
        r,
        pi1,
        pi_rest,
    } = inp;
    let rho = pi_rest / pi1;
    let beta = (mu1 * r / pi1).max(mu2 * r / pi_rest);

    let odds = rho * (1.0 - eps) / eps;
    let (upper_blocks, critical_time, upper_applicable) = if mu1 > mu2 {
        let base = 3.0 * odds;
        let gap = mu1 - mu2;
        let upper = 3.0 / (2.0 * mu2 * r) * (pi1 * base.powf(mu1 / gap) + pi_rest * base.powf(mu2 / gap));
        (upper, base.ln() / (r * gap), true)
    } else {
        (f64::INFINITY, f64::INFINITY, false)
    };

    let (lower_blocks, lower_vacuous) = if mu1 > mun {
        let base = odds / 3.0;
        let gap = mu1 - mun;
        let raw = (pi1 * base.powf(mu1 / gap) + pi_rest * base.powf(mun / gap) - 2.0 * (pi1 + pi_rest))
            / (2.0 * mu1 * r);
        if raw > 0.0 {
            (raw, false)
        } else {
            (0.0, true)
        }
    } else {
        (0.0, true)
    };

    CentralizationBounds {
        upper_blocks,
        lower_blocks,
        prob_cap: 8.0 * beta,
        beta,
        rho,
        critical_time,
        upper_applicable,
        lower_vacuous,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::staking::tests::cfg;

    #[test]
    fn worked_example() {
        let c = cfg(&[2.0, 1.0], 1.0, &[100.0, 100.0], 0.5);
        let b = theorem_bounds(&c).unwrap();
        assert!((b.upper_blocks - 1800.0).abs() < 1e-9, "{}", b.upper_blocks);
        assert!((b.beta - 0.02).abs() < 1e-15);
        assert!((b.prob_cap - 0.16).abs() < 1e-15);
        assert_eq!(b.rho, 1.0);
        // raw lower value (1/4)(100/9 + 100/3 - 400) is negative
        assert_eq!(b.lower_blocks, 0.0);
        assert!(b.lower_vacuous && b.upper_applicable);
        assert!((b.critical_time - 3f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn tied_leaders_give_no_upper_bound() {
        let c = cfg(&[1.0, 1.0, 0.5], 1.0, &[1.0, 1.0, 1.0], 0.5);
        let b = theorem_bounds(&c).unwrap();
        assert!(b.upper_blocks.is_infinite() && !b.upper_applicable);
    }

    #[test]
    fn lower_bound_uses_smallest_rival() {
        let c = cfg(&[1.5, 1.0], 1.0, &[2000.0, 2000.0], 0.1);
        let b = theorem_bounds(&c).unwrap();
        // base 3, exponents 3 and 2: (2000*27 + 2000*9 - 8000) / 3
        assert!((b.lower_blocks - 64000.0 / 3.0).abs() < 1e-9);
        assert!(!b.lower_vacuous);
        let c3 = cfg(&[1.5, 1.2, 1.0], 1.0, &[2000.0, 1000.0, 1000.0], 0.1);
        let b3 = theorem_bounds(&c3).unwrap();
        assert_eq!(b3.lower_blocks, b.lower_blocks);
        assert!(b3.lower_blocks <= b3.upper_blocks);
    }

    #[test]
    fn yule_moment_examples() {
        assert_eq!(yule_moments(3.0, 2.0, 0.5, 0.0), (3.0, 3.0));
        let (m, _) = yule_moments(1.0, 1.0, 1.0, 2f64.ln());
        assert!((m - 2.0).abs() < 1e-15);
    }

    #[test]
    fn single_producer_rejected() {
        assert!(theorem_bounds(&cfg(&[1.0], 1.0, &[1.0], 0.5)).is_err());
    }
}
