//! Equilibria of the one-shot staking game between heterogeneous block
//! producers.
//!
//! Producer `i` stakes `π_i`, wins the block with probability
//! `x_i = π_i / Σ π_j`, earns `μ_i r` when it wins and pays `c` per unit of
//! stake. The equilibrium shares are the unique maximizer of the concave
//! potential `Σ μ_i (r/c) x_i (1 - x_i/2)` over the simplex, which is solved
//! exactly by water-filling: with `a_i = μ_i r / c` sorted decreasingly, an
//! active prefix of size `m` has multiplier `λ = (m - 1) / Σ_{i≤m} 1/a_i` and
//! shares `x_i = max(0, 1 - λ / a_i)`; the largest prefix whose last member
//! still gets a positive share is the optimum.
//!
//! Total stake is not part of the potential. It follows from the first-order
//! condition of any active producer, `μ_i r (1 - x_i) = c Π`, which gives
//! `Π = λ` in currency units and `π_i = Π x_i`.

use thiserror::Error;

/// Tolerance on KKT residuals and simplex sums promised by the solver.
pub const KKT_TOL: f64 = 1e-10;

/// The 33% critical security threshold drawn on the bound figure.
pub const SECURITY_THRESHOLD: f64 = 0.33;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EquilibriumError {
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("no producer has a positive multiplier, so no equilibrium exists")]
    NoPositiveMultiplier,
    #[error("a single producer has no equilibrium: any vanishing stake is a better response")]
    SingleProducer,
    #[error("index {index} out of range for {n} producers")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("invalid competitiveness profile: {0}")]
    InvalidCompetitiveness(String),
}

/// Reward multipliers together with the base reward `r` and staking cost `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierProfile {
    mu: Vec<f64>,
    r: f64,
    c: f64,
    relaxed: bool,
}

impl MultiplierProfile {
    /// Canonical profile: `μ_1 >= ... >= μ_n = 1`.
    pub fn new(mu: Vec<f64>, r: f64, c: f64) -> Result<Self, EquilibriumError> {
        let p = Self::relaxed(mu, r, c)?;
        if p.mu.windows(2).any(|w| w[0] < w[1]) {
            return Err(EquilibriumError::InvalidProfile("multipliers must be sorted nonincreasing".into()));
        }
        if p.mu.last() != Some(&1.0) {
            return Err(EquilibriumError::InvalidProfile("the smallest multiplier must equal 1".into()));
        }
        Ok(Self { relaxed: false, ..p })
    }

    /// Any nonnegative multipliers, in any order.
    pub fn relaxed(mu: Vec<f64>, r: f64, c: f64) -> Result<Self, EquilibriumError> {
        if mu.is_empty() {
            return Err(EquilibriumError::InvalidProfile("no producers".into()));
        }
        if let Some(bad) = mu.iter().find(|m| !(m.is_finite() && **m >= 0.0)) {
            return Err(EquilibriumError::InvalidProfile(format!("multiplier {bad} is not finite and nonnegative")));
        }
        if !(r.is_finite() && r > 0.0) {
            return Err(EquilibriumError::InvalidProfile(format!("base reward r = {r} must be positive")));
        }
        if !(c.is_finite() && c > 0.0) {
            return Err(EquilibriumError::InvalidProfile(format!("staking cost c = {c} must be positive")));
        }
        Ok(Self { mu, r, c, relaxed: true })
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn n(&self) -> usize {
        self.mu.len()
    }

    pub fn is_relaxed(&self) -> bool {
        self.relaxed
    }

    /// Copy with `μ_j` replaced, always in relaxed mode.
    pub fn with_multiplier(&self, j: usize, new_mu: f64) -> Result<Self, EquilibriumError> {
        if j >= self.n() {
            return Err(EquilibriumError::IndexOutOfRange { index: j, n: self.n() });
        }
        let mut mu = self.mu.clone();
        mu[j] = new_mu;
        Self::relaxed(mu, self.r, self.c)
    }

    /// Multipliers sorted nonincreasingly.
    pub fn sorted_mu(&self) -> Vec<f64> {
        let mut mu = self.mu.clone();
        mu.sort_by(|a, b| b.total_cmp(a));
        mu
    }

    /// Expected utility `μ_i r π_i / (π_i + others) - c π_i`.
    pub fn utility(&self, i: usize, stake: f64, others: f64) -> f64 {
        let total = stake + others;
        let share = if total > 0.0 { stake / total } else { 0.0 };
        self.mu[i] * self.r * share - self.c * stake
    }

    /// Value of the potential `Σ μ_i (r/c) x_i (1 - x_i/2)`.
    pub fn potential(&self, x: &[f64]) -> f64 {
        self.mu
            .iter()
            .zip(x)
            .map(|(m, xi)| m * self.r / self.c * xi * (1.0 - xi / 2.0))
            .sum()
    }
}

/// Equilibrium market shares with the supporting multiplier and stakes.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    /// Market shares, in the profile's producer order.
    pub x: Vec<f64>,
    /// KKT multiplier of the simplex constraint.
    pub lambda: f64,
    /// Equilibrium total stake `Π = λ` (currency units).
    pub total_stake: f64,
    /// Equilibrium stakes `π_i = Π x_i`.
    pub pi: Vec<f64>,
}

impl Allocation {
    pub fn max_share(&self) -> f64 {
        self.x.iter().copied().fold(0.0, f64::max)
    }
}

/// Unique equilibrium allocation of the staking game.
pub fn solve_equilibrium(p: &MultiplierProfile) -> Result<Allocation, EquilibriumError> {
    if p.n() == 1 {
        return Err(EquilibriumError::SingleProducer);
    }
    let scale = p.r / p.c;
    let a: Vec<f64> = p.mu.iter().map(|m| m * scale).collect();
    let mut order: Vec<usize> = (0..a.len()).filter(|&i| a[i] > 0.0).collect();
    if order.is_empty() {
        return Err(EquilibriumError::NoPositiveMultiplier);
    }
    order.sort_by(|&i, &j| a[j].total_cmp(&a[i]));

    let mut inv_sum = 0.0;
    let mut lambda = 0.0;
    for (m, &i) in order.iter().enumerate() {
        inv_sum += 1.0 / a[i];
        let candidate = m as f64 / inv_sum;
        if a[i] > candidate {
            lambda = candidate;
        } else {
            break;
        }
    }
    let x: Vec<f64> = a
        .iter()
        .map(|&ai| if ai > lambda { 1.0 - lambda / ai } else { 0.0 })
        .collect();
    let pi = x.iter().map(|xi| lambda * xi).collect();
    Ok(Allocation {
        x,
        lambda,
        total_stake: lambda,
        pi,
    })
}

/// Largest violation of the optimality conditions: active producers must have
/// `μ_i (r/c)(1 - x_i) = λ`, inactive ones `<= λ`, and shares must sum to 1.
pub fn kkt_residual(p: &MultiplierProfile, alloc: &Allocation) -> f64 {
    let scale = p.r / p.c;
    let mut worst = (alloc.x.iter().sum::<f64>() - 1.0).abs();
    for (m, &xi) in p.mu.iter().zip(&alloc.x) {
        let grad = m * scale * (1.0 - xi);
        let r = if xi > 0.0 {
            (grad - alloc.lambda).abs()
        } else {
            (grad - alloc.lambda).max(0.0)
        };
        worst = worst.max(r);
        if xi < 0.0 {
            worst = worst.max(-xi);
        }
    }
    worst
}

/// `(γ, k)`: at least `k` producers besides the leader have multipliers of at
/// least `γ μ_1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompetitivenessProfile {
    pub gamma: f64,
    pub k: usize,
}

impl CompetitivenessProfile {
    pub fn new(gamma: f64, k: usize) -> Result<Self, EquilibriumError> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(EquilibriumError::InvalidCompetitiveness(format!("gamma = {gamma} must lie in [0, 1]")));
        }
        if k == 0 {
            return Err(EquilibriumError::InvalidCompetitiveness("k must be at least 1".into()));
        }
        Ok(Self { gamma, k })
    }

    /// Whether `μ_{k+1} >= γ μ_1` for the (sorted) profile.
    pub fn applies_to(&self, p: &MultiplierProfile) -> bool {
        let mu = p.sorted_mu();
        self.k < mu.len() && mu[self.k] >= self.gamma * mu[0]
    }
}

/// Largest equilibrium share possible in a `(γ, k)`-competitive set:
/// `1 - γ k / (k + γ)`.
pub fn max_share_bound(cp: CompetitivenessProfile) -> f64 {
    let k = cp.k as f64;
    1.0 - cp.gamma * k / (k + cp.gamma)
}

/// The `k + 1` producer profile `(1/γ, 1, ..., 1)` (with `r = c = 1`) whose
/// leader attains [`max_share_bound`].
pub fn worst_case_instance(cp: CompetitivenessProfile) -> Result<MultiplierProfile, EquilibriumError> {
    if cp.gamma <= 0.0 {
        return Err(EquilibriumError::InvalidCompetitiveness(
            "gamma = 0 has no worst-case instance (1/gamma diverges)".into(),
        ));
    }
    let mut mu = vec![1.0; cp.k + 1];
    mu[0] = 1.0 / cp.gamma;
    MultiplierProfile::new(mu, 1.0, 1.0)
}

/// Every `(γ_k, k)` a profile satisfies, with the `k` giving the tightest bound.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaProfile {
    /// `(γ_k, k)` with `γ_k = μ_{k+1} / μ_1`, for `k = 1..n-1`.
    pub pairs: Vec<(f64, usize)>,
    /// `k` minimizing `1 - γ_k k / (k + γ_k)`.
    pub best_k: usize,
    pub best_bound: f64,
}

pub fn gamma_profile(p: &MultiplierProfile) -> Result<GammaProfile, EquilibriumError> {
    if p.n() < 2 {
        return Err(EquilibriumError::SingleProducer);
    }
    let mu = p.sorted_mu();
    if mu[0] <= 0.0 {
        return Err(EquilibriumError::NoPositiveMultiplier);
    }
    let pairs: Vec<(f64, usize)> = (1..mu.len()).map(|k| (mu[k] / mu[0], k)).collect();
    let (best_k, best_bound) = pairs
        .iter()
        .map(|&(gamma, k)| (k, max_share_bound(CompetitivenessProfile { gamma, k })))
        .fold((0, f64::INFINITY), |best, cand| if cand.1 < best.1 { cand } else { best });
    Ok(GammaProfile {
        pairs,
        best_k,
        best_bound,
    })
}

/// Equilibria before and after setting `μ_j := new_mu` (0-based `j`).
pub fn perturb_multiplier(
    p: &MultiplierProfile,
    j: usize,
    new_mu: f64,
) -> Result<(Allocation, Allocation), EquilibriumError> {
    let altered = p.with_multiplier(j, new_mu)?;
    Ok((solve_equilibrium(p)?, solve_equilibrium(&altered)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn symmetric_profile_splits_evenly() {
        for (r, c) in [(1.0, 1.0), (3.0, 0.5), (0.01, 7.0)] {
            let p = MultiplierProfile::new(vec![1.0; 4], r, c).unwrap();
            let a = solve_equilibrium(&p).unwrap();
            assert!(a.x.iter().all(|&x| close(x, 0.25, 1e-15)));
            assert!(kkt_residual(&p, &a) <= KKT_TOL);
        }
    }

    #[test]
    fn two_producer_example() {
        for (r, c) in [(1.0, 1.0), (2.0, 5.0)] {
            let p = MultiplierProfile::new(vec![2.0, 1.0], r, c).unwrap();
            let a = solve_equilibrium(&p).unwrap();
            let s = r / c;
            assert!(close(a.x[0], 2.0 / 3.0, 1e-15) && close(a.x[1], 1.0 / 3.0, 1e-15));
            assert!(close(a.lambda, 2.0 / 3.0 * s, 1e-14));
            assert!(close(a.pi[0], 4.0 / 9.0 * s, 1e-14) && close(a.pi[1], 2.0 / 9.0 * s, 1e-14));
            // first-order condition μ_i r (1 - x_i) = c Π
            for i in 0..2 {
                assert!(close(p.mu()[i] * r * (1.0 - a.x[i]), c * a.total_stake, 1e-12));
            }
        }
    }

    #[test]
    fn weak_producer_is_excluded() {
        let p = MultiplierProfile::new(vec![10.0, 10.0, 1.0], 1.0, 1.0).unwrap();
        let a = solve_equilibrium(&p).unwrap();
        assert_eq!(a.x, vec![0.5, 0.5, 0.0]);
        assert_eq!(a.lambda, 5.0);
        assert!(kkt_residual(&p, &a) <= KKT_TOL);
        // the excluded producer gains nothing by entering
        let others: f64 = a.pi.iter().sum();
        for d in [1e-3, 1e-2, 0.1] {
            assert!(p.utility(2, d, others) < 0.0);
        }
    }

    #[test]
    fn degenerate_inputs_rejected() {
        let p = MultiplierProfile::relaxed(vec![3.0], 1.0, 1.0).unwrap();
        assert_eq!(solve_equilibrium(&p), Err(EquilibriumError::SingleProducer));
        let p = MultiplierProfile::relaxed(vec![0.0, 0.0], 1.0, 1.0).unwrap();
        assert_eq!(solve_equilibrium(&p), Err(EquilibriumError::NoPositiveMultiplier));
        assert!(MultiplierProfile::new(vec![1.0, 2.0], 1.0, 1.0).is_err());
        assert!(MultiplierProfile::new(vec![2.0, 1.5], 1.0, 1.0).is_err());
        assert!(MultiplierProfile::relaxed(vec![1.0, -1.0], 1.0, 1.0).is_err());
        assert!(MultiplierProfile::relaxed(vec![1.0], 0.0, 1.0).is_err());
    }

    #[test]
    fn unsorted_relaxed_profile() {
        let p = MultiplierProfile::relaxed(vec![1.0, 2.0], 1.0, 1.0).unwrap();
        let a = solve_equilibrium(&p).unwrap();
        assert!(close(a.x[0], 1.0 / 3.0, 1e-15) && close(a.x[1], 2.0 / 3.0, 1e-15));
    }

    #[test]
    fn bound_examples() {
        for k in 1..=10 {
            let b = max_share_bound(CompetitivenessProfile::new(1.0, k).unwrap());
            assert!(close(b, 1.0 / (k as f64 + 1.0), 1e-15));
        }
        assert!(close(max_share_bound(CompetitivenessProfile::new(0.5, 1).unwrap()), 2.0 / 3.0, 1e-15));
        let b = max_share_bound(CompetitivenessProfile::new(0.9, 10).unwrap());
        assert!(close(b, 1.0 - 9.0 / 10.9, 1e-15));
        assert!(close(b, 0.174312, 1e-6));
    }

    #[test]
    fn worst_case_examples() {
        let p = worst_case_instance(CompetitivenessProfile::new(0.5, 1).unwrap()).unwrap();
        assert_eq!(p.mu(), &[2.0, 1.0]);
        let p = worst_case_instance(CompetitivenessProfile::new(1.0, 3).unwrap()).unwrap();
        let a = solve_equilibrium(&p).unwrap();
        assert!(a.x.iter().all(|&x| close(x, 0.25, 1e-15)));
        let cp = CompetitivenessProfile::new(0.9, 10).unwrap();
        let a = solve_equilibrium(&worst_case_instance(cp).unwrap()).unwrap();
        assert!(close(a.x[0], max_share_bound(cp), 1e-10));
        for &x in &a.x[1..] {
            assert!(close(x, 0.9 / 10.9, 1e-10));
        }
        assert!(close(a.x.iter().sum::<f64>(), 1.0, 1e-12));
        assert!(worst_case_instance(CompetitivenessProfile::new(0.0, 2).unwrap()).is_err());
    }

    #[test]
    fn gamma_profile_examples() {
        let g = gamma_profile(&MultiplierProfile::new(vec![2.0, 1.0], 1.0, 1.0).unwrap()).unwrap();
        assert_eq!(g.pairs, vec![(0.5, 1)]);
        assert_eq!(g.best_k, 1);
        let g = gamma_profile(&MultiplierProfile::new(vec![1.0; 4], 1.0, 1.0).unwrap()).unwrap();
        assert_eq!(g.pairs, vec![(1.0, 1), (1.0, 2), (1.0, 3)]);
        assert_eq!(g.best_k, 3);
        assert!(close(g.best_bound, 0.25, 1e-15));
        let p = MultiplierProfile::new(vec![4.0, 2.0, 1.0], 1.0, 1.0).unwrap();
        let g = gamma_profile(&p).unwrap();
        assert_eq!(g.pairs, vec![(0.5, 1), (0.25, 2)]);
        let b2 = max_share_bound(CompetitivenessProfile::new(0.25, 2).unwrap());
        assert!(close(b2, 7.0 / 9.0, 1e-15));
        assert_eq!(g.best_k, 1);
        assert!(close(g.best_bound, 2.0 / 3.0, 1e-15));
        assert!(CompetitivenessProfile::new(0.5, 1).unwrap().applies_to(&p));
        assert!(!CompetitivenessProfile::new(0.6, 1).unwrap().applies_to(&p));
        assert!(!CompetitivenessProfile::new(0.1, 3).unwrap().applies_to(&p));
    }

    #[test]
    fn perturbation_examples() {
        let p = MultiplierProfile::new(vec![2.0, 1.0], 1.0, 1.0).unwrap();
        let (before, after) = perturb_multiplier(&p, 1, 1.5).unwrap();
        assert!(close(before.x[0], 2.0 / 3.0, 1e-15));
        assert!(after.x[0] < before.x[0]);
        let p = MultiplierProfile::new(vec![1.0, 1.0], 1.0, 1.0).unwrap();
        let (before, after) = perturb_multiplier(&p, 0, 1.0).unwrap();
        assert_eq!(before, after);
        let p = MultiplierProfile::new(vec![2.0, 1.0], 1.0, 1.0).unwrap();
        let (_, after) = perturb_multiplier(&p, 1, 0.0).unwrap();
        assert_eq!(after.x, vec![1.0, 0.0]);
        assert!(perturb_multiplier(&p, 2, 1.0).is_err());
    }
}
