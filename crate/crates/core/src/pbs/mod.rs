//! Proposer-builder separation with proposers that may build privately.
//!
//! `k` builders draw block values i.i.d. from `D_Y` and bid the symmetric
//! first-price equilibrium. The selected proposer sees the best bid `b*`,
//! privately builds a block worth `r_i ~ D_i` and proposes the builder block
//! if `b* > r_i`, its own otherwise, earning `max(b*, r_i)`. Proposers earn
//! exactly the winning bid from a builder block; nothing else is extracted.
//!
//! Under MHR `D_Y` and `D_i` dominated by `D_Y`, the ratio of expected rewards
//! between any two proposers is at most
//! `(1 + 1/(k-1)) · H_{k+1} / (H_{k+1} - 1)`, see [`theoretical_ratio_cap`].

mod bid;

pub use bid::{bne_bid, bne_bid_at_rank, BidFunction, BID_TOL};

use rayon::prelude::*;
use thiserror::Error;

use crate::distributions::{self, expected_order_statistic, fosd_check, DistributionError, DistributionSpec};
use crate::quadrature::QuadratureError;
use crate::rng::{derive_seed, RandomStream};

/// Trials per independently seeded batch in [`simulate_rewards`].
pub const BATCH_TRIALS: usize = 1 << 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AuctionError {
    #[error("need at least 2 builders, got {0}")]
    TooFewBuilders(usize),
    #[error("builder value distribution {0} has a divergent mean")]
    DivergentValues(String),
    #[error("proposer `{0}` has a build distribution with a divergent mean")]
    DivergentProposer(String),
    #[error("builder value distribution {0} is not MHR (waive the check to run anyway)")]
    NotMhr(String),
    #[error("proposer `{0}` is not first-order dominated by the builder distribution (waive the check to run anyway)")]
    NotDominated(String),
    #[error("need at least {need} proposers, got {got}")]
    TooFewProposers { need: usize, got: usize },
    #[error("trials must be at least 1")]
    NoTrials,
    #[error("mean reward of proposer `{0}` is indistinguishable from 0; ratio undefined")]
    RatioUndefined(String),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// `k` builders with i.i.d. values from `D_Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct BuilderEcosystem {
    k: usize,
    value_dist: DistributionSpec,
}

impl BuilderEcosystem {
    pub fn new(k: usize, value_dist: DistributionSpec) -> Result<Self, AuctionError> {
        if k < 2 {
            return Err(AuctionError::TooFewBuilders(k));
        }
        if !value_dist.has_finite_mean() {
            return Err(AuctionError::DivergentValues(value_dist.to_string()));
        }
        Ok(Self { k, value_dist })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn value_dist(&self) -> &DistributionSpec {
        &self.value_dist
    }
}

/// A proposer's private block-building distribution `D_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProposerSpec {
    pub label: String,
    pub build_dist: DistributionSpec,
}

impl ProposerSpec {
    pub fn new(label: impl Into<String>, build_dist: DistributionSpec) -> Self {
        Self {
            label: label.into(),
            build_dist,
        }
    }

    /// A proposer that never builds (`D_i` a point mass at 0).
    pub fn passive(label: impl Into<String>) -> Self {
        Self::new(label, DistributionSpec::PointMass { at: 0.0 })
    }
}

/// Which block the proposer publishes when `b* = r_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieRule {
    /// Builder block only if `b* > r_i` (private block on ties).
    #[default]
    PrivateOnTie,
    BuilderOnTie,
}

/// Result of one auction for one proposer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuctionOutcome {
    pub winning_bid: f64,
    pub proposer_private: f64,
    pub realized_reward: f64,
    pub used_private: bool,
}

impl AuctionOutcome {
    pub fn resolve(winning_bid: f64, proposer_private: f64, tie: TieRule) -> Self {
        let used_private = match tie {
            TieRule::PrivateOnTie => winning_bid <= proposer_private,
            TieRule::BuilderOnTie => winning_bid < proposer_private,
        };
        Self {
            winning_bid,
            proposer_private,
            realized_reward: winning_bid.max(proposer_private),
            used_private,
        }
    }
}

/// Whether the MHR and dominance hypotheses are enforced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegimeCheck {
    Enforce,
    Waive,
}

/// Verifies `D_Y` is MHR and every `D_i` is dominated by it.
pub fn check_regime(props: &[ProposerSpec], eco: &BuilderEcosystem) -> Result<(), AuctionError> {
    let (mhr, _) = distributions::is_mhr(eco.value_dist())?;
    if !mhr {
        return Err(AuctionError::NotMhr(eco.value_dist().to_string()));
    }
    for p in props {
        if !fosd_check(&p.build_dist, eco.value_dist(), distributions::DEFAULT_FOSD_GRID)? {
            return Err(AuctionError::NotDominated(p.label.clone()));
        }
    }
    Ok(())
}

/// Mean with standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

/// Per-trial sums from a batch of auctions; combined in batch order.
#[derive(Debug, Clone, PartialEq)]
struct Sums {
    trials: usize,
    reward: Vec<f64>,
    cross: Vec<f64>,
    bid: f64,
    bid_sq: f64,
    value: f64,
    private_used: Vec<usize>,
}

impl Sums {
    fn zero(p: usize) -> Self {
        Self {
            trials: 0,
            reward: vec![0.0; p],
            cross: vec![0.0; p * p],
            bid: 0.0,
            bid_sq: 0.0,
            value: 0.0,
            private_used: vec![0; p],
        }
    }

    fn add(&mut self, other: &Sums) {
        self.trials += other.trials;
        for (a, b) in self.reward.iter_mut().zip(&other.reward) {
            *a += b;
        }
        for (a, b) in self.cross.iter_mut().zip(&other.cross) {
            *a += b;
        }
        self.bid += other.bid;
        self.bid_sq += other.bid_sq;
        self.value += other.value;
        for (a, b) in self.private_used.iter_mut().zip(&other.private_used) {
            *a += b;
        }
    }
}

/// Monte Carlo summary of proposer rewards under common random numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardSummary {
    pub trials: usize,
    pub labels: Vec<String>,
    pub rewards: Vec<Estimate>,
    /// Sample covariance of per-trial rewards, row-major.
    pub covariance: Vec<f64>,
    pub winning_bid: Estimate,
    /// Mean of the highest builder value.
    pub top_value_mean: f64,
    /// Fraction of trials in which each proposer published its own block.
    pub private_rate: Vec<f64>,
}

impl RewardSummary {
    fn from_sums(labels: Vec<String>, s: &Sums) -> Self {
        let n = s.trials as f64;
        let p = labels.len();
        let means: Vec<f64> = s.reward.iter().map(|x| x / n).collect();
        let denom = (n - 1.0).max(1.0);
        let mut covariance = vec![0.0; p * p];
        for i in 0..p {
            for j in 0..p {
                covariance[i * p + j] = (s.cross[i * p + j] - n * means[i] * means[j]) / denom;
            }
        }
        let rewards = (0..p)
            .map(|i| Estimate {
                mean: means[i],
                std_error: (covariance[i * p + i].max(0.0) / n).sqrt(),
            })
            .collect();
        let bid_mean = s.bid / n;
        let bid_var = ((s.bid_sq - n * bid_mean * bid_mean) / denom).max(0.0);
        Self {
            trials: s.trials,
            labels,
            rewards,
            covariance,
            winning_bid: Estimate {
                mean: bid_mean,
                std_error: (bid_var / n).sqrt(),
            },
            top_value_mean: s.value / n,
            private_rate: s.private_used.iter().map(|&c| c as f64 / n).collect(),
        }
    }

    /// Largest ratio of mean rewards, with delta-method standard error that
    /// accounts for the common-random-number covariance.
    pub fn ratio(&self) -> Result<RatioEstimate, AuctionError> {
        let p = self.labels.len();
        if p < 2 {
            return Err(AuctionError::TooFewProposers { need: 2, got: p });
        }
        for (i, e) in self.rewards.iter().enumerate() {
            if !(e.mean > 3.0 * e.std_error && e.mean > 0.0) {
                return Err(AuctionError::RatioUndefined(self.labels[i].clone()));
            }
        }
        let by_mean = |a: &usize, b: &usize| self.rewards[*a].mean.total_cmp(&self.rewards[*b].mean);
        let hi = (0..p).max_by(by_mean).unwrap();
        let lo = (0..p).min_by(by_mean).unwrap();
        let (mh, ml) = (self.rewards[hi].mean, self.rewards[lo].mean);
        let ratio = mh / ml;
        let n = self.trials as f64;
        let var = (self.covariance[hi * p + hi] - 2.0 * ratio * self.covariance[hi * p + lo]
            + ratio * ratio * self.covariance[lo * p + lo])
            / (ml * ml * n);
        Ok(RatioEstimate {
            ratio,
            std_error: var.max(0.0).sqrt(),
            best: hi,
            worst: lo,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioEstimate {
    pub ratio: f64,
    pub std_error: f64,
    /// Index of the proposer with the highest mean reward.
    pub best: usize,
    pub worst: usize,
}

fn run_batch(
    props: &[ProposerSpec],
    eco: &BuilderEcosystem,
    bids: &BidFunction,
    trials: usize,
    tie: TieRule,
    rng: &mut RandomStream,
) -> Sums {
    let p = props.len();
    let mut s = Sums::zero(p);
    let inv_k = 1.0 / eco.k() as f64;
    let mut rewards = vec![0.0; p];
    for _ in 0..trials {
        // The top of k uniform ranks is U^{1/k}.
        let rank = rng.uniform().powf(inv_k);
        let top = eco.value_dist().quantile(rank);
        let b = bids.bid_at_rank(rank);
        let shared = rng.uniform();
        for (i, prop) in props.iter().enumerate() {
            let out = AuctionOutcome::resolve(b, prop.build_dist.quantile(shared), tie);
            rewards[i] = out.realized_reward;
            s.private_used[i] += out.used_private as usize;
        }
        for i in 0..p {
            s.reward[i] += rewards[i];
            for j in 0..p {
                s.cross[i * p + j] += rewards[i] * rewards[j];
            }
        }
        s.bid += b;
        s.bid_sq += b * b;
        s.value += top;
        s.trials += 1;
    }
    s
}

fn validate(props: &[ProposerSpec], eco: &BuilderEcosystem, trials: usize) -> Result<(), AuctionError> {
    if trials == 0 {
        return Err(AuctionError::NoTrials);
    }
    if props.is_empty() {
        return Err(AuctionError::TooFewProposers { need: 1, got: 0 });
    }
    if let Some(p) = props.iter().find(|p| !p.build_dist.has_finite_mean()) {
        return Err(AuctionError::DivergentProposer(p.label.clone()));
    }
    let _ = eco;
    Ok(())
}

/// Simulates `trials` auctions on a single stream.
pub fn simulate_rewards_with(
    props: &[ProposerSpec],
    eco: &BuilderEcosystem,
    trials: usize,
    tie: TieRule,
    rng: &mut RandomStream,
) -> Result<RewardSummary, AuctionError> {
    validate(props, eco, trials)?;
    let bids = BidFunction::new(eco)?;
    let sums = run_batch(props, eco, &bids, trials, tie, rng);
    Ok(RewardSummary::from_sums(props.iter().map(|p| p.label.clone()).collect(), &sums))
}

/// Simulates `trials` auctions in batches of [`BATCH_TRIALS`], batch `b`
/// seeded with `derive_seed(master_seed, b)`. The result does not depend on
/// `jobs`.
pub fn simulate_rewards(
    props: &[ProposerSpec],
    eco: &BuilderEcosystem,
    trials: usize,
    tie: TieRule,
    master_seed: u64,
    jobs: usize,
) -> Result<RewardSummary, AuctionError> {
    validate(props, eco, trials)?;
    let bids = BidFunction::new(eco)?;
    let batches = trials.div_ceil(BATCH_TRIALS);
    let work = |b: usize| {
        let n = BATCH_TRIALS.min(trials - b * BATCH_TRIALS);
        let mut rng = RandomStream::from_seed(derive_seed(master_seed, b as u64));
        run_batch(props, eco, &bids, n, tie, &mut rng)
    };
    let parts: Vec<Sums> = if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .expect("thread pool");
        pool.install(|| (0..batches).into_par_iter().map(work).collect())
    } else {
        (0..batches).map(work).collect()
    };
    let mut total = Sums::zero(props.len());
    for part in &parts {
        total.add(part);
    }
    Ok(RewardSummary::from_sums(props.iter().map(|p| p.label.clone()).collect(), &total))
}

/// Monte Carlo estimate of `E[max(b*, r_i)]` for one proposer.
pub fn expected_proposer_reward(
    prop: &ProposerSpec,
    eco: &BuilderEcosystem,
    trials: usize,
    rng: &mut RandomStream,
) -> Result<Estimate, AuctionError> {
    let s = simulate_rewards_with(std::slice::from_ref(prop), eco, trials, TieRule::default(), rng)?;
    Ok(s.rewards[0])
}

/// Largest ratio of expected rewards across `props`, estimated with common
/// random numbers.
pub fn heterogeneity_ratio(
    props: &[ProposerSpec],
    eco: &BuilderEcosystem,
    trials: usize,
    rng: &mut RandomStream,
    regime: RegimeCheck,
) -> Result<RatioEstimate, AuctionError> {
    if props.len() < 2 {
        return Err(AuctionError::TooFewProposers { need: 2, got: props.len() });
    }
    if regime == RegimeCheck::Enforce {
        check_regime(props, eco)?;
    }
    simulate_rewards_with(props, eco, trials, TieRule::default(), rng)?.ratio()
}

/// `H_m = Σ_{j=1}^{m} 1/j`.
pub fn harmonic(m: usize) -> f64 {
    (1..=m).map(|j| 1.0 / j as f64).sum()
}

/// Upper bound `(1 + 1/(k-1)) · H_{k+1} / (H_{k+1} - 1)` on the reward ratio of
/// any two proposers facing `k` builders with MHR values.
pub fn theoretical_ratio_cap(k: usize) -> f64 {
    if k < 2 {
        return f64::INFINITY;
    }
    let h = harmonic(k + 1);
    (1.0 + 1.0 / (k as f64 - 1.0)) * h / (h - 1.0)
}

/// The three order-statistic expectations chaining the ratio bound, with the
/// two inequalities checked.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderStatSandwich {
    pub second_of_k: f64,
    pub second_of_k_plus_1: f64,
    pub max_of_k_plus_1: f64,
    /// `second_of_k <= second_of_{k+1} <= (1 + 1/(k-1)) second_of_k`.
    pub concavity_step: bool,
    /// `max_of_{k+1} / second_of_{k+1} <= H_{k+1} / (H_{k+1} - 1)`.
    pub extremal_step: bool,
}

impl OrderStatSandwich {
    pub fn extremal_ratio(&self) -> f64 {
        if self.max_of_k_plus_1 == 0.0 {
            1.0
        } else {
            self.max_of_k_plus_1 / self.second_of_k_plus_1
        }
    }
}

pub fn order_stat_sandwich(eco: &BuilderEcosystem) -> Result<OrderStatSandwich, AuctionError> {
    let d = eco.value_dist();
    let k = eco.k();
    let second_of_k = expected_order_statistic(d, k, 2)?;
    let second_of_k_plus_1 = expected_order_statistic(d, k + 1, 2)?;
    let max_of_k_plus_1 = expected_order_statistic(d, k + 1, 1)?;
    let slack = 1e-9 * second_of_k.abs().max(1.0);
    let concavity_step = second_of_k <= second_of_k_plus_1 + slack
        && second_of_k_plus_1 <= (1.0 + 1.0 / (k as f64 - 1.0)) * second_of_k + slack;
    let h = harmonic(k + 1);
    let out = OrderStatSandwich {
        second_of_k,
        second_of_k_plus_1,
        max_of_k_plus_1,
        concavity_step,
        extremal_step: true,
    };
    Ok(OrderStatSandwich {
        extremal_step: out.extremal_ratio() <= h / (h - 1.0) + 1e-6,
        ..out
    })
}
