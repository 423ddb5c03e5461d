//! The staking process: at every block one producer is drawn with probability
//! proportional to stake and reinvests its reward `μ_i r`.
//!
//! Stakes are held as integer multiples of a resolution quantum, so rewards
//! are exact and stake is conserved bit for bit. Winner selection compares a
//! 53-bit uniform against the cumulative stake partition in exact integer
//! arithmetic; the partition lists the target producer first, then the others
//! in index order, which is the ordering the coupling argument relies on.

mod bounds;
mod continuous;
mod coupling;
mod engine;

pub use bounds::{bounds_from_parts, theorem_bounds, yule_moments, BoundInputs, CentralizationBounds};
pub use continuous::{run_continuous, run_continuous_timed, run_continuous_tracked};
pub use coupling::{coupled_run, CoupledPaths, CouplingDirection};
pub use engine::{run_blocks, run_tracked, run_until_centralized, CentralizationRun, StopRule};

use thiserror::Error;

use crate::tullock::MultiplierProfile;

/// Default resolution quantum (currency units per integer stake unit).
pub const DEFAULT_QUANTUM: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProcessError {
    #[error("invalid process configuration: {0}")]
    InvalidConfig(String),
    #[error("{what} = {value} is not a whole number of quanta at resolution {quantum}")]
    NotRepresentable {
        what: String,
        value: f64,
        quantum: f64,
    },
    #[error("stake counter overflow after {rings} steps; use a coarser quantum")]
    Overflow { rings: u64 },
    #[error("coupling premise violated: {0}")]
    CouplingPremise(String),
}

fn to_quanta(what: impl Into<String>, value: f64, quantum: f64) -> Result<u64, ProcessError> {
    let scaled = value / quantum;
    let rounded = scaled.round();
    let ok = value.is_finite()
        && value >= 0.0
        && rounded <= u64::MAX as f64 / 4.0
        && (scaled - rounded).abs() <= (4.0 * f64::EPSILON * rounded).max(1e-6);
    if !ok {
        return Err(ProcessError::NotRepresentable {
            what: what.into(),
            value,
            quantum,
        });
    }
    Ok(rounded as u64)
}

/// Parameters of one staking process.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessConfig {
    mu: Vec<f64>,
    r: f64,
    initial: Vec<f64>,
    epsilon: f64,
    target: usize,
    quantum: f64,
    reward_quanta: Vec<u64>,
    initial_quanta: Vec<u64>,
}

impl ProcessConfig {
    /// Process with multipliers and base reward from `profile` (its staking
    /// cost is unused), target producer 0 and the default quantum.
    pub fn new(profile: &MultiplierProfile, initial: Vec<f64>, epsilon: f64) -> Result<Self, ProcessError> {
        Self::build(profile.mu().to_vec(), profile.r(), initial, epsilon, 0, DEFAULT_QUANTUM)
    }

    pub fn with_target(self, target: usize) -> Result<Self, ProcessError> {
        Self::build(self.mu, self.r, self.initial, self.epsilon, target, self.quantum)
    }

    pub fn with_quantum(self, quantum: f64) -> Result<Self, ProcessError> {
        Self::build(self.mu, self.r, self.initial, self.epsilon, self.target, quantum)
    }

    /// Same process with different multipliers.
    pub fn with_mu(&self, mu: Vec<f64>) -> Result<Self, ProcessError> {
        Self::build(mu, self.r, self.initial.clone(), self.epsilon, self.target, self.quantum)
    }

    /// Same process with different initial stakes.
    pub fn with_initial(&self, initial: Vec<f64>) -> Result<Self, ProcessError> {
        Self::build(self.mu.clone(), self.r, initial, self.epsilon, self.target, self.quantum)
    }

    fn build(
        mu: Vec<f64>,
        r: f64,
        initial: Vec<f64>,
        epsilon: f64,
        target: usize,
        quantum: f64,
    ) -> Result<Self, ProcessError> {
        let bad = |m: String| Err(ProcessError::InvalidConfig(m));
        if mu.is_empty() {
            return bad("no producers".into());
        }
        if mu.len() != initial.len() {
            return bad(format!("{} multipliers but {} initial stakes", mu.len(), initial.len()));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return bad(format!("epsilon = {epsilon} must lie in (0, 1)"));
        }
        if target >= mu.len() {
            return bad(format!("target producer {target} out of range for {} producers", mu.len()));
        }
        if !(quantum.is_finite() && quantum > 0.0) {
            return bad(format!("quantum = {quantum} must be positive"));
        }
        if !(r.is_finite() && r > 0.0) {
            return bad(format!("base reward r = {r} must be positive"));
        }
        if let Some(m) = mu.iter().find(|m| !(m.is_finite() && **m >= 0.0)) {
            return bad(format!("multiplier {m} must be finite and nonnegative"));
        }
        let mut reward_quanta = Vec::with_capacity(mu.len());
        let mut initial_quanta = Vec::with_capacity(mu.len());
        for (i, (&m, &s)) in mu.iter().zip(&initial).enumerate() {
            if !(s.is_finite() && s > 0.0) {
                return bad(format!("initial stake {s} of producer {} must be positive", i + 1));
            }
            reward_quanta.push(to_quanta(format!("reward mu_{} * r", i + 1), m * r, quantum)?);
            let q = to_quanta(format!("initial stake of producer {}", i + 1), s, quantum)?;
            if q == 0 {
                return bad(format!("initial stake of producer {} rounds to zero quanta", i + 1));
            }
            initial_quanta.push(q);
        }
        Ok(Self {
            mu,
            r,
            initial,
            epsilon,
            target,
            quantum,
            reward_quanta,
            initial_quanta,
        })
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn initial_stakes(&self) -> &[f64] {
        &self.initial
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn target(&self) -> usize {
        self.target
    }

    pub fn quantum(&self) -> f64 {
        self.quantum
    }

    pub fn n(&self) -> usize {
        self.mu.len()
    }

    /// Reward of each producer in quanta.
    pub fn reward_quanta(&self) -> &[u64] {
        &self.reward_quanta
    }

    /// Stake of the target and of everyone else, `(π_1, π_{-1})`.
    pub fn split_initial(&self) -> (f64, f64) {
        let own = self.initial[self.target];
        let rest = self.initial.iter().sum::<f64>() - own;
        (own, rest)
    }

    pub fn initial_state(&self) -> StakeState {
        StakeState::new_raw(self.initial_quanta.clone(), 1, self.quantum)
    }

    /// Partition order: target first, then the rest by index.
    pub(crate) fn partition_order(&self) -> impl Iterator<Item = usize> + '_ {
        std::iter::once(self.target).chain((0..self.n()).filter(move |&i| i != self.target))
    }
}

/// Stakes at block `t` (after `t - 1` block opportunities).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StakeState {
    stakes: Vec<u64>,
    total: u64,
    t: u64,
    quantum_bits: QuantumBits,
}

// f64 is not Eq; store the quantum by bit pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct QuantumBits(u64);

impl StakeState {
    /// Block index, starting at 1.
    pub fn t(&self) -> u64 {
        self.t
    }

    /// Completed block opportunities, `t - 1`.
    pub fn history_len(&self) -> u64 {
        self.t - 1
    }

    /// Stakes in quanta.
    pub fn stake_quanta(&self) -> &[u64] {
        &self.stakes
    }

    pub fn total_quanta(&self) -> u64 {
        self.total
    }

    pub fn quantum(&self) -> f64 {
        f64::from_bits(self.quantum_bits.0)
    }

    /// Stakes in currency units.
    pub fn stakes(&self) -> Vec<f64> {
        let q = self.quantum();
        self.stakes.iter().map(|&s| s as f64 * q).collect()
    }

    pub fn share(&self, i: usize) -> f64 {
        self.stakes[i] as f64 / self.total as f64
    }

    pub fn shares(&self) -> Vec<f64> {
        (0..self.stakes.len()).map(|i| self.share(i)).collect()
    }

    /// Whether producer `i` holds at least a `1 - ε` share.
    pub fn is_centralized_at(&self, i: usize, epsilon: f64) -> bool {
        self.stakes[i] as f64 >= (1.0 - epsilon) * self.total as f64
    }

    pub(crate) fn credit(&mut self, i: usize, reward: u64, steps: u64) -> Result<(), ProcessError> {
        let overflow = || ProcessError::Overflow { rings: steps };
        self.stakes[i] = self.stakes[i].checked_add(reward).ok_or_else(overflow)?;
        self.total = self.total.checked_add(reward).ok_or_else(overflow)?;
        self.t += 1;
        Ok(())
    }

    /// Draws the producer for the next block from a 53-bit uniform `m`
    /// (variate `y = m 2^-53`): the first `i` in partition order with
    /// `y <= a_i`, the cumulative share through `i`.
    pub(crate) fn select(&self, order: impl Iterator<Item = usize>, m: u64) -> usize {
        let lhs = m as u128 * self.total as u128;
        let mut cum: u128 = 0;
        let mut last = 0;
        for i in order {
            cum += self.stakes[i] as u128;
            last = i;
            if lhs <= cum << 53 {
                return i;
            }
        }
        last
    }
}

impl StakeState {
    fn new_raw(stakes: Vec<u64>, t: u64, quantum: f64) -> Self {
        let total = stakes.iter().sum();
        Self {
            stakes,
            total,
            t,
            quantum_bits: QuantumBits(quantum.to_bits()),
        }
    }
}

/// One block: draw the producer, credit its reward. Returns the 0-based index
/// of the chosen producer.
pub fn step<S: crate::rng::UniformSource + ?Sized>(
    state: &mut StakeState,
    cfg: &ProcessConfig,
    rng: &mut S,
) -> Result<usize, ProcessError> {
    let chosen = state.select(cfg.partition_order(), rng.uniform_bits());
    let steps = state.history_len() + 1;
    state.credit(chosen, cfg.reward_quanta[chosen], steps)?;
    Ok(chosen)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::ScriptedUniforms;

    pub(crate) fn cfg(mu: &[f64], r: f64, initial: &[f64], eps: f64) -> ProcessConfig {
        let p = MultiplierProfile::relaxed(mu.to_vec(), r, 1.0).unwrap();
        ProcessConfig::new(&p, initial.to_vec(), eps).unwrap()
    }

    #[test]
    fn single_producer_always_chosen() {
        let c = cfg(&[1.5], 2.0, &[4.0], 0.5);
        let mut s = c.initial_state();
        let mut rng = ScriptedUniforms::new(vec![0.0, 0.5, 0.999]);
        for _ in 0..7 {
            assert_eq!(step(&mut s, &c, &mut rng).unwrap(), 0);
        }
        assert_eq!(s.stakes(), vec![4.0 + 7.0 * 3.0]);
        assert_eq!(s.t(), 8);
        assert_eq!(s.history_len(), 7);
    }

    #[test]
    fn partition_arithmetic() {
        let c = cfg(&[1.0, 1.0], 1.0, &[3.0, 1.0], 0.5);
        let mut s = c.initial_state();
        assert_eq!(step(&mut s, &c, &mut ScriptedUniforms::new(vec![0.8])).unwrap(), 1);
        let mut s = c.initial_state();
        assert_eq!(step(&mut s, &c, &mut ScriptedUniforms::new(vec![0.75])).unwrap(), 0);
    }

    #[test]
    fn hand_replay() {
        let c = cfg(&[2.0, 1.0], 1.0, &[1.0, 1.0], 0.5);
        let mut s = c.initial_state();
        let mut rng = ScriptedUniforms::new(vec![0.1, 0.9]);
        assert_eq!(step(&mut s, &c, &mut rng).unwrap(), 0);
        assert_eq!(s.stakes(), vec![3.0, 1.0]);
        assert_eq!(step(&mut s, &c, &mut rng).unwrap(), 1);
        assert_eq!(s.stakes(), vec![3.0, 2.0]);
    }

    #[test]
    fn target_goes_first_in_partition() {
        let c = cfg(&[1.0, 1.0], 1.0, &[3.0, 1.0], 0.5).with_target(1).unwrap();
        let mut s = c.initial_state();
        // partition is (0, 1/4] for producer 2, then (1/4, 1] for producer 1
        assert_eq!(step(&mut s, &c, &mut ScriptedUniforms::new(vec![0.2])).unwrap(), 1);
        let mut s = c.initial_state();
        assert_eq!(step(&mut s, &c, &mut ScriptedUniforms::new(vec![0.3])).unwrap(), 0);
    }

    #[test]
    fn unrepresentable_rewards_rejected() {
        let p = MultiplierProfile::relaxed(vec![1.0, 1.0 / 3.0], 1.0, 1.0).unwrap();
        let err = ProcessConfig::new(&p, vec![1.0, 1.0], 0.5).unwrap_err();
        assert!(matches!(err, ProcessError::NotRepresentable { .. }), "{err}");
        let p = MultiplierProfile::relaxed(vec![1.5, 1.0], 1.0, 1.0).unwrap();
        assert!(ProcessConfig::new(&p, vec![1.0, 1.0], 0.5).unwrap().with_quantum(0.5).is_ok());
        assert!(ProcessConfig::new(&p, vec![1.0, 1.0], 0.5).unwrap().with_quantum(1.0).is_err());
    }

    #[test]
    fn invalid_configs_rejected() {
        let p = MultiplierProfile::relaxed(vec![1.0, 1.0], 1.0, 1.0).unwrap();
        assert!(ProcessConfig::new(&p, vec![1.0], 0.5).is_err());
        assert!(ProcessConfig::new(&p, vec![1.0, 0.0], 0.5).is_err());
        assert!(ProcessConfig::new(&p, vec![1.0, 1.0], 1.0).is_err());
        assert!(ProcessConfig::new(&p, vec![1.0, 1.0], 0.5).unwrap().with_target(2).is_err());
    }
}
