//! Discrete-time engine.

use super::{step, ProcessConfig, ProcessError, StakeState};
use crate::rng::UniformSource;

/// Outcome of [`run_until_centralized`].
#[derive(Debug, Clone, PartialEq)]
pub struct CentralizationRun {
    /// First block index `t` at which the target held at least `1 - ε`.
    pub hit_block: Option<u64>,
    pub final_state: StakeState,
}

impl CentralizationRun {
    pub fn hit(&self) -> bool {
        self.hit_block.is_some()
    }
}

/// State after `blocks` block opportunities.
pub fn run_blocks<S: UniformSource + ?Sized>(
    cfg: &ProcessConfig,
    blocks: u64,
    rng: &mut S,
) -> Result<StakeState, ProcessError> {
    let mut state = cfg.initial_state();
    for _ in 0..blocks {
        step(&mut state, cfg, rng)?;
    }
    Ok(state)
}

/// When a tracked run stops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StopRule {
    /// At the first block where the target is ε-centralized.
    #[default]
    FirstHit,
    /// After all opportunities, still recording the first hit.
    Horizon,
}

/// Shared driver: checks the initial state, then the state after each of up
/// to `max_steps` calls to `advance`.
pub(crate) fn track(
    cfg: &ProcessConfig,
    max_steps: u64,
    stop: StopRule,
    mut advance: impl FnMut(&mut StakeState) -> Result<(), ProcessError>,
) -> Result<CentralizationRun, ProcessError> {
    let target = cfg.target();
    let eps = cfg.epsilon();
    let mut state = cfg.initial_state();
    let mut hit_block = state.is_centralized_at(target, eps).then(|| state.t());
    let mut remaining = max_steps;
    while remaining > 0 && !(hit_block.is_some() && stop == StopRule::FirstHit) {
        advance(&mut state)?;
        remaining -= 1;
        if hit_block.is_none() && state.is_centralized_at(target, eps) {
            hit_block = Some(state.t());
        }
    }
    Ok(CentralizationRun {
        hit_block,
        final_state: state,
    })
}

/// Runs until the target producer's share first reaches `1 - ε`, checking
/// block 1 (the initial stakes) and the state after each of up to
/// `max_blocks` opportunities.
pub fn run_until_centralized<S: UniformSource + ?Sized>(
    cfg: &ProcessConfig,
    max_blocks: u64,
    rng: &mut S,
) -> Result<CentralizationRun, ProcessError> {
    run_tracked(cfg, max_blocks, StopRule::FirstHit, rng)
}

/// [`run_until_centralized`] with a choice of [`StopRule`].
pub fn run_tracked<S: UniformSource + ?Sized>(
    cfg: &ProcessConfig,
    max_blocks: u64,
    stop: StopRule,
    rng: &mut S,
) -> Result<CentralizationRun, ProcessError> {
    track(cfg, max_blocks, stop, |state| step(state, cfg, rng).map(|_| ()))
}
