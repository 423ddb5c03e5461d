//! Continuous-time embedding: every unit of stake carries an independent
//! rate-1 exponential clock, and when a clock rings its owner gains `μ_i r`.
//! Each producer's stake then grows as an independent Yule process, and the
//! sequence of states at ring times has the law of the discrete process.
//!
//! [`run_continuous`] simulates ring order only: by memorylessness the next
//! ring belongs to a uniformly random coin (here, quantum). Timestamps are
//! generated only by [`run_continuous_timed`].

use super::engine::{track, CentralizationRun, StopRule};
use super::{ProcessConfig, ProcessError, StakeState};
use crate::rng::RandomStream;

fn ring(state: &mut StakeState, cfg: &ProcessConfig, rng: &mut RandomStream) -> Result<(), ProcessError> {
    let coin = rng.below(state.total_quanta());
    let mut cum = 0u64;
    let mut owner = 0;
    for (i, &s) in state.stake_quanta().iter().enumerate() {
        cum += s;
        if coin < cum {
            owner = i;
            break;
        }
    }
    let steps = state.history_len() + 1;
    state.credit(owner, cfg.reward_quanta()[owner], steps)
}

/// State after `until_rings` rings.
pub fn run_continuous(
    cfg: &ProcessConfig,
    until_rings: u64,
    rng: &mut RandomStream,
) -> Result<StakeState, ProcessError> {
    let mut state = cfg.initial_state();
    for _ in 0..until_rings {
        ring(&mut state, cfg, rng)?;
    }
    Ok(state)
}

/// Ring-order counterpart of [`super::run_tracked`], one opportunity per ring.
pub fn run_continuous_tracked(
    cfg: &ProcessConfig,
    max_rings: u64,
    stop: StopRule,
    rng: &mut RandomStream,
) -> Result<CentralizationRun, ProcessError> {
    track(cfg, max_rings, stop, |state| ring(state, cfg, rng))
}

/// State at continuous time `until_time`, with the number of rings so far.
///
/// The aggregate ring rate is the total stake in currency units.
pub fn run_continuous_timed(
    cfg: &ProcessConfig,
    until_time: f64,
    rng: &mut RandomStream,
) -> Result<(StakeState, u64), ProcessError> {
    let mut state = cfg.initial_state();
    let mut now = 0.0;
    loop {
        let rate = state.total_quanta() as f64 * cfg.quantum();
        now += rng.exponential(rate);
        if now > until_time {
            let rings = state.history_len();
            return Ok((state, rings));
        }
        ring(&mut state, cfg, rng)?;
    }
}
