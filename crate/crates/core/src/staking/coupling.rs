//! Two staking processes driven by one uniform stream.
//!
//! Both processes start from the same stakes and, at every block, compare the
//! same draw `y_t` against their own cumulative-share partitions (target
//! first). If every rival of the target is at least as strong in the altered
//! process as the strongest rival in the base process, the target's share in
//! the base process dominates pathwise; if every altered rival is at most the
//! weakest base multiplier, the domination reverses.

use super::{ProcessConfig, ProcessError, StakeState};
use crate::rng::UniformSource;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingDirection {
    /// `μ' = μ`: the paths coincide.
    Identical,
    /// Rivals strengthened: `x_{1,t} >= x'_{1,t}` on every path.
    RivalsStronger,
    /// Rivals weakened: `x_{1,t} <= x'_{1,t}` on every path.
    RivalsWeaker,
}

/// Target stake and total stake, in quanta, at blocks `1..=blocks+1`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledPaths {
    pub direction: CouplingDirection,
    pub path: Vec<(u64, u64)>,
    pub path_alt: Vec<(u64, u64)>,
}

impl CoupledPaths {
    /// Target shares along the base path.
    pub fn shares(&self) -> Vec<f64> {
        self.path.iter().map(|&(s, t)| s as f64 / t as f64).collect()
    }

    pub fn shares_alt(&self) -> Vec<f64> {
        self.path_alt.iter().map(|&(s, t)| s as f64 / t as f64).collect()
    }

    /// Index of the first block at which the promised ordering fails, compared
    /// exactly as rationals.
    pub fn first_violation(&self) -> Option<usize> {
        self.path.iter().zip(&self.path_alt).position(|(&(s, t), &(s2, t2))| {
            let base = s as u128 * t2 as u128;
            let alt = s2 as u128 * t as u128;
            match self.direction {
                CouplingDirection::Identical => base != alt,
                CouplingDirection::RivalsStronger => base < alt,
                CouplingDirection::RivalsWeaker => base > alt,
            }
        })
    }

    pub fn dominance_holds(&self) -> bool {
        self.first_violation().is_none()
    }
}

fn classify(cfg: &ProcessConfig, mu_alt: &[f64]) -> Result<CouplingDirection, ProcessError> {
    let mu = cfg.mu();
    let t = cfg.target();
    if mu_alt.len() != mu.len() {
        return Err(ProcessError::CouplingPremise(format!(
            "{} alternative multipliers for {} producers",
            mu_alt.len(),
            mu.len()
        )));
    }
    if mu_alt == mu {
        return Ok(CouplingDirection::Identical);
    }
    if mu_alt[t] != mu[t] {
        return Err(ProcessError::CouplingPremise(format!(
            "target multiplier must be unchanged ({} vs {})",
            mu[t], mu_alt[t]
        )));
    }
    let rivals = |v: &[f64]| v.iter().enumerate().filter(|(i, _)| *i != t).map(|(_, m)| *m).collect::<Vec<_>>();
    let base = rivals(mu);
    let alt = rivals(mu_alt);
    let max_rival = base.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min_all = mu.iter().copied().fold(f64::INFINITY, f64::min);
    if alt.iter().all(|&m| m >= max_rival) {
        Ok(CouplingDirection::RivalsStronger)
    } else if alt.iter().all(|&m| m <= min_all) {
        Ok(CouplingDirection::RivalsWeaker)
    } else {
        Err(ProcessError::CouplingPremise(format!(
            "every altered rival must be >= {max_rival} (strongest rival) or every one <= {min_all} (weakest multiplier)"
        )))
    }
}

/// Runs the base process and the one with multipliers `mu_alt` on shared draws.
pub fn coupled_run<S: UniformSource + ?Sized>(
    cfg: &ProcessConfig,
    mu_alt: &[f64],
    blocks: u64,
    rng: &mut S,
) -> Result<CoupledPaths, ProcessError> {
    let direction = classify(cfg, mu_alt)?;
    let alt_cfg = cfg.with_mu(mu_alt.to_vec())?;
    let target = cfg.target();
    let mut a = cfg.initial_state();
    let mut b = alt_cfg.initial_state();
    let snap = |s: &StakeState| (s.stake_quanta()[target], s.total_quanta());
    let mut path = Vec::with_capacity(blocks as usize + 1);
    let mut path_alt = Vec::with_capacity(blocks as usize + 1);
    path.push(snap(&a));
    path_alt.push(snap(&b));
    for k in 0..blocks {
        let m = rng.uniform_bits();
        let i = a.select(cfg.partition_order(), m);
        let j = b.select(alt_cfg.partition_order(), m);
        a.credit(i, cfg.reward_quanta()[i], k + 1)?;
        b.credit(j, alt_cfg.reward_quanta()[j], k + 1)?;
        path.push(snap(&a));
        path_alt.push(snap(&b));
    }
    Ok(CoupledPaths {
        direction,
        path,
        path_alt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RandomStream;
    use crate::staking::tests::cfg;

    #[test]
    fn identical_multipliers_identical_paths() {
        let c = cfg(&[2.0, 1.0, 0.5], 1.0, &[1.0, 1.0, 1.0], 0.5);
        let p = coupled_run(&c, &[2.0, 1.0, 0.5], 500, &mut RandomStream::from_seed(1)).unwrap();
        assert_eq!(p.direction, CouplingDirection::Identical);
        assert_eq!(p.path, p.path_alt);
    }

    #[test]
    fn raised_rival_dominated() {
        let c = cfg(&[2.0, 1.0, 0.5], 1.0, &[1.0, 1.0, 1.0], 0.5);
        for seed in 0..20 {
            let p = coupled_run(&c, &[2.0, 1.0, 1.0], 2000, &mut RandomStream::from_seed(seed)).unwrap();
            assert_eq!(p.direction, CouplingDirection::RivalsStronger);
            assert!(p.dominance_holds(), "seed {seed} fails at {:?}", p.first_violation());
        }
    }

    #[test]
    fn lowered_rivals_dominate() {
        let c = cfg(&[2.0, 1.0, 0.5], 1.0, &[1.0, 1.0, 1.0], 0.5);
        for seed in 0..20 {
            let p = coupled_run(&c, &[2.0, 0.5, 0.25], 2000, &mut RandomStream::from_seed(seed)).unwrap();
            assert_eq!(p.direction, CouplingDirection::RivalsWeaker);
            assert!(p.dominance_holds());
        }
    }

    #[test]
    fn premise_violations_rejected() {
        let c = cfg(&[2.0, 1.0, 0.5], 1.0, &[1.0, 1.0, 1.0], 0.5);
        let mut rng = RandomStream::from_seed(0);
        for alt in [[2.0, 0.75, 1.0], [3.0, 1.0, 1.0]] {
            assert!(matches!(coupled_run(&c, &alt, 10, &mut rng), Err(ProcessError::CouplingPremise(_))));
        }
        assert!(coupled_run(&c, &[2.0, 1.0], 10, &mut rng).is_err());
    }
}
