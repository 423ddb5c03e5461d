//! Oracles shared by the integration suites.
#![allow(dead_code)]

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

/// Exact distribution of integer stakes after `steps` proportional-selection
/// steps, by enumerating every choice path.
pub fn exact_stake_distribution(rewards: &[u64], initial: &[u64], steps: usize) -> BTreeMap<Vec<u64>, BigRational> {
    let mut layer: BTreeMap<Vec<u64>, BigRational> = BTreeMap::new();
    layer.insert(initial.to_vec(), BigRational::one());
    for _ in 0..steps {
        let mut next: BTreeMap<Vec<u64>, BigRational> = BTreeMap::new();
        for (stakes, p) in &layer {
            let total: u64 = stakes.iter().sum();
            for i in 0..stakes.len() {
                let pick = BigRational::new(BigInt::from(stakes[i]), BigInt::from(total));
                let mut s = stakes.clone();
                s[i] += rewards[i];
                *next.entry(s).or_insert_with(BigRational::zero) += p * pick;
            }
        }
        layer = next;
    }
    layer
}

/// Exact `P(share of producer `i` > threshold)` after `steps` steps.
pub fn exact_share_exceeds(rewards: &[u64], initial: &[u64], steps: usize, i: usize, threshold: (u64, u64)) -> BigRational {
    exact_stake_distribution(rewards, initial, steps)
        .into_iter()
        .filter(|(s, _)| {
            let total: u64 = s.iter().sum();
            // s_i / total > num / den
            (s[i] as u128) * (threshold.1 as u128) > (threshold.0 as u128) * (total as u128)
        })
        .fold(BigRational::zero(), |acc, (_, p)| acc + p)
}

pub fn to_f64(q: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    q.to_f64().expect("finite rational")
}

/// Water-filling objective `Σ a_i x_i (1 - x_i / 2)`.
pub fn potential(a: &[f64], x: &[f64]) -> f64 {
    a.iter().zip(x).map(|(a, x)| a * x * (1.0 - x / 2.0)).sum()
}

/// Best objective over the simplex grid with spacing `1/steps`, for n ≤ 3.
pub fn simplex_grid_max(a: &[f64], steps: usize) -> f64 {
    let h = 1.0 / steps as f64;
    match a.len() {
        2 => (0..=steps)
            .map(|i| {
                let x = i as f64 * h;
                potential(a, &[x, 1.0 - x])
            })
            .fold(f64::NEG_INFINITY, f64::max),
        3 => {
            let mut best = f64::NEG_INFINITY;
            for i in 0..=steps {
                for j in 0..=(steps - i) {
                    let x = [i as f64 * h, j as f64 * h, (steps - i - j) as f64 * h];
                    best = best.max(potential(a, &x));
                }
            }
            best
        }
        n => panic!("grid oracle supports n = 2 or 3, got {n}"),
    }
}
