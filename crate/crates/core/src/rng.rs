//! Seeded random streams and deterministic seed derivation.
//!
//! Every stochastic routine in the crate consumes a [`RandomStream`]. Streams
//! are single-owner; parallel work derives one stream per run (or per batch)
//! through [`derive_seed`], so results never depend on scheduling.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// 2^-53, the spacing of the uniform grid produced by [`RandomStream::uniform`].
pub const UNIFORM_STEP: f64 = 1.0 / (1u64 << 53) as f64;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of run `index` under `master`: the `(index + 1)`-th output of a
/// SplitMix64 counter stream started at `master`.
///
/// The construction is pinned by golden tests; changing it changes every
/// published table.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    mix64(master.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// A reproducible stream of uniform variates.
#[derive(Debug, Clone)]
pub struct RandomStream {
    inner: ChaCha8Rng,
}

impl RandomStream {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Stream for run `index` of an experiment seeded with `master`.
    pub fn for_run(master: u64, index: u64) -> Self {
        Self::from_seed(derive_seed(master, index))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Integer `m` in `[0, 2^53)`; the matching uniform is `m * 2^-53`.
    pub fn uniform_bits(&mut self) -> u64 {
        self.inner.next_u64() >> 11
    }

    /// Uniform variate in `[0, 1)` on the 2^-53 grid.
    pub fn uniform(&mut self) -> f64 {
        self.uniform_bits() as f64 * UNIFORM_STEP
    }

    /// Uniform integer in `[0, n)`.
    pub fn below(&mut self, n: u64) -> u64 {
        self.inner.gen_range(0..n)
    }

    /// Exponential variate with the given rate, by inversion.
    pub fn exponential(&mut self, rate: f64) -> f64 {
        -(-self.uniform()).ln_1p() / rate
    }

    /// Fresh seed drawn from this stream, for handing to a child stream.
    pub fn fork_seed(&mut self) -> u64 {
        self.inner.next_u64()
    }
}

/// A scripted stream for replaying hand-chosen draws in tests and examples.
///
/// Uniforms are rounded to the 2^-53 grid, returned in order, and then the
/// script cycles.
#[derive(Debug, Clone)]
pub struct ScriptedUniforms {
    draws: Vec<f64>,
    pos: usize,
}

impl ScriptedUniforms {
    pub fn new(draws: Vec<f64>) -> Self {
        assert!(!draws.is_empty(), "scripted stream needs at least one draw");
        Self { draws, pos: 0 }
    }
}

/// Source of uniform variates on the 2^-53 grid.
///
/// Engines take `&mut impl UniformSource` so scripted draws can replace the
/// seeded stream.
pub trait UniformSource {
    /// Integer `m` in `[0, 2^53)`; the variate is `m * 2^-53`.
    fn uniform_bits(&mut self) -> u64;

    fn uniform(&mut self) -> f64 {
        self.uniform_bits() as f64 * UNIFORM_STEP
    }
}

impl UniformSource for RandomStream {
    fn uniform_bits(&mut self) -> u64 {
        RandomStream::uniform_bits(self)
    }
}

impl UniformSource for ScriptedUniforms {
    fn uniform_bits(&mut self) -> u64 {
        let u = self.draws[self.pos % self.draws.len()];
        self.pos += 1;
        let m = (u.clamp(0.0, 1.0) * (1u64 << 53) as f64).round() as u64;
        m.min((1u64 << 53) - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derive_seed_is_pinned() {
        // Golden values: any change to the construction must be deliberate.
        assert_eq!(derive_seed(0, 0), mix64(GOLDEN_GAMMA));
        assert_eq!(derive_seed(0, 0), 0xE220_A839_7B1D_CDAF);
        assert_eq!(derive_seed(42, 7), mix64(42u64.wrapping_add(8u64.wrapping_mul(GOLDEN_GAMMA))));
    }

    #[test]
    fn distinct_runs_get_distinct_seeds() {
        let seeds: std::collections::HashSet<u64> = (0..10_000).map(|i| derive_seed(1, i)).collect();
        assert_eq!(seeds.len(), 10_000);
    }

    #[test]
    fn same_seed_same_stream() {
        let mut a = RandomStream::from_seed(9);
        let mut b = RandomStream::from_seed(9);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn uniform_in_unit_interval() {
        let mut s = RandomStream::from_seed(3);
        for _ in 0..10_000 {
            let u = s.uniform();
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn scripted_round_trips_grid_values() {
        let mut s = ScriptedUniforms::new(vec![0.8, 0.1]);
        for want in [0.8, 0.1, 0.8] {
            assert!((UniformSource::uniform(&mut s) - want).abs() <= UNIFORM_STEP);
        }
    }
}
