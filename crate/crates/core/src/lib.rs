//! Centralization forces among heterogeneous block producers.
//!
//! * [`tullock`]: equilibrium market shares of the one-shot staking game and
//!   the `(γ, k)`-competitiveness bound on the largest share.
//! * [`staking`]: the proportional-selection staking process (a generalized
//!   Pólya urn), its continuous-time Yule embedding, coupling runs and the
//!   block-count bounds for ε-centralization.
//! * [`pbs`]: proposer-builder separation as a symmetric first-price auction
//!   among builders, with proposer private building.
//! * [`distributions`]: reward distributions, MHR/FOSD predicates and order
//!   statistics used by the auction model.
//! * [`experiment`]: seeded, schedule-independent experiment runner that backs
//!   the `bpcent` binary.

pub mod distributions;
pub mod experiment;
pub mod pbs;
pub mod quadrature;
pub mod rng;
pub mod staking;
pub mod tullock;

pub use distributions::DistributionSpec;
pub use rng::RandomStream;
