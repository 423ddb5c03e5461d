//! Experiment orchestration behind the `bpcent` binary.
//!
//! Every experiment is described by an [`ExperimentConfig`] and produces a
//! [`ResultTable`]. Independent runs get their own stream seeded with
//! `derive_seed(master_seed, run_index)` and are collected in run order, so
//! the table does not depend on the number of worker threads.

mod config;
mod table;

pub use config::{parse_entries, Engine, ExperimentConfig, ExperimentKind, FieldError, Params, PbsParams, Report, StakingParams};
pub use table::{format_sig, Cell, Provenance, ResultTable, SIGNIFICANT_DIGITS};

use std::path::PathBuf;

use rayon::prelude::*;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::distributions::expected_order_statistic;
use crate::pbs::{simulate_rewards, theoretical_ratio_cap, RewardSummary};
use crate::rng::{derive_seed, RandomStream};
use crate::staking::{
    bounds_from_parts, run_continuous_tracked, run_tracked, theorem_bounds, BoundInputs, CentralizationRun,
};
use crate::tullock::{
    gamma_profile, max_share_bound, solve_equilibrium, CompetitivenessProfile, MultiplierProfile, SECURITY_THRESHOLD,
};

/// Environment variable naming the directory for outputs without an explicit
/// `output_path`.
pub const OUTPUT_DIR_ENV: &str = "BPCENT_OUTPUT_DIR";

pub const TOOL_VERSION: &str = concat!("bpcent ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration:{}", list(.0))]
    Validation(Vec<FieldError>),
    #[error("run {run}: {message}")]
    Runtime { run: u64, message: String },
    #[error("cannot write {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn list(errors: &[FieldError]) -> String {
    errors.iter().map(|e| format!("\n  {e}")).collect()
}

impl ExperimentError {
    /// Process exit code: 2 for invalid configs, 3 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) => 2,
            Self::Runtime { .. } | Self::Io { .. } => 3,
        }
    }

    fn runtime(run: u64, e: impl ToString) -> Self {
        Self::Runtime {
            run,
            message: e.to_string(),
        }
    }
}

/// SHA-256 of the canonical config text (without `output_path`).
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    Sha256::digest(cfg.identity_text().as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// The file an experiment writes to: its `output_path`, or `<kind>.csv` in
/// the directory named by [`OUTPUT_DIR_ENV`] (default: the working directory).
pub fn resolve_output_path(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output_path.clone().unwrap_or_else(|| {
        let dir = std::env::var_os(OUTPUT_DIR_ENV).map_or_else(|| PathBuf::from("."), PathBuf::from);
        dir.join(format!("{}.csv", cfg.kind()))
    })
}

/// Runs the experiment and writes its table atomically.
pub fn execute(cfg: &ExperimentConfig, jobs: usize) -> Result<(ResultTable, PathBuf), ExperimentError> {
    let table = run_experiment(cfg, jobs)?;
    let path = resolve_output_path(cfg);
    table.write_atomic(&path).map_err(|source| ExperimentError::Io {
        path: path.clone(),
        source,
    })?;
    Ok((table, path))
}

/// Validates `cfg` and computes its table with up to `jobs` worker threads.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: usize) -> Result<ResultTable, ExperimentError> {
    cfg.validate().map_err(ExperimentError::Validation)?;
    let prov = Provenance {
        tool_version: TOOL_VERSION.to_string(),
        config_hash: config_hash(cfg),
        master_seed: cfg.master_seed,
    };
    let jobs = jobs.max(1);
    match &cfg.params {
        Params::Equilibrium { mu, r, c } => equilibrium(prov, mu, *r, *c),
        Params::FigureEcon { gamma_steps, ks } => Ok(figure_econ(prov, *gamma_steps, ks)),
        Params::Simulate {
            staking,
            max_blocks,
            engine,
            stop,
            report,
        } => simulate(prov, cfg, staking, *max_blocks, (*engine, *stop, *report), jobs),
        Params::Bounds { staking } => bounds(prov, staking),
        Params::BoundSweep {
            rho,
            epsilon,
            mu2,
            r,
            pi1,
            gaps,
        } => Ok(bound_sweep(prov, *rho, *epsilon, *mu2, *r, *pi1, gaps)),
        Params::Pbs(p) => pbs(prov, cfg.master_seed, p, jobs),
        Params::PbsSweep(p) => pbs_sweep(prov, cfg.master_seed, p, jobs),
        Params::Compose { .. } => compose_pbs_to_equilibrium(cfg, jobs),
    }
}

fn in_pool<T: Send>(jobs: usize, work: impl FnOnce() -> T + Send) -> T {
    if jobs <= 1 {
        return work();
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .expect("failed to start worker threads")
        .install(work)
}

fn equilibrium(prov: Provenance, mu: &[f64], r: f64, c: f64) -> Result<ResultTable, ExperimentError> {
    let profile = MultiplierProfile::relaxed(mu.to_vec(), r, c).map_err(|e| ExperimentError::runtime(0, e))?;
    let alloc = solve_equilibrium(&profile).map_err(|e| ExperimentError::runtime(0, e))?;
    let mut t = ResultTable::new(prov, &["index", "mu", "x", "pi"]);
    for (i, &m) in mu.iter().enumerate() {
        t.push(vec![(i + 1).into(), m.into(), alloc.x[i].into(), alloc.pi[i].into()]);
    }
    Ok(t)
}

fn figure_econ(prov: Provenance, steps: usize, ks: &[usize]) -> ResultTable {
    let mut t = ResultTable::new(
        prov,
        &["gamma", "k", "max_share_bound", "security_threshold", "exceeds_threshold"],
    );
    for &k in ks {
        for i in 0..=steps {
            let gamma = i as f64 / steps as f64;
            let bound = max_share_bound(CompetitivenessProfile { gamma, k });
            t.push(vec![
                gamma.into(),
                k.into(),
                bound.into(),
                SECURITY_THRESHOLD.into(),
                (bound > SECURITY_THRESHOLD).into(),
            ]);
        }
    }
    t
}

fn simulate(
    prov: Provenance,
    cfg: &ExperimentConfig,
    staking: &StakingParams,
    max_blocks: u64,
    (engine, stop, report): (Engine, crate::staking::StopRule, Report),
    jobs: usize,
) -> Result<ResultTable, ExperimentError> {
    let process = staking.process().map_err(|e| ExperimentError::runtime(0, e))?;
    let target = process.target();
    let eps = process.epsilon();
    let one_run = |run: u64| -> Result<(u64, CentralizationRun), ExperimentError> {
        let seed = derive_seed(cfg.master_seed, run);
        let mut rng = RandomStream::from_seed(seed);
        let out = match engine {
            Engine::Discrete => run_tracked(&process, max_blocks, stop, &mut rng),
            Engine::Continuous => run_continuous_tracked(&process, max_blocks, stop, &mut rng),
        };
        out.map(|o| (seed, o)).map_err(|e| ExperimentError::runtime(run, e))
    };
    if report == Report::Summary {
        let outcomes: Vec<Result<RunDigest, ExperimentError>> = in_pool(jobs, || {
            (0..cfg.runs)
                .into_par_iter()
                .map(|run| {
                    one_run(run).map(|(_, o)| {
                        let s = &o.final_state;
                        (o.hit_block, s.is_centralized_at(target, eps), s.share(target))
                    })
                })
                .collect()
        });
        return summarize_runs(prov, outcomes);
    }
    let results: Vec<_> = in_pool(jobs, || (0..cfg.runs).into_par_iter().map(one_run).collect());

    let mut columns: Vec<String> = ["run", "seed", "hit", "blocks_to_hit", "final_block", "centralized_final"]
        .map(String::from)
        .to_vec();
    columns.extend((1..=process.n()).map(|i| format!("share_{i}")));
    let names: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut t = ResultTable::new(prov, &names);
    for (run, res) in results.into_iter().enumerate() {
        let (seed, out) = res?;
        let state = &out.final_state;
        let mut row: Vec<Cell> = vec![
            run.into(),
            seed.into(),
            out.hit().into(),
            out.hit_block.into(),
            state.t().into(),
            state.is_centralized_at(target, eps).into(),
        ];
        row.extend(state.shares().into_iter().map(Cell::from));
        t.push(row);
    }
    Ok(t)
}

/// First hit block, centralized at the horizon, final target share.
type RunDigest = (Option<u64>, bool, f64);

fn summarize_runs(
    prov: Provenance,
    outcomes: Vec<Result<RunDigest, ExperimentError>>,
) -> Result<ResultTable, ExperimentError> {
    let (mut hits, mut central, mut hit_blocks, mut share_sum) = (0u64, 0u64, 0f64, 0f64);
    let runs = outcomes.len() as u64;
    for o in outcomes {
        let (hit, c, share) = o?;
        if let Some(b) = hit {
            hits += 1;
            hit_blocks += b as f64;
        }
        central += c as u64;
        share_sum += share;
    }
    let n = runs as f64;
    let se = |k: u64| {
        let p = k as f64 / n;
        (p * (1.0 - p) / n).sqrt()
    };
    let mut t = ResultTable::new(
        prov,
        &[
            "runs",
            "hits",
            "hit_fraction",
            "hit_std_error",
            "centralized_final",
            "centralized_final_fraction",
            "centralized_final_std_error",
            "mean_blocks_to_hit",
            "mean_target_share",
        ],
    );
    t.push(vec![
        runs.into(),
        hits.into(),
        (hits as f64 / n).into(),
        se(hits).into(),
        central.into(),
        (central as f64 / n).into(),
        se(central).into(),
        (hits > 0).then(|| hit_blocks / hits as f64).into(),
        (share_sum / n).into(),
    ]);
    Ok(t)
}

const BOUNDS_COLUMNS: [&str; 8] = [
    "upper_blocks",
    "lower_blocks",
    "prob_cap",
    "beta",
    "rho",
    "critical_time",
    "upper_applicable",
    "lower_vacuous",
];

fn bounds(prov: Provenance, staking: &StakingParams) -> Result<ResultTable, ExperimentError> {
    let process = staking.process().map_err(|e| ExperimentError::runtime(0, e))?;
    let b = theorem_bounds(&process).map_err(|e| ExperimentError::runtime(0, e))?;
    let mut t = ResultTable::new(prov, &BOUNDS_COLUMNS);
    t.push(vec![
        b.upper_blocks.into(),
        b.lower_blocks.into(),
        b.prob_cap.into(),
        b.beta.into(),
        b.rho.into(),
        b.critical_time.into(),
        b.upper_applicable.into(),
        b.lower_vacuous.into(),
    ]);
    Ok(t)
}

fn bound_sweep(prov: Provenance, rho: f64, eps: f64, mu2: f64, r: f64, pi1: f64, gaps: &[f64]) -> ResultTable {
    let eval = |gap: f64| {
        bounds_from_parts(
            BoundInputs {
                mu1: mu2 + gap,
                mu2,
                mun: mu2,
                r,
                pi1,
                pi_rest: rho * pi1,
            },
            eps,
        )
    };
    let widest = gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let reference = eval(widest).upper_blocks;
    let mut t = ResultTable::new(
        prov,
        &[
            "mu1_minus_mu2",
            "mu1",
            "mu2",
            "upper_blocks",
            "lower_blocks",
            "critical_time",
            "upper_ratio_to_widest",
        ],
    );
    for &gap in gaps {
        let b = eval(gap);
        t.push(vec![
            gap.into(),
            (mu2 + gap).into(),
            mu2.into(),
            b.upper_blocks.into(),
            b.lower_blocks.into(),
            b.critical_time.into(),
            (b.upper_blocks / reference).into(),
        ]);
    }
    t
}

fn summarize(p: &PbsParams, k: usize, seed: u64, jobs: usize, run: u64) -> Result<RewardSummary, ExperimentError> {
    let eco = p.ecosystem(k).map_err(|e| ExperimentError::runtime(run, e))?;
    simulate_rewards(&p.proposers, &eco, p.trials, p.tie, seed, jobs).map_err(|e| ExperimentError::runtime(run, e))
}

fn pbs(prov: Provenance, seed: u64, p: &PbsParams, jobs: usize) -> Result<ResultTable, ExperimentError> {
    let k = p.builders[0];
    let s = summarize(p, k, seed, jobs, 0)?;
    if s.labels.len() >= 2 {
        s.ratio().map_err(|e| ExperimentError::runtime(0, e))?;
    }
    let min = s.rewards.iter().map(|e| e.mean).fold(f64::INFINITY, f64::min);
    if !(min > 0.0) {
        return Err(ExperimentError::runtime(0, "minimum mean reward is 0; ratio undefined"));
    }
    let mut t = ResultTable::new(
        prov,
        &[
            "label",
            "mean_reward",
            "std_error",
            "ratio_to_min",
            "theoretical_cap",
            "private_rate",
            "mean_winning_bid",
            "winning_bid_std_error",
            "mean_builder_profit",
        ],
    );
    for (i, label) in s.labels.iter().enumerate() {
        t.push(vec![
            label.as_str().into(),
            s.rewards[i].mean.into(),
            s.rewards[i].std_error.into(),
            (s.rewards[i].mean / min).into(),
            theoretical_ratio_cap(k).into(),
            s.private_rate[i].into(),
            s.winning_bid.mean.into(),
            s.winning_bid.std_error.into(),
            (s.top_value_mean - s.winning_bid.mean).into(),
        ]);
    }
    Ok(t)
}

fn pbs_sweep(prov: Provenance, seed: u64, p: &PbsParams, jobs: usize) -> Result<ResultTable, ExperimentError> {
    let mut t = ResultTable::new(
        prov,
        &[
            "k",
            "ratio",
            "ratio_std_error",
            "theoretical_cap",
            "best",
            "worst",
            "mean_winning_bid",
            "winning_bid_std_error",
            "expected_second_value",
            "mean_top_value",
        ],
    );
    for (idx, &k) in p.builders.iter().enumerate() {
        let run = idx as u64;
        let s = summarize(p, k, derive_seed(seed, run), jobs, run)?;
        let ratio = s.ratio().map_err(|e| ExperimentError::runtime(run, e))?;
        let second = expected_order_statistic(&p.dy, k, 2).map_err(|e| ExperimentError::runtime(run, e))?;
        t.push(vec![
            k.into(),
            ratio.ratio.into(),
            ratio.std_error.into(),
            theoretical_ratio_cap(k).into(),
            s.labels[ratio.best].as_str().into(),
            s.labels[ratio.worst].as_str().into(),
            s.winning_bid.mean.into(),
            s.winning_bid.std_error.into(),
            second.into(),
            s.top_value_mean.into(),
        ]);
    }
    Ok(t)
}

/// Turns simulated PBS rewards into staking-game multipliers (each mean
/// reward over the smallest) and solves the resulting equilibrium.
///
/// Every row repeats the equilibrium's largest share next to the bound at the
/// measured competitiveness: among the `(γ_k, k)` pairs the profile
/// satisfies, the one with the smallest bound.
pub fn compose_pbs_to_equilibrium(cfg: &ExperimentConfig, jobs: usize) -> Result<ResultTable, ExperimentError> {
    let Params::Compose { pbs, r, c } = &cfg.params else {
        return Err(ExperimentError::Validation(vec![FieldError {
            field: "kind".into(),
            message: format!("expected `compose`, found `{}`", cfg.kind()),
        }]));
    };
    cfg.validate().map_err(ExperimentError::Validation)?;
    let prov = Provenance {
        tool_version: TOOL_VERSION.to_string(),
        config_hash: config_hash(cfg),
        master_seed: cfg.master_seed,
    };
    let s = summarize(pbs, pbs.builders[0], cfg.master_seed, jobs.max(1), 0)?;
    let min = s.rewards.iter().map(|e| e.mean).fold(f64::INFINITY, f64::min);
    if !(min > 0.0) {
        return Err(ExperimentError::runtime(0, "minimum mean reward is 0; multipliers undefined"));
    }
    let mu: Vec<f64> = s.rewards.iter().map(|e| e.mean / min).collect();
    let profile = MultiplierProfile::relaxed(mu.clone(), *r, *c).map_err(|e| ExperimentError::runtime(0, e))?;
    let alloc = solve_equilibrium(&profile).map_err(|e| ExperimentError::runtime(0, e))?;
    let gp = gamma_profile(&profile).map_err(|e| ExperimentError::runtime(0, e))?;
    let gamma = gp.pairs[gp.best_k - 1].0;
    let mut t = ResultTable::new(
        prov,
        &[
            "label",
            "mean_reward",
            "std_error",
            "mu",
            "x",
            "pi",
            "max_share",
            "gamma",
            "bound_k",
            "max_share_bound",
        ],
    );
    for (i, label) in s.labels.iter().enumerate() {
        t.push(vec![
            label.as_str().into(),
            s.rewards[i].mean.into(),
            s.rewards[i].std_error.into(),
            mu[i].into(),
            alloc.x[i].into(),
            alloc.pi[i].into(),
            alloc.max_share().into(),
            gamma.into(),
            gp.best_k.into(),
            gp.best_bound.into(),
        ]);
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(text: &str) -> ResultTable {
        run_experiment(&ExperimentConfig::parse(text).unwrap(), 1).unwrap()
    }

    #[test]
    fn equilibrium_rows() {
        let t = run("kind = equilibrium\nmu = 2,1\n");
        assert_eq!(t.rows().len(), 2);
        assert!((t.value(0, "x").unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert!((t.value(0, "pi").unwrap() - 4.0 / 9.0).abs() < 1e-12);
        assert!((t.value(1, "x").unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!((t.value(1, "pi").unwrap() - 2.0 / 9.0).abs() < 1e-12);
        let csv = t.to_csv_string();
        assert!(csv.ends_with("index,mu,x,pi\n1,2,0.666666666667,0.444444444444\n2,1,0.333333333333,0.222222222222\n"));
    }

    #[test]
    fn figure_grid() {
        let t = run("kind = figure-econ\n");
        assert_eq!(t.rows().len(), 505);
        assert_eq!(t.columns().len(), 5);
        let row = (0..505)
            .find(|&i| t.value(i, "k") == Some(10.0) && (t.value(i, "gamma").unwrap() - 0.9).abs() < 1e-12)
            .unwrap();
        assert!((t.value(row, "max_share_bound").unwrap() - 0.174312).abs() < 1e-6);
    }

    #[test]
    fn hash_ignores_output_path() {
        let a = ExperimentConfig::parse("kind = equilibrium\nmu = 2,1\n").unwrap();
        let b = a.clone().with_output("/tmp/elsewhere.csv");
        assert_eq!(config_hash(&a), config_hash(&b));
        assert_ne!(config_hash(&a), config_hash(&a.clone().with_seed(1)));
        assert_eq!(config_hash(&a).len(), 64);
    }

    #[test]
    fn exit_codes() {
        let bad = ExperimentConfig::new(Params::Equilibrium {
            mu: vec![1.0],
            r: 1.0,
            c: 1.0,
        });
        let err = run_experiment(&bad, 1).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("mu: need at least two producers"), "{err}");

        // Doubling stake every block overflows the quantum counter.
        let text = "kind = simulate\nmu = 1,1\ninitial = 1e6,1e6\nepsilon = 0.001\nquantum = 1e-6\nr = 1e7\nmax_blocks = 100000000\nruns = 2\n";
        let err = run_experiment(&ExperimentConfig::parse(text).unwrap(), 1).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().starts_with("run 0:"), "{err}");
    }

    #[test]
    fn simulate_is_schedule_independent() {
        let text = "kind = simulate\nmu = 1.5,1\ninitial = 5,5\nepsilon = 0.3\nmax_blocks = 2000\nruns = 40\nmaster_seed = 4\n";
        let cfg = ExperimentConfig::parse(text).unwrap();
        let a = run_experiment(&cfg, 1).unwrap().to_csv_string();
        let b = run_experiment(&cfg, 8).unwrap().to_csv_string();
        assert_eq!(a, b);
        let t = run_experiment(&cfg, 3).unwrap();
        assert_eq!(t.value(3, "seed"), Some(derive_seed(4, 3) as f64));
    }

    #[test]
    fn idealized_compose_is_uniform() {
        let text = "kind = compose\nbuilders = 5\ndy = exp(rate=1)\ntrials = 1000\nproposer.a = point(a=0)\nproposer.b = point(a=0)\nproposer.c = point(a=0)\n";
        let t = run(text);
        for i in 0..3 {
            assert_eq!(t.value(i, "mu"), Some(1.0));
            assert!((t.value(i, "x").unwrap() - 1.0 / 3.0).abs() < 1e-12);
        }
        assert!((t.value(0, "max_share_bound").unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }
}
