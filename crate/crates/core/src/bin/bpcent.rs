//! `bpcent`: equilibria, staking-process simulations and PBS auction
//! experiments, written as CSV tables.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use bp_centralization::experiment::{self, ExperimentConfig, ExperimentError, FieldError};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "bpcent", version, about = "Centralization experiments for heterogeneous block producers")]
struct Cli {
    /// Config file (`key = value` lines); its keys override flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<String>,
    /// Output file; `-` for stdout. Defaults to `<kind>.csv` in
    /// `$BPCENT_OUTPUT_DIR` or the working directory.
    #[arg(long, global = true)]
    output: Option<String>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described entirely by `--config`.
    Run,
    /// Equilibrium shares and stakes of the staking game.
    Equilibrium(EquilibriumArgs),
    /// Largest-share bound over the (γ, k) grid.
    FigureEcon(FigureArgs),
    /// Seeded runs of the staking process until ε-centralization.
    Simulate(SimulateArgs),
    /// Block-count bounds for ε-centralization.
    Bounds(StakingArgs),
    /// Upper bound as the multiplier gap varies.
    BoundSweep(SweepArgs),
    /// Proposer rewards under a builder auction.
    Pbs(PbsArgs),
    /// Reward-ratio curve over builder counts.
    PbsSweep(PbsArgs),
    /// Feed PBS rewards into the staking-game equilibrium.
    Compose(ComposeArgs),
}

#[derive(Args)]
struct EquilibriumArgs {
    /// Multipliers, comma separated.
    #[arg(long)]
    mu: Option<String>,
    #[arg(long)]
    r: Option<String>,
    #[arg(long)]
    c: Option<String>,
}

#[derive(Args)]
struct FigureArgs {
    #[arg(long)]
    gamma_steps: Option<String>,
    /// Values of k, comma separated.
    #[arg(long)]
    ks: Option<String>,
}

#[derive(Args)]
struct StakingArgs {
    #[arg(long)]
    mu: Option<String>,
    #[arg(long)]
    r: Option<String>,
    /// Initial stakes, comma separated.
    #[arg(long)]
    initial: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    /// 1-based target producer.
    #[arg(long)]
    target: Option<String>,
    /// Stake resolution.
    #[arg(long)]
    quantum: Option<String>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    staking: StakingArgs,
    #[arg(long)]
    runs: Option<String>,
    #[arg(long)]
    max_blocks: Option<String>,
    /// `discrete` or `continuous`.
    #[arg(long)]
    engine: Option<String>,
    /// `first-hit` or `horizon`.
    #[arg(long)]
    stop: Option<String>,
    /// `runs` (a row per run) or `summary`.
    #[arg(long)]
    report: Option<String>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    rho: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long)]
    mu2: Option<String>,
    #[arg(long)]
    r: Option<String>,
    #[arg(long)]
    pi1: Option<String>,
    /// Values of μ1 - μ2, comma separated.
    #[arg(long)]
    gaps: Option<String>,
}

#[derive(Args)]
struct PbsArgs {
    /// Number of builders (a comma-separated list for `pbs-sweep`).
    #[arg(long)]
    builders: Option<String>,
    /// Builder value distribution, e.g. `exp(rate=1)`.
    #[arg(long)]
    dy: Option<String>,
    /// `<label>=<distribution>`, repeatable.
    #[arg(long)]
    proposer: Vec<String>,
    #[arg(long)]
    trials: Option<String>,
    /// `enforce` or `waive` the MHR and dominance checks.
    #[arg(long)]
    regime: Option<String>,
    /// `private` or `builder` block on ties.
    #[arg(long)]
    tie: Option<String>,
}

#[derive(Args)]
struct ComposeArgs {
    #[command(flatten)]
    pbs: PbsArgs,
    #[arg(long)]
    r: Option<String>,
    #[arg(long)]
    c: Option<String>,
}

struct Entries(Vec<(String, String)>);

impl Entries {
    fn put(&mut self, key: &str, value: &Option<String>) {
        if let Some(v) = value {
            self.set(key.to_string(), v.clone());
        }
    }

    fn set(&mut self, key: String, value: String) {
        match self.0.iter_mut().find(|(k, _)| *k == key) {
            Some(slot) => slot.1 = value,
            None => self.0.push((key, value)),
        }
    }

    fn staking(&mut self, a: &StakingArgs) {
        self.put("mu", &a.mu);
        self.put("r", &a.r);
        self.put("initial", &a.initial);
        self.put("epsilon", &a.epsilon);
        self.put("target", &a.target);
        self.put("quantum", &a.quantum);
    }

    fn pbs(&mut self, a: &PbsArgs) -> Result<(), FieldError> {
        self.put("builders", &a.builders);
        self.put("dy", &a.dy);
        for p in &a.proposer {
            let (label, spec) = p.split_once('=').ok_or_else(|| FieldError {
                field: "--proposer".into(),
                message: format!("expected `<label>=<distribution>`, found `{p}`"),
            })?;
            self.set(format!("proposer.{}", label.trim()), spec.trim().to_string());
        }
        self.put("trials", &a.trials);
        self.put("regime", &a.regime);
        self.put("tie", &a.tie);
        Ok(())
    }
}

fn flag_entries(cli: &Cli) -> Result<Entries, FieldError> {
    let mut e = Entries(Vec::new());
    let kind = match &cli.command {
        Command::Run => None,
        Command::Equilibrium(a) => {
            e.put("mu", &a.mu);
            e.put("r", &a.r);
            e.put("c", &a.c);
            Some("equilibrium")
        }
        Command::FigureEcon(a) => {
            e.put("gamma_steps", &a.gamma_steps);
            e.put("ks", &a.ks);
            Some("figure-econ")
        }
        Command::Simulate(a) => {
            e.staking(&a.staking);
            e.put("runs", &a.runs);
            e.put("max_blocks", &a.max_blocks);
            e.put("engine", &a.engine);
            e.put("stop", &a.stop);
            e.put("report", &a.report);
            Some("simulate")
        }
        Command::Bounds(a) => {
            e.staking(a);
            Some("bounds")
        }
        Command::BoundSweep(a) => {
            e.put("rho", &a.rho);
            e.put("epsilon", &a.epsilon);
            e.put("mu2", &a.mu2);
            e.put("r", &a.r);
            e.put("pi1", &a.pi1);
            e.put("gaps", &a.gaps);
            Some("bound-sweep")
        }
        Command::Pbs(a) => {
            e.pbs(a)?;
            Some("pbs")
        }
        Command::PbsSweep(a) => {
            e.pbs(a)?;
            Some("pbs-sweep")
        }
        Command::Compose(a) => {
            e.pbs(&a.pbs)?;
            e.put("r", &a.r);
            e.put("c", &a.c);
            Some("compose")
        }
    };
    if let Some(kind) = kind {
        e.0.insert(0, ("kind".into(), kind.into()));
    }
    e.put("master_seed", &cli.seed);
    if let Some(out) = cli.output.as_ref().filter(|o| *o != "-") {
        e.set("output_path".into(), out.clone());
    }
    Ok(e)
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, Vec<FieldError>> {
    let mut entries = flag_entries(cli).map_err(|e| vec![e])?;
    let subcommand_kind = entries.0.iter().find(|(k, _)| k == "kind").map(|(_, v)| v.clone());
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path).map_err(|e| {
            vec![FieldError {
                field: "--config".into(),
                message: format!("cannot read {}: {e}", path.display()),
            }]
        })?;
        let file_entries = experiment::parse_entries(&text)?;
        for (k, v) in file_entries {
            entries.set(k, v);
        }
    } else if subcommand_kind.is_none() {
        return Err(vec![FieldError {
            field: "--config".into(),
            message: "`run` needs a config file".into(),
        }]);
    }
    let cfg = ExperimentConfig::from_entries(entries.0)?;
    if let Some(kind) = subcommand_kind {
        if cfg.kind().as_str() != kind {
            return Err(vec![FieldError {
                field: "kind".into(),
                message: format!("config file describes `{}` but the subcommand is `{kind}`", cfg.kind()),
            }]);
        }
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Format::Csv = cli.format;
    let cfg = match load_config(&cli) {
        Ok(cfg) => cfg,
        Err(errors) => return fail(&ExperimentError::Validation(errors)),
    };
    let to_stdout = cli.output.as_deref() == Some("-");
    let result = if to_stdout {
        experiment::run_experiment(&cfg, cli.jobs).and_then(|t| {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            t.write_csv(&mut lock)
                .and_then(|_| lock.flush())
                .map_err(|source| ExperimentError::Io {
                    path: PathBuf::from("-"),
                    source,
                })
        })
    } else {
        experiment::execute(&cfg, cli.jobs).map(|(t, path)| {
            eprintln!("wrote {} rows to {}", t.rows().len(), path.display());
        })
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}

fn fail(e: &ExperimentError) -> ExitCode {
    eprintln!("bpcent: {e}");
    ExitCode::from(e.exit_code() as u8)
}
