//! Flat `key = value` experiment configuration.
//!
//! Lines are `key = value`; blank lines and lines starting with `#` are
//! ignored. Lists are comma-separated, distributions use the
//! `family(param=value,...)` syntax, and PBS proposers are given one per key
//! as `proposer.<label> = <distribution>` (their order is preserved).
//! [`ExperimentConfig::to_text`] writes the canonical form: every key,
//! including defaulted ones, in a fixed order.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::distributions::DistributionSpec;
use crate::pbs::{BuilderEcosystem, ProposerSpec, RegimeCheck, TieRule};
use crate::staking::{ProcessConfig, StopRule, DEFAULT_QUANTUM};
use crate::tullock::{MultiplierProfile, CompetitivenessProfile};

/// A validation diagnostic for one config key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Equilibrium,
    FigureEcon,
    Simulate,
    Bounds,
    BoundSweep,
    Pbs,
    PbsSweep,
    Compose,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        Self::Equilibrium,
        Self::FigureEcon,
        Self::Simulate,
        Self::Bounds,
        Self::BoundSweep,
        Self::Pbs,
        Self::PbsSweep,
        Self::Compose,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Equilibrium => "equilibrium",
            Self::FigureEcon => "figure-econ",
            Self::Simulate => "simulate",
            Self::Bounds => "bounds",
            Self::BoundSweep => "bound-sweep",
            Self::Pbs => "pbs",
            Self::PbsSweep => "pbs-sweep",
            Self::Compose => "compose",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown experiment kind `{s}`"))
    }
}

/// Which engine `simulate` drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Engine {
    #[default]
    Discrete,
    /// Ring order of the continuous-time embedding; one ring per opportunity.
    Continuous,
}

/// What `simulate` reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Report {
    /// One row per run.
    #[default]
    Runs,
    /// One row of frequencies over all runs.
    Summary,
}

/// Parameters shared by `simulate` and `bounds`.
#[derive(Debug, Clone, PartialEq)]
pub struct StakingParams {
    pub mu: Vec<f64>,
    pub r: f64,
    pub initial: Vec<f64>,
    pub epsilon: f64,
    /// 1-based target producer.
    pub target: usize,
    pub quantum: f64,
}

impl StakingParams {
    pub fn process(&self) -> Result<ProcessConfig, String> {
        let profile = MultiplierProfile::relaxed(self.mu.clone(), self.r, 1.0).map_err(|e| e.to_string())?;
        if self.target == 0 {
            return Err("target is 1-based".into());
        }
        ProcessConfig::new(&profile, self.initial.clone(), self.epsilon)
            .and_then(|c| c.with_target(self.target - 1))
            .and_then(|c| c.with_quantum(self.quantum))
            .map_err(|e| e.to_string())
    }
}

/// Parameters shared by the auction kinds. `pbs` and `compose` use exactly
/// one builder count.
#[derive(Debug, Clone, PartialEq)]
pub struct PbsParams {
    pub builders: Vec<usize>,
    pub dy: DistributionSpec,
    pub proposers: Vec<ProposerSpec>,
    pub trials: usize,
    pub regime: RegimeCheck,
    pub tie: TieRule,
}

impl PbsParams {
    pub fn ecosystem(&self, k: usize) -> Result<BuilderEcosystem, String> {
        BuilderEcosystem::new(k, self.dy.clone()).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Params {
    Equilibrium {
        mu: Vec<f64>,
        r: f64,
        c: f64,
    },
    FigureEcon {
        /// γ runs over `0, 1/steps, ..., 1`.
        gamma_steps: usize,
        ks: Vec<usize>,
    },
    Simulate {
        staking: StakingParams,
        max_blocks: u64,
        engine: Engine,
        stop: StopRule,
        report: Report,
    },
    Bounds {
        staking: StakingParams,
    },
    BoundSweep {
        rho: f64,
        epsilon: f64,
        mu2: f64,
        r: f64,
        pi1: f64,
        gaps: Vec<f64>,
    },
    Pbs(PbsParams),
    PbsSweep(PbsParams),
    Compose {
        pbs: PbsParams,
        r: f64,
        c: f64,
    },
}

/// A complete experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub runs: u64,
    pub output_path: Option<PathBuf>,
    pub params: Params,
}

impl ExperimentConfig {
    pub fn new(params: Params) -> Self {
        Self {
            master_seed: 0,
            runs: 1,
            output_path: None,
            params,
        }
    }

    pub fn with_seed(self, master_seed: u64) -> Self {
        Self { master_seed, ..self }
    }

    pub fn with_runs(self, runs: u64) -> Self {
        Self { runs, ..self }
    }

    pub fn with_output(self, path: impl Into<PathBuf>) -> Self {
        Self {
            output_path: Some(path.into()),
            ..self
        }
    }

    pub fn kind(&self) -> ExperimentKind {
        match self.params {
            Params::Equilibrium { .. } => ExperimentKind::Equilibrium,
            Params::FigureEcon { .. } => ExperimentKind::FigureEcon,
            Params::Simulate { .. } => ExperimentKind::Simulate,
            Params::Bounds { .. } => ExperimentKind::Bounds,
            Params::BoundSweep { .. } => ExperimentKind::BoundSweep,
            Params::Pbs(_) => ExperimentKind::Pbs,
            Params::PbsSweep(_) => ExperimentKind::PbsSweep,
            Params::Compose { .. } => ExperimentKind::Compose,
        }
    }

    /// Parses config text; all problems are reported together.
    pub fn parse(text: &str) -> Result<Self, Vec<FieldError>> {
        let (entries, mut errors) = split_lines(text);
        match Self::from_entries(entries) {
            Ok(cfg) if errors.is_empty() => Ok(cfg),
            Ok(_) => Err(errors),
            Err(more) => {
                errors.extend(more);
                Err(errors)
            }
        }
    }

    /// Builds a config from ordered key/value pairs.
    pub fn from_entries(entries: Vec<(String, String)>) -> Result<Self, Vec<FieldError>> {
        let mut f = Fields::new(entries);
        let kind = f.required("kind", |s| s.parse::<ExperimentKind>());
        let master_seed = f.or("master_seed", 0u64, parse_u64);
        let runs = f.or("runs", 1u64, parse_u64);
        let output_path = f.optional("output_path", |s| Ok::<_, String>(PathBuf::from(s)));
        let Some(kind) = kind else {
            f.finish_unknown();
            return Err(f.errors);
        };
        let params = match kind {
            ExperimentKind::Equilibrium => Params::Equilibrium {
                mu: f.required("mu", parse_f64_list).unwrap_or_default(),
                r: f.or("r", 1.0, parse_f64),
                c: f.or("c", 1.0, parse_f64),
            },
            ExperimentKind::FigureEcon => Params::FigureEcon {
                gamma_steps: f.or("gamma_steps", 100, parse_usize),
                ks: f.or("ks", vec![1, 2, 5, 10, 100], parse_usize_list),
            },
            ExperimentKind::Simulate => Params::Simulate {
                staking: staking_params(&mut f),
                max_blocks: f.required("max_blocks", parse_u64).unwrap_or(0),
                engine: f.or("engine", Engine::Discrete, parse_engine),
                stop: f.or("stop", StopRule::FirstHit, parse_stop),
                report: f.or("report", Report::Runs, |s| match s {
                    "runs" => Ok(Report::Runs),
                    "summary" => Ok(Report::Summary),
                    _ => Err(format!("expected `runs` or `summary`, found `{s}`")),
                }),
            },
            ExperimentKind::Bounds => Params::Bounds {
                staking: staking_params(&mut f),
            },
            ExperimentKind::BoundSweep => Params::BoundSweep {
                rho: f.or("rho", 9.0, parse_f64),
                epsilon: f.or("epsilon", 2.0 / 3.0, parse_f64),
                mu2: f.or("mu2", 1.0, parse_f64),
                r: f.or("r", 1.0, parse_f64),
                pi1: f.or("pi1", 1.0, parse_f64),
                gaps: f.or("gaps", vec![0.1, 0.2, 0.3, 0.4, 0.5], parse_f64_list),
            },
            ExperimentKind::Pbs => Params::Pbs(pbs_params(&mut f)),
            ExperimentKind::PbsSweep => Params::PbsSweep(pbs_params(&mut f)),
            ExperimentKind::Compose => Params::Compose {
                pbs: pbs_params(&mut f),
                r: f.or("r", 1.0, parse_f64),
                c: f.or("c", 1.0, parse_f64),
            },
        };
        f.finish_unknown();
        let cfg = Self {
            master_seed,
            runs,
            output_path,
            params,
        };
        if !f.errors.is_empty() {
            return Err(f.errors);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every module-level precondition, collecting all failures.
    pub fn validate(&self) -> Result<(), Vec<FieldError>> {
        let mut errors = Vec::new();
        let mut check = |field: &str, r: Result<(), String>| {
            if let Err(message) = r {
                errors.push(FieldError {
                    field: field.to_string(),
                    message,
                });
            }
        };
        match &self.params {
            Params::Equilibrium { mu, r, c } => {
                check("mu", MultiplierProfile::relaxed(mu.clone(), *r, *c).map(|_| ()).map_err(|e| e.to_string()));
                check("mu", (mu.len() >= 2).then_some(()).ok_or("need at least two producers".into()));
                check(
                    "mu",
                    mu.iter().any(|&m| m > 0.0).then_some(()).ok_or("no positive multiplier".into()),
                );
            }
            Params::FigureEcon { gamma_steps, ks } => {
                check("gamma_steps", (*gamma_steps >= 1).then_some(()).ok_or("must be at least 1".into()));
                check("ks", (!ks.is_empty()).then_some(()).ok_or("empty list".into()));
                for &k in ks {
                    check("ks", CompetitivenessProfile::new(1.0, k).map(|_| ()).map_err(|e| e.to_string()));
                }
            }
            Params::Simulate {
                staking, max_blocks, ..
            } => {
                check("mu", staking.process().map(|_| ()));
                check("runs", (self.runs >= 1).then_some(()).ok_or("must be at least 1".into()));
                let _ = max_blocks;
            }
            Params::Bounds { staking } => {
                check("mu", staking.process().map(|_| ()));
                check("mu", (staking.mu.len() >= 2).then_some(()).ok_or("need at least two producers".into()));
            }
            Params::BoundSweep {
                rho,
                epsilon,
                mu2,
                r,
                pi1,
                gaps,
            } => {
                let pos = |x: f64| (x.is_finite() && x > 0.0).then_some(()).ok_or(format!("{x} must be positive"));
                check("rho", pos(*rho));
                check("mu2", pos(*mu2));
                check("r", pos(*r));
                check("pi1", pos(*pi1));
                check(
                    "epsilon",
                    (*epsilon > 0.0 && *epsilon < 1.0).then_some(()).ok_or(format!("{epsilon} must lie in (0, 1)")),
                );
                check("gaps", (!gaps.is_empty()).then_some(()).ok_or("empty list".into()));
                for &g in gaps {
                    check("gaps", pos(g));
                }
            }
            Params::Pbs(p) => validate_pbs(p, true, 1, &mut check),
            Params::PbsSweep(p) => validate_pbs(p, false, 2, &mut check),
            Params::Compose { pbs, r, c } => {
                validate_pbs(pbs, true, 2, &mut check);
                check("r", MultiplierProfile::relaxed(vec![1.0], *r, *c).map(|_| ()).map_err(|e| e.to_string()));
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }

    /// Canonical text form; `parse(to_text())` reproduces `self`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        put("kind", self.kind().to_string());
        put("master_seed", self.master_seed.to_string());
        put("runs", self.runs.to_string());
        if let Some(p) = &self.output_path {
            put("output_path", p.display().to_string());
        }
        for (k, v) in self.param_entries() {
            put(&k, v);
        }
        out
    }

    /// Canonical text without `output_path`, which does not affect results.
    pub(crate) fn identity_text(&self) -> String {
        Self {
            output_path: None,
            ..self.clone()
        }
        .to_text()
    }

    fn param_entries(&self) -> Vec<(String, String)> {
        let mut e: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, v: String| e.push((k.to_string(), v));
        match &self.params {
            Params::Equilibrium { mu, r, c } => {
                put("mu", join(mu));
                put("r", r.to_string());
                put("c", c.to_string());
            }
            Params::FigureEcon { gamma_steps, ks } => {
                put("gamma_steps", gamma_steps.to_string());
                put("ks", join(ks));
            }
            Params::Simulate {
                staking,
                max_blocks,
                engine,
                stop,
                report,
            } => {
                staking_entries(staking, &mut put);
                put("max_blocks", max_blocks.to_string());
                put("engine", match engine {
                    Engine::Discrete => "discrete",
                    Engine::Continuous => "continuous",
                }
                .into());
                put("stop", match stop {
                    StopRule::FirstHit => "first-hit",
                    StopRule::Horizon => "horizon",
                }
                .into());
                put("report", match report {
                    Report::Runs => "runs",
                    Report::Summary => "summary",
                }
                .into());
            }
            Params::Bounds { staking } => staking_entries(staking, &mut put),
            Params::BoundSweep {
                rho,
                epsilon,
                mu2,
                r,
                pi1,
                gaps,
            } => {
                put("rho", rho.to_string());
                put("epsilon", epsilon.to_string());
                put("mu2", mu2.to_string());
                put("r", r.to_string());
                put("pi1", pi1.to_string());
                put("gaps", join(gaps));
            }
            Params::Pbs(p) | Params::PbsSweep(p) => pbs_entries(p, &mut put),
            Params::Compose { pbs, r, c } => {
                pbs_entries(pbs, &mut put);
                put("r", r.to_string());
                put("c", c.to_string());
            }
        }
        e
    }
}

/// Splits config text into ordered `(key, value)` pairs without
/// interpreting them.
pub fn parse_entries(text: &str) -> Result<Vec<(String, String)>, Vec<FieldError>> {
    match split_lines(text) {
        (entries, errors) if errors.is_empty() => Ok(entries),
        (_, errors) => Err(errors),
    }
}

fn split_lines(text: &str) -> (Vec<(String, String)>, Vec<FieldError>) {
    let mut entries = Vec::new();
    let mut errors = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match line.split_once('=') {
            Some((k, v)) => entries.push((k.trim().to_string(), v.trim().to_string())),
            None => errors.push(FieldError {
                field: format!("line {}", no + 1),
                message: format!("expected `key = value`, found `{line}`"),
            }),
        }
    }
    (entries, errors)
}

fn staking_entries(s: &StakingParams, put: &mut impl FnMut(&str, String)) {
    put("mu", join(&s.mu));
    put("r", s.r.to_string());
    put("initial", join(&s.initial));
    put("epsilon", s.epsilon.to_string());
    put("target", s.target.to_string());
    put("quantum", s.quantum.to_string());
}

fn pbs_entries(p: &PbsParams, put: &mut impl FnMut(&str, String)) {
    put("builders", join(&p.builders));
    put("dy", p.dy.to_string());
    for prop in &p.proposers {
        put(&format!("proposer.{}", prop.label), prop.build_dist.to_string());
    }
    put("trials", p.trials.to_string());
    put("regime", match p.regime {
        RegimeCheck::Enforce => "enforce",
        RegimeCheck::Waive => "waive",
    }
    .into());
    put("tie", match p.tie {
        TieRule::PrivateOnTie => "private",
        TieRule::BuilderOnTie => "builder",
    }
    .into());
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn validate_pbs(p: &PbsParams, single_k: bool, min_props: usize, check: &mut impl FnMut(&str, Result<(), String>)) {
    if single_k && p.builders.len() != 1 {
        check("builders", Err(format!("expected one builder count, got {}", p.builders.len())));
    }
    if p.builders.is_empty() {
        check("builders", Err("empty list".into()));
    }
    check(
        "proposer",
        (p.proposers.len() >= min_props)
            .then_some(())
            .ok_or(format!("need at least {min_props} `proposer.<label>` entries")),
    );
    check("trials", (p.trials >= 1).then_some(()).ok_or("must be at least 1".into()));
    for prop in &p.proposers {
        if !prop.build_dist.has_finite_mean() {
            check(&format!("proposer.{}", prop.label), Err("distribution has a divergent mean".into()));
        }
    }
    for &k in &p.builders {
        match p.ecosystem(k) {
            Err(e) => check("builders", Err(e)),
            Ok(eco) if p.regime == RegimeCheck::Enforce && !p.proposers.is_empty() => {
                if let Err(e) = crate::pbs::check_regime(&p.proposers, &eco) {
                    check("regime", Err(format!("{e}")));
                    return;
                }
            }
            Ok(_) => {}
        }
    }
}

fn staking_params(f: &mut Fields) -> StakingParams {
    StakingParams {
        mu: f.required("mu", parse_f64_list).unwrap_or_default(),
        r: f.or("r", 1.0, parse_f64),
        initial: f.required("initial", parse_f64_list).unwrap_or_default(),
        epsilon: f.required("epsilon", parse_f64).unwrap_or(0.5),
        target: f.or("target", 1, parse_usize),
        quantum: f.or("quantum", DEFAULT_QUANTUM, parse_f64),
    }
}

fn pbs_params(f: &mut Fields) -> PbsParams {
    let proposers = f
        .take_prefixed("proposer.")
        .into_iter()
        .filter_map(|(label, v)| match v.parse::<DistributionSpec>() {
            Ok(d) if !label.is_empty() => Some(ProposerSpec::new(label, d)),
            Ok(_) => {
                f.error("proposer.", "empty proposer label".into());
                None
            }
            Err(e) => {
                f.error(&format!("proposer.{label}"), e.to_string());
                None
            }
        })
        .collect();
    PbsParams {
        builders: f.required("builders", parse_usize_list).unwrap_or_default(),
        dy: f
            .required("dy", |s| s.parse::<DistributionSpec>().map_err(|e| e.to_string()))
            .unwrap_or(DistributionSpec::PointMass { at: 0.0 }),
        proposers,
        trials: f.or("trials", 100_000, parse_usize),
        regime: f.or("regime", RegimeCheck::Enforce, |s| match s {
            "enforce" => Ok(RegimeCheck::Enforce),
            "waive" => Ok(RegimeCheck::Waive),
            _ => Err(format!("expected `enforce` or `waive`, found `{s}`")),
        }),
        tie: f.or("tie", TieRule::PrivateOnTie, |s| match s {
            "private" => Ok(TieRule::PrivateOnTie),
            "builder" => Ok(TieRule::BuilderOnTie),
            _ => Err(format!("expected `private` or `builder`, found `{s}`")),
        }),
    }
}

fn parse_engine(s: &str) -> Result<Engine, String> {
    match s {
        "discrete" => Ok(Engine::Discrete),
        "continuous" => Ok(Engine::Continuous),
        _ => Err(format!("expected `discrete` or `continuous`, found `{s}`")),
    }
}

fn parse_stop(s: &str) -> Result<StopRule, String> {
    match s {
        "first-hit" => Ok(StopRule::FirstHit),
        "horizon" => Ok(StopRule::Horizon),
        _ => Err(format!("expected `first-hit` or `horizon`, found `{s}`")),
    }
}

fn parse_f64(s: &str) -> Result<f64, String> {
    s.parse::<f64>().map_err(|_| format!("`{s}` is not a number"))
}

fn parse_u64(s: &str) -> Result<u64, String> {
    s.parse::<u64>().map_err(|_| format!("`{s}` is not a nonnegative integer"))
}

fn parse_usize(s: &str) -> Result<usize, String> {
    s.parse::<usize>().map_err(|_| format!("`{s}` is not a nonnegative integer"))
}

fn parse_list<T>(s: &str, item: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|x| item(x.trim())).collect()
}

fn parse_f64_list(s: &str) -> Result<Vec<f64>, String> {
    parse_list(s, parse_f64)
}

fn parse_usize_list(s: &str) -> Result<Vec<usize>, String> {
    parse_list(s, parse_usize)
}

/// Ordered key/value pairs with consumption tracking and error collection.
struct Fields {
    entries: Vec<(String, Option<String>)>,
    errors: Vec<FieldError>,
}

impl Fields {
    fn new(raw: Vec<(String, String)>) -> Self {
        let mut entries: Vec<(String, Option<String>)> = Vec::new();
        let mut errors = Vec::new();
        for (k, v) in raw {
            if entries.iter().any(|(seen, _)| *seen == k) {
                errors.push(FieldError {
                    field: k,
                    message: "duplicate key".into(),
                });
            } else {
                entries.push((k, Some(v)));
            }
        }
        Self { entries, errors }
    }

    fn error(&mut self, field: &str, message: String) {
        self.errors.push(FieldError {
            field: field.to_string(),
            message,
        });
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.entries.iter_mut().find(|(k, _)| k == key).and_then(|(_, v)| v.take())
    }

    fn take_prefixed(&mut self, prefix: &str) -> Vec<(String, String)> {
        self.entries
            .iter_mut()
            .filter(|(k, v)| k.starts_with(prefix) && v.is_some())
            .map(|(k, v)| (k[prefix.len()..].to_string(), v.take().unwrap()))
            .collect()
    }

    fn optional<T, E: ToString>(&mut self, key: &str, parse: impl Fn(&str) -> Result<T, E>) -> Option<T> {
        let raw = self.take(key)?;
        match parse(&raw) {
            Ok(v) => Some(v),
            Err(e) => {
                self.error(key, e.to_string());
                None
            }
        }
    }

    fn required<T, E: ToString>(&mut self, key: &str, parse: impl Fn(&str) -> Result<T, E>) -> Option<T> {
        if !self.entries.iter().any(|(k, v)| k == key && v.is_some()) {
            self.error(key, "required key is missing".into());
            return None;
        }
        self.optional(key, parse)
    }

    fn or<T, E: ToString>(&mut self, key: &str, default: T, parse: impl Fn(&str) -> Result<T, E>) -> T {
        self.optional(key, parse).unwrap_or(default)
    }

    fn finish_unknown(&mut self) {
        let unknown: Vec<String> = self
            .entries
            .iter()
            .filter(|(_, v)| v.is_some())
            .map(|(k, _)| k.clone())
            .collect();
        for k in unknown {
            self.error(&k, "unknown key for this experiment kind".into());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_canonical() {
        let text = "
            # two-producer run
            kind = simulate
            mu = 2, 1
            initial = 1,1
            epsilon = 0.4
            max_blocks = 100
            runs = 5
            master_seed = 9
        ";
        let cfg = ExperimentConfig::parse(text).unwrap();
        let canon = cfg.to_text();
        let again = ExperimentConfig::parse(&canon).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.to_text(), canon);
        assert!(canon.starts_with("kind = simulate\nmaster_seed = 9\nruns = 5\n"));
    }

    #[test]
    fn proposers_keep_order() {
        let text = "kind = pbs\nbuilders = 3\ndy = exp(rate=1)\nproposer.zeta = point(a=0)\nproposer.alpha = exp(rate=1)\n";
        let cfg = ExperimentConfig::parse(text).unwrap();
        let Params::Pbs(p) = &cfg.params else { panic!() };
        let labels: Vec<&str> = p.proposers.iter().map(|p| p.label.as_str()).collect();
        assert_eq!(labels, ["zeta", "alpha"]);
        assert_eq!(ExperimentConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn diagnostics_are_aggregated() {
        let errs = ExperimentConfig::parse("kind = equilibrium\nr = x\nbogus = 1\nc = -1\nno equals here\n").unwrap_err();
        let fields: Vec<&str> = errs.iter().map(|e| e.field.as_str()).collect();
        assert!(fields.contains(&"line 5"), "{errs:?}");
        assert!(fields.contains(&"mu"));
        assert!(fields.contains(&"r"));
        assert!(fields.contains(&"bogus"));

        let errs = ExperimentConfig::parse("kind = equilibrium\nmu = 2,1\nc = -1\n").unwrap_err();
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].field, "mu");

        let errs = ExperimentConfig::parse("kind = nope\n").unwrap_err();
        assert_eq!(errs[0].field, "kind");
        let errs = ExperimentConfig::parse("kind = bounds\nkind = bounds\n").unwrap_err();
        assert!(errs.iter().any(|e| e.message == "duplicate key"));
    }

    #[test]
    fn module_preconditions_are_checked() {
        let errs = ExperimentConfig::parse("kind = bounds\nmu = 1.5,1\ninitial = 1,1\nepsilon = 0.5\nquantum = 0.4\n")
            .unwrap_err();
        assert_eq!(errs[0].field, "mu");
        assert!(errs[0].message.contains("quanta"), "{}", errs[0].message);

        let errs = ExperimentConfig::parse(
            "kind = pbs\nbuilders = 5\ndy = equalrev(cap=10)\nproposer.a = point(a=0)\nproposer.b = point(a=0)\n",
        )
        .unwrap_err();
        assert_eq!(errs[0].field, "regime");
        let ok = ExperimentConfig::parse(
            "kind = pbs\nbuilders = 5\ndy = equalrev(cap=10)\nregime = waive\nproposer.a = point(a=0)\nproposer.b = point(a=0)\n",
        );
        assert!(ok.is_ok());
        let errs = ExperimentConfig::parse("kind = pbs\nbuilders = 5\ndy = exp(rate=1)\nproposer.a = exp(rat=1)\n").unwrap_err();
        assert_eq!(errs[0].field, "proposer.a");
    }
}
