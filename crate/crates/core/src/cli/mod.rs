//! Command-line front end: config ingestion, experiment dispatch and
//! deterministic report emission.

pub mod config;
mod report;
mod verify;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::error::Error;
use crate::partitions::{joint_distribution, partition_entropy, Partition, PartitionSpec, TimePattern};
use crate::pattern::{family_sweep, h_star_profile, p_star_with_budget, sequence_entropy_profile, DEFAULT_NODE_BUDGET};
use crate::sensitivity::{
    adversarial_family, construct_witnesses, mean_sensitivity_estimate, pair_separation_density, sensitivity_sweep,
    Construction, Notion, SensitivityReport, TargetSet, Verdict,
};
use crate::systems::rng::derive_seed;
use crate::systems::System;

pub use config::{ExperimentConfig, Params, Scale};
use report::{Exactness, Output, Unit};

#[derive(Debug, Parser)]
#[command(name = "maxpat", version, about = "Maximal pattern entropy and sensitivity experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment description (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for stochastic commands; overrides `seed` in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory receiving report.json and the CSV tables.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Report entropies in bits instead of nats.
    #[arg(long, global = true)]
    pub log2: bool,
    /// Node budget of pattern searches; overrides `params.budget`.
    #[arg(long, global = true)]
    pub budget: Option<u64>,
    /// Record wall-clock time in the report (breaks byte reproducibility).
    #[arg(long, global = true)]
    pub timing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Partition entropy, and optionally a joint law and a sequence-entropy profile.
    Entropy,
    /// Best k-pattern within a horizon.
    Pattern,
    /// p*(k)/k profile, or a sweep over word partitions when `l_max` is set.
    Hstar,
    /// Strong, weak or mean sensitivity over a family of target sets.
    Sensitivity,
    /// Separation densities of independent random pairs.
    Pairs,
    /// Fixed scenario suite with hard and exploratory checks.
    Verify,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Entropy => "entropy",
            Command::Pattern => "pattern",
            Command::Hstar => "hstar",
            Command::Sensitivity => "sensitivity",
            Command::Pairs => "pairs",
            Command::Verify => "verify",
        }
    }
}

/// A failed run: message for stderr and the process exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn internal(message: impl Into<String>) -> Self {
        Failure {
            code: 3,
            message: message.into(),
        }
    }
}

/// 2 for exhausted sampling budgets, 1 for everything the user can fix.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Sampling { .. } => 2,
        _ => 1,
    }
}

fn ctx(what: &str) -> impl Fn(Error) -> Failure + '_ {
    move |e| Failure {
        code: exit_code(&e),
        message: format!("{what}: {e}"),
    }
}

/// Runs a parsed command line and returns the exit code.
pub fn run(cli: &Cli) -> Result<i32, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path).map_err(ctx("config"))?,
        None if cli.command == Command::Verify => ExperimentConfig::default(),
        None => {
            return Err(Failure {
                code: 1,
                message: format!("`{}` needs --config <path>", cli.command.name()),
            })
        }
    };
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    if cli.budget.is_some() {
        cfg.params.budget = cli.budget;
    }
    let unit = if cli.log2 { Unit::Bits } else { Unit::Nats };
    let started = Instant::now();
    let mut out = Output::new(cli.command.name(), unit, &cfg);
    let code = match cli.command {
        Command::Entropy => entropy(&cfg, &mut out)?,
        Command::Pattern => pattern(&cfg, &mut out)?,
        Command::Hstar => hstar(&cfg, &mut out)?,
        Command::Sensitivity => sensitivity(&cfg, &mut out)?,
        Command::Pairs => pairs(&cfg, &mut out)?,
        Command::Verify => verify::run(&cfg, &mut out)?,
    };
    if cli.timing {
        out.wall_clock_seconds = Some(started.elapsed().as_secs_f64());
    }
    out.write(&cli.out)?;
    Ok(code)
}

fn setup(cfg: &ExperimentConfig) -> Result<(System, Partition), Failure> {
    let sys = System::new(cfg.system().map_err(ctx("config"))?.clone()).map_err(ctx("system"))?;
    let part = Partition::resolve(&sys, cfg.partition().map_err(ctx("config"))?).map_err(ctx("partition"))?;
    Ok((sys, part))
}

fn need<T: Copy>(v: Option<T>, name: &str) -> Result<T, Failure> {
    config::need(v, name).map_err(ctx("config"))
}

fn seed_of(cfg: &ExperimentConfig) -> Result<u64, Failure> {
    cfg.seed.ok_or_else(|| Failure {
        code: 1,
        message: "config: stochastic commands need a seed (`seed = ...` or --seed)".into(),
    })
}

fn budget_of(cfg: &ExperimentConfig) -> u64 {
    cfg.params.budget.unwrap_or(DEFAULT_NODE_BUDGET)
}

#[derive(Serialize)]
struct JointView {
    pattern: Vec<usize>,
    support: usize,
    entropy: f64,
}

#[derive(Serialize)]
struct EntropyResults {
    exactness: Exactness,
    atom_count: usize,
    atom_masses: Vec<f64>,
    partition_entropy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    joint: Option<JointView>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sequence_profile: Option<Vec<f64>>,
}

fn entropy(cfg: &ExperimentConfig, out: &mut Output) -> Result<i32, Failure> {
    let (sys, part) = setup(cfg)?;
    let u = out.unit;
    let joint = match &cfg.params.pattern {
        Some(times) => {
            let pattern = TimePattern::new(times.clone()).map_err(ctx("params.pattern"))?;
            let j = joint_distribution(&sys, &part, &pattern).map_err(ctx("entropy"))?;
            Some(JointView {
                pattern: times.clone(),
                support: j.dist.support_size(),
                entropy: u.of(j.entropy()),
            })
        }
        None => None,
    };
    let sequence_profile = match &cfg.params.gamma {
        Some(gamma) => Some(
            sequence_entropy_profile(&sys, &part, gamma)
                .map_err(ctx("entropy"))?
                .into_iter()
                .map(|h| u.of(h))
                .collect(),
        ),
        None => None,
    };
    out.set_results(&EntropyResults {
        exactness: Exactness::of_system(&sys),
        atom_count: part.atom_count(),
        atom_masses: part.atom_masses().to_vec(),
        partition_entropy: u.of(partition_entropy(&part)),
        joint,
        sequence_profile,
    })?;
    Ok(0)
}

#[derive(Serialize)]
struct PatternResults {
    exactness: Exactness,
    k: usize,
    horizon: usize,
    best_value: f64,
    best_pattern: Vec<usize>,
    nodes_expanded: u64,
    exact_within_horizon: bool,
}

fn pattern(cfg: &ExperimentConfig, out: &mut Output) -> Result<i32, Failure> {
    let (sys, part) = setup(cfg)?;
    let k = need(cfg.params.k, "k")?;
    let horizon = need(cfg.params.horizon, "horizon")?;
    let r = p_star_with_budget(&sys, &part, k, horizon, budget_of(cfg)).map_err(ctx("pattern"))?;
    out.set_results(&PatternResults {
        exactness: Exactness::of_search(&sys, r.exact_within_horizon),
        k,
        horizon,
        best_value: out.unit.of(r.best_value),
        best_pattern: r.best_pattern.times().to_vec(),
        nodes_expanded: r.nodes_expanded,
        exact_within_horizon: r.exact_within_horizon,
    })?;
    Ok(0)
}

#[derive(Serialize)]
struct RowView {
    k: usize,
    p_star: f64,
    p_star_over_k: f64,
    exact: bool,
    pattern: Vec<usize>,
    nodes_expanded: u64,
}

#[derive(Serialize)]
struct ProfileView {
    partition: PartitionSpec,
    horizon: usize,
    exactness: Exactness,
    infimum_proxy: f64,
    per_k: Vec<RowView>,
}

#[derive(Serialize)]
struct HStarResults {
    #[serde(skip_serializing_if = "Option::is_none")]
    family_sup: Option<f64>,
    profiles: Vec<ProfileView>,
}

fn profile_view(sys: &System, p: &crate::pattern::HStarProfile, u: Unit) -> ProfileView {
    ProfileView {
        partition: p.partition.clone(),
        horizon: p.horizon,
        exactness: Exactness::of_search(sys, p.exact),
        infimum_proxy: u.of(p.infimum_proxy),
        per_k: p
            .per_k
            .iter()
            .map(|r| RowView {
                k: r.k,
                p_star: u.of(r.p_star),
                p_star_over_k: u.of(r.p_star_over_k),
                exact: r.exact,
                pattern: r.pattern.times().to_vec(),
                nodes_expanded: r.nodes_expanded,
            })
            .collect(),
    }
}

fn hstar(cfg: &ExperimentConfig, out: &mut Output) -> Result<i32, Failure> {
    let k_max = need(cfg.params.k_max, "k_max")?;
    let horizon = need(cfg.params.horizon, "horizon")?;
    let budget = budget_of(cfg);
    let u = out.unit;
    let results = match cfg.params.l_max {
        Some(l_max) => {
            let sys = System::new(cfg.system().map_err(ctx("config"))?.clone()).map_err(ctx("system"))?;
            let sweep = family_sweep(&sys, l_max, k_max, horizon, budget).map_err(ctx("hstar"))?;
            for (i, p) in sweep.profiles.iter().enumerate() {
                out.hstar_csv(&format!("hstar_L{}.csv", i + 1), p)?;
            }
            HStarResults {
                family_sup: Some(u.of(sweep.sup)),
                profiles: sweep.profiles.iter().map(|p| profile_view(&sys, p, u)).collect(),
            }
        }
        None => {
            let (sys, part) = setup(cfg)?;
            let p = h_star_profile(&sys, &part, k_max, horizon, budget).map_err(ctx("hstar"))?;
            out.hstar_csv("hstar.csv", &p)?;
            HStarResults {
                family_sup: None,
                profiles: vec![profile_view(&sys, &p, u)],
            }
        }
    };
    out.set_results(&results)?;
    Ok(0)
}

#[derive(Serialize)]
struct SetResult {
    target: TargetSet,
    report: SensitivityReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    construction: Option<Construction>,
}

#[derive(Serialize)]
struct SensitivityResults {
    exactness: Exactness,
    notion: Notion,
    n: usize,
    window: usize,
    trials: usize,
    /// Smallest per-set estimate over the family.
    delta_estimate: f64,
    verdict: Verdict,
    per_set: Vec<SetResult>,
}

fn sensitivity(cfg: &ExperimentConfig, out: &mut Output) -> Result<i32, Failure> {
    let p = &cfg.params;
    let notion = p.notion.unwrap_or(Notion::Strong);
    if notion == Notion::Pair {
        return pairs(cfg, out);
    }
    let seed = seed_of(cfg)?;
    let (sys, part) = setup(cfg)?;
    let n = p.n.unwrap_or(2);
    let window = need(p.window, "window")?;
    let trials = p.trials.unwrap_or(1);
    let family = if cfg.targets.is_empty() {
        adversarial_family(&sys, p.levels.unwrap_or(4), derive_seed(seed, u64::MAX)).map_err(ctx("targets"))?
    } else {
        cfg.targets
            .iter()
            .map(|t| TargetSet::new(&sys, t.clone()))
            .collect::<crate::Result<Vec<_>>>()
            .map_err(ctx("targets"))?
    };
    let mut per_set = Vec::with_capacity(family.len());
    match notion {
        Notion::Mean => {
            for (i, a) in family.iter().enumerate() {
                let report = mean_sensitivity_estimate(&sys, a, n, window, trials, derive_seed(seed, i as u64))
                    .map_err(ctx("sensitivity"))?;
                per_set.push(SetResult {
                    target: a.clone(),
                    report,
                    construction: None,
                });
            }
        }
        _ => {
            let sweep = sensitivity_sweep(&sys, &part, &family, notion, n, window, trials, seed)
                .map_err(ctx("sensitivity"))?;
            for e in sweep.per_set {
                per_set.push(SetResult {
                    target: e.target,
                    report: e.report,
                    construction: None,
                });
            }
        }
    }
    if p.construct.unwrap_or(false) {
        let horizon = p.horizon.unwrap_or(32);
        let samples = p.sample_budget.unwrap_or(100_000);
        for (i, entry) in per_set.iter_mut().enumerate() {
            let mut c = construct_witnesses(
                &sys,
                &part,
                &entry.target,
                n,
                horizon,
                derive_seed(seed, (1 << 32) + i as u64),
                budget_of(cfg),
                samples,
            )
            .map_err(ctx("construct"))?;
            if let Construction::Found { pattern_entropy, .. } = &mut c {
                *pattern_entropy = out.unit.of(*pattern_entropy);
            }
            entry.construction = Some(c);
        }
    }
    for (i, e) in per_set.iter().enumerate() {
        if notion == Notion::Mean {
            out.cesaro_rows(i, &e.report);
        } else {
            out.density_rows(i, &e.report);
        }
    }
    let delta = per_set
        .iter()
        .map(|e| e.report.delta_estimate)
        .fold(f64::INFINITY, f64::min);
    out.set_results(&SensitivityResults {
        exactness: Exactness::Estimated,
        notion,
        n,
        window,
        trials,
        delta_estimate: delta,
        verdict: if delta > 0.0 {
            Verdict::Witnessed
        } else {
            Verdict::NotWitnessedAtBudget
        },
        per_set,
    })?;
    Ok(0)
}

#[derive(Serialize)]
struct PairResults {
    exactness: Exactness,
    report: SensitivityReport,
}

fn pairs(cfg: &ExperimentConfig, out: &mut Output) -> Result<i32, Failure> {
    let seed = seed_of(cfg)?;
    let (sys, part) = setup(cfg)?;
    let window = need(cfg.params.window, "window")?;
    let trials = cfg.params.trials.unwrap_or(1);
    let report = pair_separation_density(&sys, &part, trials, window, seed).map_err(ctx("pairs"))?;
    out.density_rows(0, &report);
    out.set_results(&PairResults {
        exactness: Exactness::Estimated,
        report,
    })?;
    Ok(0)
}

/// Parses `args`, runs, and maps every outcome to an exit code. Help and
/// version requests exit 0; malformed command lines exit 1.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    std::fs::write(path, bytes).map_err(|e| Failure::internal(format!("cannot write {}: {e}", path.display())))
}
