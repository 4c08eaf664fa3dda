//! Command-line surface.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use t20_core::batting_opt::BattingSearchConfig;
use t20_core::bowling_opt::SaConfig;
use t20_core::profiles::ProfileStore;
use t20_core::report;
use t20_core::scenario::{load_scenario, LoadedScenario};

/// Environment variable naming a profile store directory.
pub const STORE_ENV: &str = "T20_PROFILE_STORE";

#[derive(Debug, Parser)]
#[command(name = "t20", version, about = "Win and defend probabilities, batting orders and bowling plans for T20 chases")]
pub struct Cli {
    /// Profile store directory written by `profiles build`.
    #[arg(long, global = true, env = STORE_ENV)]
    pub store: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build per-phase player profiles from a ball-by-ball corpus.
    #[command(subcommand)]
    Profiles(ProfilesCmd),
    /// Estimate the value of one batting order or bowling plan.
    Evaluate(EvaluateArgs),
    /// Search for the best batting order or bowling plan.
    #[command(subcommand)]
    Optimize(OptimizeCmd),
    /// Compare the decision actually taken with the optimizer's best.
    Audit(AuditArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Subcommand)]
pub enum ProfilesCmd {
    Build {
        #[arg(long)]
        corpus: PathBuf,
        /// Match ids to leave out, comma separated.
        #[arg(long, value_delimiter = ',')]
        exclude: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write JSON here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Batting order or bowling plan as comma-separated player ids;
    /// defaults to the scenario's actual decision.
    #[arg(long, value_delimiter = ',')]
    pub plan: Option<Vec<String>>,
    #[arg(long, default_value_t = 50_000)]
    pub sims: u64,
}

#[derive(Debug, Args, Clone, Copy)]
pub struct BattingFlags {
    /// Simulations per order in the screening pass.
    #[arg(long, default_value_t = 3_000)]
    pub n1: u64,
    /// Orders carried into the refinement pass.
    #[arg(long = "top-k", default_value_t = 10)]
    pub top_k: usize,
    /// Simulations per order in the refinement pass.
    #[arg(long, default_value_t = 20_000)]
    pub n2: u64,
}

#[derive(Debug, Args, Clone, Copy)]
pub struct BowlingFlags {
    #[arg(long, default_value_t = 8_000)]
    pub steps: usize,
    #[arg(long, default_value_t = 0.05)]
    pub t0: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub epsilon: f64,
    #[arg(long = "n-fast", default_value_t = 5_000)]
    pub n_fast: u64,
    #[arg(long = "n-refine", default_value_t = 30_000)]
    pub n_refine: u64,
    #[arg(long = "top-k", default_value_t = 10)]
    pub top_k: usize,
}

#[derive(Debug, Subcommand)]
pub enum OptimizeCmd {
    Batting {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        flags: BattingFlags,
    },
    Bowling {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        flags: BowlingFlags,
        /// Print annealing progress to stderr every this many steps.
        #[arg(long, default_value_t = 0)]
        progress_every: usize,
    },
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    #[command(flatten)]
    pub common: Common,
    /// Screening simulations per order (batting scenarios).
    #[arg(long, default_value_t = 3_000)]
    pub n1: u64,
    /// Refinement simulations per order (batting scenarios).
    #[arg(long, default_value_t = 20_000)]
    pub n2: u64,
    #[arg(long, default_value_t = 8_000)]
    pub steps: usize,
    #[arg(long, default_value_t = 0.05)]
    pub t0: f64,
    #[arg(long = "n-fast", default_value_t = 5_000)]
    pub n_fast: u64,
    #[arg(long = "n-refine", default_value_t = 30_000)]
    pub n_refine: u64,
    #[arg(long = "top-k", default_value_t = 10)]
    pub top_k: usize,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub bind: String,
    /// Optimization jobs allowed to run at once.
    #[arg(long, default_value_t = 2)]
    pub workers: usize,
}

impl BattingFlags {
    pub fn config(&self, seed: u64) -> BattingSearchConfig {
        BattingSearchConfig { n1: self.n1, k: self.top_k, n2: self.n2, seed }
    }
}

impl BowlingFlags {
    pub fn config(&self, seed: u64) -> SaConfig {
        SaConfig {
            t0: self.t0,
            epsilon: self.epsilon,
            steps: self.steps,
            n_fast: self.n_fast,
            n_refine: self.n_refine,
            top_k: self.top_k,
            seed,
        }
    }
}

#[derive(Debug)]
pub struct CliError(pub String);

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for CliError {}

fn err(e: impl std::fmt::Display) -> CliError {
    CliError(e.to_string())
}

pub fn open_store(path: Option<&Path>) -> Result<Option<ProfileStore>, CliError> {
    path.map(|p| ProfileStore::read_dir(p).map_err(|e| CliError(format!("profile store {}: {e}", p.display()))))
        .transpose()
}

fn load(common: &Common, store: Option<&ProfileStore>) -> Result<LoadedScenario, CliError> {
    let s = load_scenario(&common.scenario, store).map_err(|e| CliError(format!("{}: {e}", common.scenario.display())))?;
    for f in &s.fits {
        tracing::info!(
            player = %f.player,
            phase = %f.phase,
            target = f.target_rate,
            fitted = f.fitted_rate,
            residual = f.residual,
            "fitted summary profile"
        );
    }
    Ok(s)
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(err)?;
    text.push('\n');
    match out {
        Some(p) => fs::write(p, text).map_err(|e| CliError(format!("{}: {e}", p.display()))),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(err),
    }
}

/// Runs every command except `serve`.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let store = open_store(cli.store.as_deref())?;
    match &cli.command {
        Command::Profiles(ProfilesCmd::Build { corpus, exclude, out }) => {
            let bytes = fs::read(corpus).map_err(|e| CliError(format!("{}: {e}", corpus.display())))?;
            let built = ProfileStore::build(&bytes, exclude).map_err(err)?;
            built.write_dir(out).map_err(err)?;
            emit(&built.meta, None)
        }
        Command::Evaluate(a) => {
            let s = load(&a.common, store.as_ref())?;
            let plan = a.plan.as_deref();
            let r = if s.batting().is_some() {
                report::evaluate_batting(&s, plan, a.sims, a.common.seed)
            } else {
                report::evaluate_bowling(&s, plan, a.sims, a.common.seed)
            };
            emit(&r.map_err(err)?, a.common.out.as_deref())
        }
        Command::Optimize(OptimizeCmd::Batting { common, flags }) => {
            let s = load(common, store.as_ref())?;
            emit(&report::optimize_batting(&s, &flags.config(common.seed)).map_err(err)?, common.out.as_deref())
        }
        Command::Optimize(OptimizeCmd::Bowling { common, flags, progress_every }) => {
            let s = load(common, store.as_ref())?;
            let r = report::optimize_bowling(&s, &flags.config(common.seed), *progress_every, |p| {
                eprintln!("step {} best {:.4} current {:.4}", p.step, p.best_fast, p.current_fast)
            });
            emit(&r.map_err(err)?, common.out.as_deref())
        }
        Command::Audit(a) => {
            let s = load(&a.common, store.as_ref())?;
            let r = if s.batting().is_some() {
                let cfg = BattingFlags { n1: a.n1, top_k: a.top_k, n2: a.n2 }.config(a.common.seed);
                report::audit_batting(&s, &cfg)
            } else {
                let flags = BowlingFlags {
                    steps: a.steps,
                    t0: a.t0,
                    epsilon: SaConfig::default().epsilon,
                    n_fast: a.n_fast,
                    n_refine: a.n_refine,
                    top_k: a.top_k,
                };
                report::audit_bowling(&s, &flags.config(a.common.seed))
            };
            emit(&r.map_err(err)?, a.common.out.as_deref())
        }
        Command::Serve(_) => Err(CliError("serve runs through the async entry point".into())),
    }
}
