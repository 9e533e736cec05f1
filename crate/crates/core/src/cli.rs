//! Command-line front end.
//!
//! Exit codes: 0 on success, 2 for configuration errors (bad flags, bad or
//! unreadable config and instance files), 3 when no attackable instance was
//! found within the try budget, 1 for anything else.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::attackability::certify;
use crate::envmodel::{
    load_instance, sample_attackable_environment, sample_environment, save_instance, EnvError, NormPolicy,
    RngStreams, DEFAULT_MAX_TRIES,
};
use crate::harness::{
    false_negative_sweep, run_campaign, sublinearity_probe, write_campaign, write_probe, write_sweep, AttackKind,
    EnvSource, ExperimentConfig, HarnessError, VictimKind,
};

#[derive(Debug, Parser)]
#[command(name = "linattack", version, about = "Reward-poisoning attacks on linear stochastic bandits")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decide whether an instance is attackable and print the report as JSON.
    Check {
        /// Instance JSON file.
        instance: PathBuf,
        /// Accept arm or parameter norms above one.
        #[arg(long)]
        allow_unnormalized: bool,
    },
    /// Run a campaign and write round logs, summaries and curves.
    Run(RunArgs),
    /// False-negative rate of the two-stage attackability test on a fixed
    /// instance over a grid of stage-1 lengths and noise levels.
    Sweep(SweepArgs),
    /// Rerun a campaign at several horizons and fit the cost exponent.
    Probe(ProbeArgs),
    /// Sample a random instance and write it as JSON.
    SampleEnv(SampleArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum VictimArg {
    Linucb,
    Robustphe,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AttackArg {
    None,
    Oracle,
    TwoStage,
}

#[derive(Debug, Args)]
pub struct Overrides {
    /// Experiment config JSON; flags below override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub victim: Option<VictimArg>,
    #[arg(long, value_enum)]
    pub attack: Option<AttackArg>,
    /// Horizon.
    #[arg(long = "T", allow_negative_numbers = true)]
    pub horizon: Option<i64>,
    /// Stage-1 length of the two-stage attack.
    #[arg(long = "T1", allow_negative_numbers = true)]
    pub t1: Option<i64>,
    /// Seed; repeat for several runs.
    #[arg(long = "seed")]
    pub seeds: Vec<u64>,
    /// Use this instance file instead of sampling.
    #[arg(long)]
    pub instance: Option<PathBuf>,
    /// Accept arm or parameter norms above one in instance files.
    #[arg(long)]
    pub allow_unnormalized: bool,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: Overrides,
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    #[command(flatten)]
    pub common: Overrides,
    /// Horizons to run at.
    #[arg(long, value_delimiter = ',', default_values_t = [2500usize, 5000, 10000])]
    pub checkpoints: Vec<usize>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Instance JSON file; must be attackable.
    pub instance: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = [5usize, 10, 20, 50, 100])]
    pub t1: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.1f64, 0.3])]
    pub sigma: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    /// First seed; repetition i uses seed + i.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub allow_unnormalized: bool,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long, default_value_t = 10)]
    pub d: usize,
    #[arg(long, default_value_t = 30)]
    pub k: usize,
    #[arg(long, default_value_t = 0.1)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Redraw until the instance is attackable.
    #[arg(long)]
    pub attackable: bool,
    #[arg(long, default_value_t = DEFAULT_MAX_TRIES)]
    pub max_tries: usize,
    /// Output file.
    #[arg(long)]
    pub out: PathBuf,
}

/// Error with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        let code = match &e {
            HarnessError::Config { .. } | HarnessError::Json(_) => 2,
            HarnessError::Env(env) => env_code(env),
            _ => 1,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<EnvError> for CliError {
    fn from(e: EnvError) -> Self {
        Self {
            code: env_code(&e),
            message: e.to_string(),
        }
    }
}

fn env_code(e: &EnvError) -> i32 {
    match e {
        EnvError::ExhaustedTries { .. } => 3,
        EnvError::Invalid { .. } | EnvError::Unnormalized { .. } | EnvError::Parse { .. } | EnvError::Io { .. } => 2,
        _ => 1,
    }
}

fn policy(allow: bool) -> NormPolicy {
    if allow {
        NormPolicy::AllowUnnormalized
    } else {
        NormPolicy::Strict
    }
}

fn config_error(field: &str, message: impl Into<String>) -> CliError {
    HarnessError::Config {
        field: field.into(),
        message: message.into(),
    }
    .into()
}

/// Base config from `--config` (or the desk defaults), then flag overrides.
pub fn resolve_config(o: &Overrides) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &o.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| config_error("config", format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| config_error("config", e.to_string()))?
        }
        None => ExperimentConfig::desk_default(VictimKind::LinUcb, AttackKind::TwoStage),
    };
    if let Some(v) = o.victim {
        cfg.victim = match v {
            VictimArg::Linucb => VictimKind::LinUcb,
            VictimArg::Robustphe => VictimKind::RobustPhe,
        };
    }
    if let Some(a) = o.attack {
        cfg.attack = match a {
            AttackArg::None => AttackKind::None,
            AttackArg::Oracle => AttackKind::Oracle,
            AttackArg::TwoStage => AttackKind::TwoStage,
        };
    }
    if let Some(t) = o.horizon {
        cfg.horizon = t;
    }
    if o.t1.is_some() {
        cfg.t1 = o.t1;
    }
    if !o.seeds.is_empty() {
        cfg.seeds = o.seeds.clone();
    }
    if let Some(p) = &o.instance {
        cfg.env_source = EnvSource::File(p.clone());
    }
    cfg.allow_unnormalized |= o.allow_unnormalized;
    cfg.validate()?;
    Ok(cfg)
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError {
        code: 1,
        message: format!("cannot create {}: {e}", dir.display()),
    })
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Check {
            instance,
            allow_unnormalized,
        } => {
            let env = load_instance(&instance, policy(allow_unnormalized))?;
            let report = certify(&env).map_err(HarnessError::from)?;
            println!("{}", serde_json::to_string_pretty(&report).map_err(HarnessError::from)?);
        }
        Command::Run(args) => {
            let cfg = resolve_config(&args.common)?;
            let runs = run_campaign(&cfg)?;
            create_dir(&args.common.out_dir)?;
            write_campaign(&args.common.out_dir, &runs)?;
            for r in &runs {
                let r = &r.result;
                eprintln!(
                    "seed {}: target pulls {}/{}, cost {:.3}",
                    r.seed, r.target_pulls, r.horizon, r.total_cost
                );
            }
        }
        Command::Sweep(args) => {
            if args.reps == 0 {
                return Err(config_error("reps", "must be at least 1"));
            }
            if let Some(s) = args.sigma.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
                return Err(config_error("sigma", format!("must be finite and non-negative, found {s}")));
            }
            if args.t1.contains(&0) {
                return Err(config_error("T1", "values must be at least 1"));
            }
            let env = load_instance(&args.instance, policy(args.allow_unnormalized))?;
            let cells = false_negative_sweep(&env, &args.t1, &args.sigma, args.reps, args.seed)?;
            create_dir(&args.out_dir)?;
            write_sweep(&args.out_dir.join("sweep.csv"), &cells)?;
        }
        Command::Probe(args) => {
            let cfg = resolve_config(&args.common)?;
            let report = sublinearity_probe(&cfg, &args.checkpoints)?;
            create_dir(&args.common.out_dir)?;
            write_probe(&args.common.out_dir, &report)?;
            if let Some(beta) = report.beta {
                eprintln!("fitted cost exponent: {beta:.3}");
            }
        }
        Command::SampleEnv(args) => {
            let mut streams = RngStreams::new(args.seed);
            let env = if args.attackable {
                let s = sample_attackable_environment(args.d, args.k, args.sigma, &mut streams, args.max_tries)?;
                eprintln!("accepted after {} tries", s.tries);
                s.env
            } else {
                sample_environment(args.d, args.k, args.sigma, &mut streams)?
            };
            save_instance(&env, &args.out)?;
        }
    }
    Ok(())
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}
