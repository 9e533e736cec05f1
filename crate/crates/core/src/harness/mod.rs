//! Campaign runner: wires an instance, a victim and an adversary together,
//! and runs the desk-scale experiments.

mod config;
mod experiments;
mod output;
mod run;

pub use config::{default_t1, AttackKind, EnvSource, ExperimentConfig, VictimKind};
pub use experiments::{
    false_negative_sweep, fit_slope, run_campaign, sublinearity_probe, ProbePoint, ProbeReport, SweepCell,
};
pub use output::{write_campaign, write_json, write_probe, write_round_log, write_run, write_sweep, write_xy};
pub use run::{
    build_environment, lemma2_checkpoints, lemma2_monitor, run_on_environment, run_single, Lemma2Report,
    Lemma2Snapshot, RunOutput, RunResult,
};

use thiserror::Error;

use crate::attackability::AttackabilityError;
use crate::attacks::AttackError;
use crate::envmodel::EnvError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config field `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("fixture is not attackable (epsilon* = {epsilon})")]
    FixtureNotAttackable { epsilon: f64 },
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error(transparent)]
    Attackability(#[from] AttackabilityError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
