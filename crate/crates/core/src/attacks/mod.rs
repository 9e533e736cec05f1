//! The adversary. Each attack is a reward interceptor sitting between the
//! environment and the learner: it sees the pulled arm and the true reward
//! and returns the reward the learner is fed, recording every change in an
//! [`AttackLedger`].

mod ledger;
mod oracle;
mod two_stage;

pub use ledger::{AttackLedger, LedgerEntry};
pub use oracle::OracleAttack;
pub use two_stage::{
    compensation_reward, AbortReason, Stage, TwoStageAttack, TwoStageConfig, TwoStageState,
};

use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::attackability::AttackabilityError;
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("environment is not attackable (epsilon* = {epsilon})")]
    NotAttackable { epsilon: f64 },
    #[error("target reward not preserved: x~'theta~ = {fake}, x~'theta* = {truth}")]
    TargetMismatch { fake: f64, truth: f64 },
    #[error(transparent)]
    Attackability(#[from] AttackabilityError),
}

/// Which regime produced a ledger row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackPhase {
    Clean,
    Oracle,
    Stage1,
    Stage2,
    Aborted,
}

impl AttackPhase {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Clean => "clean",
            Self::Oracle => "oracle",
            Self::Stage1 => "stage1",
            Self::Stage2 => "stage2",
            Self::Aborted => "aborted",
        }
    }
}

pub trait Adversary<T: Real> {
    /// Returns the reward fed to the learner for round `round` (1-based).
    fn intercept(&mut self, round: usize, arm: usize, true_reward: T, rng: &mut ChaCha8Rng) -> T;

    fn ledger(&self) -> &AttackLedger<T>;
}

/// Passes every reward through unchanged.
#[derive(Debug, Clone)]
pub struct NoAttack<T> {
    target_index: usize,
    ledger: AttackLedger<T>,
}

impl<T: Real> NoAttack<T> {
    pub fn new(target_index: usize) -> Self {
        Self {
            target_index,
            ledger: AttackLedger::default(),
        }
    }
}

impl<T: Real> Adversary<T> for NoAttack<T> {
    fn intercept(&mut self, round: usize, arm: usize, true_reward: T, _rng: &mut ChaCha8Rng) -> T {
        let is_target = arm == self.target_index;
        self.ledger
            .record(round, arm, is_target, true_reward, true_reward, AttackPhase::Clean);
        true_reward
    }

    fn ledger(&self) -> &AttackLedger<T> {
        &self.ledger
    }
}

/// Hoeffding radius `√(2R² log(1/δ) / n)` of a mean of `n` R-sub-Gaussian
/// samples.
pub fn estimate_error_bound<T: Real>(n: usize, noise_scale: T, delta: T) -> T {
    assert!(n >= 1, "need at least one sample");
    (T::lit(2.0) * noise_scale * noise_scale * (T::one() / delta).ln() / T::count(n)).sqrt()
}
