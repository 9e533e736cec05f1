//! Victim learners. Both expose the same step interface: pick an arm, then
//! receive the (possibly poisoned) reward for it.

mod design;
mod linucb;
mod phase_elim;

pub use design::{g_optimal_design, largest_remainder, Design, DEFAULT_DESIGN_TOL};
pub use linucb::{linucb_lambda_for_unit_ball, LinUcb, NormMonitor, RidgeState, DEFAULT_DELTA, DEFAULT_LAMBDA};
pub use phase_elim::{PhaseEliminationConfig, PhaseState, RobustPhe};

use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct ArmChoice<T> {
    pub arm_index: usize,
    /// Per-arm UCB scores; empty for learners that do not score arms.
    pub ucb_scores: Vec<T>,
}

pub trait Learner<T: Real> {
    fn choose(&mut self) -> ArmChoice<T>;

    fn update(&mut self, arm: usize, reward: T);
}
