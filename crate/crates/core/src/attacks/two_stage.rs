use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{Adversary, AttackLedger, AttackPhase};
use crate::attackability::{
    attackability_index_with, solve_theta0_with, AttackabilityReport, ProjectedParam, SolverOptions,
};
use crate::envmodel::{gaussian, PublicView};
use crate::numerics::{dot, norm2};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoStageConfig<T> {
    pub horizon: usize,
    /// Length of the first stage; the attackability test runs after round
    /// `t1`.
    pub t1: usize,
    pub attack_noise_sigma: T,
    /// Feed the one-off correction on the first stage-2 target pull.
    pub compensate: bool,
    pub solver: SolverOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum AbortReason {
    /// No parameter in the unit ball makes the target strictly best.
    InitialTest { epsilon0: f64 },
    /// The estimated index `ε̃*` was not positive.
    AttackabilityTest { epsilon_tilde: f64 },
    /// The target was never pulled in stage 1, so `θ̃∥` is undefined.
    NoTargetObservations,
    Solver { message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stage {
    Stage1,
    Stage2,
    Aborted(AbortReason),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoStageState<T> {
    pub stage: Stage,
    pub t1: usize,
    pub theta0: Vec<T>,
    pub epsilon0_star: T,
    pub n_target_stage1: usize,
    pub sum_target_rewards_stage1: T,
    pub theta_tilde_parallel: Option<ProjectedParam<T>>,
    pub epsilon_tilde_star: Option<T>,
    /// `θ̃∥ + θ̃⊥`, set exactly when stage 2 is entered.
    pub theta_tilde: Option<Vec<T>>,
    pub report: Option<AttackabilityReport<T>>,
    pub compensation_done: bool,
}

/// Reward fed on the first stage-2 target pull:
/// `n·x̃ᵀ(θ̃ − θ₀) + x̃ᵀθ̃ + η̃`. It rewrites the learner's running sum on the
/// target arm so that the stage-1 pulls look as if they had followed `θ̃`.
pub fn compensation_reward<T: Real>(n: usize, target_theta_tilde: T, target_theta0: T, noise: T) -> T {
    T::count(n) * (target_theta_tilde - target_theta0) + target_theta_tilde + noise
}

/// Two-stage null-space attack without knowledge of `θ*`.
///
/// Stage 1 (rounds `1..=t1`) feeds every arm, the target included, rewards
/// from `θ₀`, the parameter under which the target is best by the widest
/// margin, while collecting the target's true rewards. After round `t1` the
/// target's mean gives `θ̃∥`, and the attackability program is solved with
/// it in place of `θ*∥`. Stage 2 then feeds non-target arms rewards from
/// `θ̃ = θ̃∥ + θ̃⊥`; the target passes through except for the optional
/// one-off compensation. Built only from a [`PublicView`], so `θ*` is out of
/// reach by construction.
#[derive(Debug, Clone)]
pub struct TwoStageAttack<T> {
    arms: Vec<Vec<T>>,
    target_index: usize,
    config: TwoStageConfig<T>,
    state: TwoStageState<T>,
    ledger: AttackLedger<T>,
}

impl<T: Real> TwoStageAttack<T> {
    pub fn new(view: PublicView<'_, T>, config: TwoStageConfig<T>) -> Self {
        assert!(
            config.t1 >= 1 && config.t1 < config.horizon,
            "stage 1 must be non-empty and shorter than the horizon"
        );
        let th0 = solve_theta0_with(view, config.solver);
        let stage = if th0.epsilon0 > T::zero() {
            Stage::Stage1
        } else {
            log::info!("initial attackability test failed: epsilon0* = {}", th0.epsilon0);
            Stage::Aborted(AbortReason::InitialTest {
                epsilon0: th0.epsilon0.as_f64(),
            })
        };
        Self {
            arms: view.arms.to_vec(),
            target_index: view.target_index,
            config,
            state: TwoStageState {
                stage,
                t1: config.t1,
                theta0: th0.theta0,
                epsilon0_star: th0.epsilon0,
                n_target_stage1: 0,
                sum_target_rewards_stage1: T::zero(),
                theta_tilde_parallel: None,
                epsilon_tilde_star: None,
                theta_tilde: None,
                report: None,
                compensation_done: false,
            },
            ledger: AttackLedger::default(),
        }
    }

    pub fn state(&self) -> &TwoStageState<T> {
        &self.state
    }

    pub fn config(&self) -> &TwoStageConfig<T> {
        &self.config
    }

    /// Whether the adversary asserted the instance attackable at the end
    /// of stage 1. `None` while stage 1 is still running.
    pub fn asserted_attackable(&self) -> Option<bool> {
        match &self.state.stage {
            Stage::Stage1 => None,
            Stage::Stage2 => Some(true),
            Stage::Aborted(_) => Some(false),
        }
    }

    fn view(&self) -> PublicView<'_, T> {
        PublicView {
            arms: &self.arms,
            target_index: self.target_index,
        }
    }

    fn abort(&mut self, reason: AbortReason) {
        log::info!("two-stage attack aborted: {reason:?}");
        self.state.stage = Stage::Aborted(reason);
    }

    /// The end-of-stage-1 test.
    fn finish_stage1(&mut self) {
        let n = self.state.n_target_stage1;
        if n == 0 {
            self.abort(AbortReason::NoTargetObservations);
            return;
        }
        let mean = self.state.sum_target_rewards_stage1 / T::count(n);
        let proj = match ProjectedParam::from_target_reward(self.view().target(), mean) {
            Ok(p) => p,
            Err(e) => return self.abort(AbortReason::Solver { message: e.to_string() }),
        };
        let report = match attackability_index_with(self.view(), &proj, self.config.solver) {
            Ok(r) => r,
            Err(e) => return self.abort(AbortReason::Solver { message: e.to_string() }),
        };
        self.state.theta_tilde_parallel = Some(proj);
        self.state.epsilon_tilde_star = Some(report.epsilon_star);
        if report.attackable {
            let theta = report.theta_tilde();
            debug_assert!(norm2(&theta) <= T::one() + T::tol(1e-8));
            self.state.theta_tilde = Some(theta);
            self.state.stage = Stage::Stage2;
        } else {
            self.abort(AbortReason::AttackabilityTest {
                epsilon_tilde: report.epsilon_star.as_f64(),
            });
        }
        self.state.report = Some(report);
    }
}

impl<T: Real> Adversary<T> for TwoStageAttack<T> {
    fn intercept(&mut self, round: usize, arm: usize, true_reward: T, rng: &mut ChaCha8Rng) -> T {
        let is_target = arm == self.target_index;
        let sigma = self.config.attack_noise_sigma;
        let (fed, phase) = match &self.state.stage {
            Stage::Aborted(_) => (true_reward, AttackPhase::Aborted),
            Stage::Stage1 => {
                if is_target {
                    self.state.n_target_stage1 += 1;
                    self.state.sum_target_rewards_stage1 = self.state.sum_target_rewards_stage1 + true_reward;
                }
                let fed = dot(&self.arms[arm], &self.state.theta0) + gaussian(rng, sigma);
                (fed, AttackPhase::Stage1)
            }
            Stage::Stage2 => {
                let theta = self.state.theta_tilde.as_ref().expect("stage 2 has theta_tilde");
                let x = &self.arms[arm];
                let fed = if !is_target {
                    dot(x, theta) + gaussian(rng, sigma)
                } else if self.config.compensate && !self.state.compensation_done {
                    self.state.compensation_done = true;
                    compensation_reward(
                        self.state.n_target_stage1,
                        dot(x, theta),
                        dot(x, &self.state.theta0),
                        gaussian(rng, sigma),
                    )
                } else {
                    true_reward
                };
                (fed, AttackPhase::Stage2)
            }
        };
        self.ledger.record(round, arm, is_target, true_reward, fed, phase);
        if round == self.config.t1 && self.state.stage == Stage::Stage1 {
            self.finish_stage1();
        }
        fed
    }

    fn ledger(&self) -> &AttackLedger<T> {
        &self.ledger
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn cfg(t1: usize, compensate: bool) -> TwoStageConfig<f64> {
        TwoStageConfig {
            horizon: 100,
            t1,
            attack_noise_sigma: 0.0,
            compensate,
            solver: SolverOptions::default(),
        }
    }

    fn orthonormal() -> Vec<Vec<f64>> {
        vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]
    }

    #[test]
    fn compensation_arithmetic() {
        let fed: f64 = compensation_reward(5, 0.5, 0.9, 0.0);
        assert!((fed + 1.5).abs() < 1e-12);
    }

    #[test]
    fn duplicate_arms_abort_immediately() {
        let arms = vec![vec![1.0, 0.0], vec![1.0, 0.0]];
        let a = TwoStageAttack::new(PublicView { arms: &arms, target_index: 0 }, cfg(5, true));
        assert!(matches!(a.state().stage, Stage::Aborted(AbortReason::InitialTest { .. })));
        assert_eq!(a.asserted_attackable(), Some(false));
    }

    #[test]
    fn theta0_for_two_orthonormal_arms() {
        let arms = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let a = TwoStageAttack::new(PublicView { arms: &arms, target_index: 0 }, cfg(5, true));
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(a.state().stage, Stage::Stage1);
        assert!((a.state().theta0[0] - h).abs() < 1e-6 && (a.state().theta0[1] + h).abs() < 1e-6);
    }

    #[test]
    fn estimated_parallel_from_target_rewards() {
        let arms = orthonormal();
        let mut a = TwoStageAttack::new(PublicView { arms: &arms, target_index: 0 }, cfg(3, true));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for (t, r) in [0.4, 0.6, 0.5].into_iter().enumerate() {
            a.intercept(t + 1, 0, r, &mut rng);
        }
        let p = a.state().theta_tilde_parallel.as_ref().unwrap();
        assert!((p.theta_parallel[0] - 0.5).abs() < 1e-12);
        assert_eq!(&p.theta_parallel[1..], &[0.0, 0.0]);
        assert_eq!(a.state().n_target_stage1, 3);
        assert_eq!(a.state().stage, Stage::Stage2);
        assert!(a.state().epsilon_tilde_star.unwrap() > 0.0);
    }

    #[test]
    fn stage2_target_rewards() {
        let arms = orthonormal();
        let mut a = TwoStageAttack::new(PublicView { arms: &arms, target_index: 0 }, cfg(2, true));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        a.intercept(1, 0, 0.3, &mut rng);
        a.intercept(2, 1, 0.9, &mut rng);
        let th = a.state().theta_tilde.clone().unwrap();
        let th0 = a.state().theta0.clone();
        let fed = a.intercept(3, 0, 0.31, &mut rng);
        assert!((fed - (1.0 * (th[0] - th0[0]) + th[0])).abs() < 1e-12);
        assert!(a.state().compensation_done);
        assert_eq!(a.intercept(4, 0, 0.29, &mut rng), 0.29);
        assert_eq!(a.ledger().entries[3].delta, 0.0);
        let fed = a.intercept(5, 2, 0.5, &mut rng);
        assert_eq!(fed, th[2]);
    }

    #[test]
    fn skip_compensation_passes_target_through() {
        let arms = orthonormal();
        let mut a = TwoStageAttack::new(PublicView { arms: &arms, target_index: 0 }, cfg(1, false));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        a.intercept(1, 0, 0.3, &mut rng);
        assert_eq!(a.intercept(2, 0, 0.25, &mut rng), 0.25);
        assert!(!a.state().compensation_done);
    }

    #[test]
    fn target_never_seen_aborts() {
        let arms = orthonormal();
        let mut a = TwoStageAttack::new(PublicView { arms: &arms, target_index: 0 }, cfg(2, true));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        a.intercept(1, 1, 0.3, &mut rng);
        a.intercept(2, 2, 0.3, &mut rng);
        assert_eq!(a.state().stage, Stage::Aborted(AbortReason::NoTargetObservations));
        assert_eq!(a.intercept(3, 1, 0.7, &mut rng), 0.7);
    }

    #[test]
    fn stage1_targets_all_arms_with_theta0() {
        let arms = orthonormal();
        let mut a = TwoStageAttack::new(PublicView { arms: &arms, target_index: 1 }, cfg(10, true));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for arm in 0..3 {
            let fed = a.intercept(arm + 1, arm, 0.0, &mut rng);
            assert!((fed - a.state().theta0[arm]).abs() < 1e-15);
        }
        assert!(a.ledger().stage1_cost > 0.0);
    }
}
