use serde::Serialize;

use super::config::{AttackKind, EnvSource, ExperimentConfig, VictimKind};
use super::HarnessError;
use crate::attackability::{certify, SolverOptions};
use crate::attacks::{
    AbortReason, Adversary, AttackLedger, NoAttack, OracleAttack, Stage, TwoStageAttack, TwoStageConfig,
};
use crate::bandits::{ArmChoice, Learner, LinUcb, PhaseEliminationConfig, RobustPhe};
use crate::envmodel::{
    draw_reward, load_instance, sample_attackable_environment, sample_environment, EnvironmentSpec, NormPolicy,
    RngStreams,
};
use crate::numerics::{dot, sub};

/// State needed to evaluate the ridge robustness bound at one round:
/// `distance = ‖θ̃ − θ̂_t‖_{A_t}` against
/// `alpha_t + s_prime/√λ + gamma·√t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lemma2Snapshot {
    pub t: usize,
    pub distance: f64,
    pub alpha_t: f64,
    pub s_prime: f64,
    pub gamma: f64,
    pub lambda: f64,
}

impl Lemma2Snapshot {
    pub fn bound(&self) -> f64 {
        self.alpha_t + self.s_prime / self.lambda.sqrt() + self.gamma * (self.t as f64).sqrt()
    }

    pub fn holds(&self) -> bool {
        self.distance <= self.bound()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Lemma2Report {
    pub checks: usize,
    pub violations: usize,
}

/// Counts snapshots at which the bound fails.
pub fn lemma2_monitor(snapshots: &[Lemma2Snapshot]) -> Lemma2Report {
    Lemma2Report {
        checks: snapshots.len(),
        violations: snapshots.iter().filter(|s| !s.holds()).count(),
    }
}

/// Rounds at which the bound is checked: `T₁+1`, then every multiple of
/// `T₁` from `2T₁` on, and the horizon.
pub fn lemma2_checkpoints(t1: usize, horizon: usize) -> Vec<usize> {
    let mut out = vec![t1 + 1];
    let mut t = 2 * t1;
    while t < horizon {
        if t > t1 + 1 {
            out.push(t);
        }
        t += t1;
    }
    if *out.last().unwrap() != horizon {
        out.push(horizon);
    }
    out.retain(|&t| t <= horizon);
    out
}

/// Per-run summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub config_hash: String,
    pub seed: u64,
    pub victim: VictimKind,
    pub attack: AttackKind,
    #[serde(rename = "T")]
    pub horizon: usize,
    #[serde(rename = "T1")]
    pub t1: Option<usize>,
    pub target_index: usize,
    pub best_arm: usize,
    pub env_tries: Option<usize>,
    pub target_pulls: usize,
    pub target_pull_fraction: f64,
    pub best_arm_pulls: usize,
    pub total_cost: f64,
    pub stage1_cost: f64,
    pub stage2_cost: f64,
    /// The adversary's verdict; `None` for attacks that make no assertion.
    pub asserted_attackable: Option<bool>,
    pub true_attackable: bool,
    pub epsilon_star: f64,
    pub epsilon_tilde_star: Option<f64>,
    pub regret_vs_theta_star: f64,
    pub regret_vs_theta_tilde: Option<f64>,
    pub lemma2_checks: usize,
    pub lemma2_violations: usize,
    pub cb_checks: usize,
    pub cb_violations: usize,
    /// Rounds on which LinUCB's `‖θ̂_t‖ ≥ 1`.
    pub norm_violations: usize,
    pub aborted: bool,
    pub abort_reason: Option<AbortReason>,
}

/// A finished run: its summary plus the full reward ledger.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub result: RunResult,
    pub ledger: AttackLedger<f64>,
    pub lemma2: Vec<Lemma2Snapshot>,
    pub env: EnvironmentSpec<f64>,
}

enum Victim {
    LinUcb(LinUcb<f64>),
    Phe(RobustPhe<f64>),
}

impl Victim {
    fn learner(&mut self) -> &mut dyn Learner<f64> {
        match self {
            Self::LinUcb(l) => l,
            Self::Phe(p) => p,
        }
    }
}

enum Attack {
    None(NoAttack<f64>),
    Oracle(Box<OracleAttack<f64>>),
    TwoStage(Box<TwoStageAttack<f64>>),
}

impl Attack {
    fn adversary(&mut self) -> &mut dyn Adversary<f64> {
        match self {
            Self::None(a) => a,
            Self::Oracle(a) => a.as_mut(),
            Self::TwoStage(a) => a.as_mut(),
        }
    }

    fn ledger(&self) -> &AttackLedger<f64> {
        match self {
            Self::None(a) => a.ledger(),
            Self::Oracle(a) => a.ledger(),
            Self::TwoStage(a) => a.ledger(),
        }
    }

    /// `θ̃` once it is known.
    fn theta_tilde(&self) -> Option<&[f64]> {
        match self {
            Self::None(_) => None,
            Self::Oracle(a) => Some(&a.theta_tilde),
            Self::TwoStage(a) => a.state().theta_tilde.as_deref(),
        }
    }
}

/// Builds the instance for `seed` from the configured source.
pub fn build_environment(
    cfg: &ExperimentConfig,
    streams: &mut RngStreams,
) -> Result<(EnvironmentSpec<f64>, Option<usize>), HarnessError> {
    Ok(match &cfg.env_source {
        EnvSource::Sample => (sample_environment(cfg.d, cfg.k, cfg.sigma, streams)?, Some(1)),
        EnvSource::SampleAttackable => {
            let s = sample_attackable_environment(cfg.d, cfg.k, cfg.sigma, streams, cfg.max_tries)?;
            (s.env, Some(s.tries))
        }
        EnvSource::File(path) => {
            let policy = if cfg.allow_unnormalized {
                NormPolicy::AllowUnnormalized
            } else {
                NormPolicy::Strict
            };
            (load_instance(path, policy)?, None)
        }
    })
}

fn regret(env: &EnvironmentSpec<f64>, theta: &[f64], pulls: &[usize]) -> f64 {
    let means: Vec<f64> = env.arms.iter().map(|x| dot(x, theta)).collect();
    let best = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    means.iter().zip(pulls).map(|(m, &n)| (best - m) * n as f64).sum()
}

/// One seed of a campaign.
pub fn run_single(cfg: &ExperimentConfig, seed: u64) -> Result<RunOutput, HarnessError> {
    cfg.validate()?;
    let mut streams = RngStreams::new(seed);
    let (env, env_tries) = build_environment(cfg, &mut streams)?;
    run_on_environment(cfg, seed, env, env_tries, &mut streams)
}

/// Runs the configured victim and attack on a given instance. `streams`
/// supplies the environment and attack noise.
pub fn run_on_environment(
    cfg: &ExperimentConfig,
    seed: u64,
    env: EnvironmentSpec<f64>,
    env_tries: Option<usize>,
    streams: &mut RngStreams,
) -> Result<RunOutput, HarnessError> {
    let horizon = cfg.horizon();
    let sigma = env.noise_sigma;
    let truth = certify(&env)?;

    let mut victim = match cfg.victim {
        VictimKind::LinUcb => Victim::LinUcb(LinUcb::with_noise_scale(
            env.arms.clone(),
            cfg.lambda,
            cfg.delta,
            cfg.linucb_noise_scale.unwrap_or(sigma),
        )),
        VictimKind::RobustPhe => {
            let scale = cfg.phe_noise_scale.unwrap_or(sigma);
            let pc = PhaseEliminationConfig::new(env.dim(), cfg.delta, scale);
            Victim::Phe(RobustPhe::new(env.arms.clone(), pc))
        }
    };
    let t1 = cfg.stage1_length();
    let mut attack = match cfg.attack {
        AttackKind::None => Attack::None(NoAttack::new(env.target_index)),
        AttackKind::Oracle => Attack::Oracle(Box::new(OracleAttack::new(&env)?)),
        AttackKind::TwoStage => Attack::TwoStage(Box::new(TwoStageAttack::new(
            env.public_view(),
            TwoStageConfig {
                horizon,
                t1,
                attack_noise_sigma: sigma,
                compensate: cfg.compensate(),
                solver: SolverOptions::default(),
            },
        ))),
    };
    let checkpoints = match (cfg.attack, cfg.victim) {
        (AttackKind::TwoStage, VictimKind::LinUcb) => lemma2_checkpoints(t1, horizon),
        _ => Vec::new(),
    };
    let mut next_checkpoint = 0;
    let mut lemma2 = Vec::new();
    let mut pulls = vec![0usize; env.num_arms()];

    for t in 1..=horizon {
        let ArmChoice { arm_index: arm, .. } = victim.learner().choose();
        let draw = draw_reward(&env, arm, streams)?;
        let fed = attack.adversary().intercept(t, arm, draw.realized, &mut streams.attack);
        victim.learner().update(arm, fed);
        pulls[arm] += 1;

        if checkpoints.get(next_checkpoint) == Some(&t) {
            next_checkpoint += 1;
            if let (Victim::LinUcb(l), Some(theta)) = (&victim, attack.theta_tilde()) {
                let s = l.state();
                let ledger = attack.ledger();
                lemma2.push(Lemma2Snapshot {
                    t,
                    distance: s.design_norm(&sub(theta, &s.theta_hat)),
                    alpha_t: s.alpha_t,
                    s_prime: ledger.s_prime,
                    gamma: ledger.gamma,
                    lambda: s.lambda,
                });
            }
        }
    }

    let ledger = attack.ledger().clone();
    let (cb_checks, cb_violations, norm_violations) = match &victim {
        Victim::LinUcb(l) => {
            let (c, v) = l.cb_bound_record();
            (c, v, l.norm_monitor().violations)
        }
        Victim::Phe(_) => (0, 0, 0),
    };
    let (asserted, eps_tilde, abort_reason) = match &attack {
        Attack::TwoStage(a) => {
            let s = a.state();
            let reason = match &s.stage {
                Stage::Aborted(r) => Some(r.clone()),
                _ => None,
            };
            (a.asserted_attackable(), s.epsilon_tilde_star, reason)
        }
        _ => (None, None, None),
    };
    let l2 = lemma2_monitor(&lemma2);
    let best_arm = env.best_arm();
    let result = RunResult {
        config_hash: cfg.hash(),
        seed,
        victim: cfg.victim,
        attack: cfg.attack,
        horizon,
        t1: (cfg.attack == AttackKind::TwoStage).then_some(t1),
        target_index: env.target_index,
        best_arm,
        env_tries,
        target_pulls: ledger.target_pulls,
        target_pull_fraction: ledger.target_pulls as f64 / horizon as f64,
        best_arm_pulls: pulls[best_arm],
        total_cost: ledger.cum_cost,
        stage1_cost: ledger.stage1_cost,
        stage2_cost: ledger.stage2_cost,
        asserted_attackable: asserted,
        true_attackable: truth.attackable,
        epsilon_star: truth.epsilon_star,
        epsilon_tilde_star: eps_tilde,
        regret_vs_theta_star: regret(&env, &env.theta_star, &pulls),
        regret_vs_theta_tilde: attack.theta_tilde().map(|th| regret(&env, th, &pulls)),
        lemma2_checks: l2.checks,
        lemma2_violations: l2.violations,
        cb_checks,
        cb_violations,
        norm_violations,
        aborted: abort_reason.is_some(),
        abort_reason,
    };
    Ok(RunOutput {
        result,
        ledger,
        lemma2,
        env,
    })
}

/// Feeds a stage-1-only two-stage attack against LinUCB for `t1` rounds
/// and returns the adversary's verdict at the boundary.
pub(crate) fn stage1_verdict(
    env: &EnvironmentSpec<f64>,
    t1: usize,
    lambda: f64,
    delta: f64,
    streams: &mut RngStreams,
) -> Result<bool, HarnessError> {
    // Same victim as in campaigns: confidence width scaled by the noise level.
    let mut victim = LinUcb::with_noise_scale(env.arms.clone(), lambda, delta, env.noise_sigma);
    let mut attack = TwoStageAttack::new(
        env.public_view(),
        TwoStageConfig {
            horizon: t1 + 1,
            t1,
            attack_noise_sigma: env.noise_sigma,
            compensate: true,
            solver: SolverOptions::default(),
        },
    );
    if let Some(v) = attack.asserted_attackable() {
        return Ok(v);
    }
    for t in 1..=t1 {
        let arm = victim.choose().arm_index;
        let draw = draw_reward(env, arm, streams)?;
        let fed = attack.intercept(t, arm, draw.realized, &mut streams.attack);
        victim.update(arm, fed);
    }
    Ok(attack.asserted_attackable().expect("boundary reached"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoint_grid() {
        assert_eq!(lemma2_checkpoints(100, 450), vec![101, 200, 300, 400, 450]);
        assert_eq!(lemma2_checkpoints(100, 400), vec![101, 200, 300, 400]);
        assert_eq!(lemma2_checkpoints(1, 4), vec![2, 3, 4]);
    }

    #[test]
    fn forged_small_corruption_trips_the_monitor() {
        let ok = Lemma2Snapshot {
            t: 200,
            distance: 3.0,
            alpha_t: 2.0,
            s_prime: 50.0,
            gamma: 0.0,
            lambda: 1.0,
        };
        assert!(ok.holds());
        let forged = Lemma2Snapshot { s_prime: 0.1, ..ok };
        assert!(!forged.holds());
        assert_eq!(lemma2_monitor(&[ok, forged]), Lemma2Report { checks: 2, violations: 1 });
    }
}
