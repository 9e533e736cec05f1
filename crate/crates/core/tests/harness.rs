use std::path::PathBuf;

use linattack::attacks::AttackPhase;
use linattack::bandits::{Learner, PhaseEliminationConfig, RobustPhe};
use linattack::envmodel::{draw_reward, load_instance, EnvironmentSpec, sample_environment, NormPolicy, RngStreams};
use linattack::harness::{
    false_negative_sweep, run_campaign, run_single, AttackKind, EnvSource, ExperimentConfig, RunOutput, VictimKind,
};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn small(victim: VictimKind, attack: AttackKind) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::desk_default(victim, attack);
    cfg.d = 5;
    cfg.k = 12;
    cfg.horizon = 2_000;
    cfg.seeds = vec![0, 1, 2];
    cfg
}

fn abs_delta_sum(run: &RunOutput) -> f64 {
    run.ledger.entries.iter().map(|e| e.delta.abs()).sum()
}

#[test]
fn same_seed_same_bytes() {
    let cfg = small(VictimKind::LinUcb, AttackKind::TwoStage);
    let a = run_single(&cfg, 5).unwrap();
    let b = run_single(&cfg, 5).unwrap();
    assert_eq!(
        serde_json::to_string(&a.result).unwrap(),
        serde_json::to_string(&b.result).unwrap()
    );
    assert_eq!(a.ledger.entries.len(), b.ledger.entries.len());
    assert!(a
        .ledger
        .entries
        .iter()
        .zip(&b.ledger.entries)
        .all(|(x, y)| x.arm_index == y.arm_index && x.fed_reward.to_bits() == y.fed_reward.to_bits()));
}

#[test]
fn campaign_returns_seed_order() {
    let mut cfg = small(VictimKind::LinUcb, AttackKind::Oracle);
    cfg.seeds = vec![4, 1, 3];
    let seeds: Vec<u64> = run_campaign(&cfg).unwrap().iter().map(|r| r.result.seed).collect();
    assert_eq!(seeds, vec![4, 1, 3]);
}

#[test]
fn cost_is_conserved_in_the_ledger() {
    for victim in [VictimKind::LinUcb, VictimKind::RobustPhe] {
        for run in run_campaign(&small(victim, AttackKind::TwoStage)).unwrap() {
            let total = run.result.total_cost;
            assert!((abs_delta_sum(&run) - total).abs() <= 1e-9 * total.max(1.0));
            let last = run.ledger.entries.last().unwrap();
            assert!((last.cum_cost - total).abs() <= 1e-9 * total.max(1.0));
            assert!((run.result.stage1_cost + run.result.stage2_cost - total).abs() <= 1e-9 * total.max(1.0));
            assert_eq!(run.ledger.entries.len(), run.result.horizon);
        }
    }
}

#[test]
fn no_attack_costs_nothing() {
    for run in run_campaign(&small(VictimKind::LinUcb, AttackKind::None)).unwrap() {
        assert_eq!(run.result.total_cost, 0.0);
        assert!(run.ledger.entries.iter().all(|e| e.delta == 0.0 && e.phase == AttackPhase::Clean));
    }
}

#[test]
fn oracle_never_touches_the_target() {
    for run in run_campaign(&small(VictimKind::LinUcb, AttackKind::Oracle)).unwrap() {
        assert!(run
            .ledger
            .entries
            .iter()
            .filter(|e| e.is_target)
            .all(|e| e.delta == 0.0));
        assert_eq!(run.ledger.gamma, 0.0);
    }
}

#[test]
fn clean_linucb_finds_the_best_arm() {
    let mut cfg = ExperimentConfig::desk_default(VictimKind::LinUcb, AttackKind::None);
    cfg.env_source = EnvSource::Sample;
    cfg.seeds = (0..10).collect();
    let mut shares: Vec<f64> = run_campaign(&cfg)
        .unwrap()
        .iter()
        .map(|r| r.result.best_arm_pulls as f64 / r.result.horizon as f64)
        .collect();
    shares.sort_by(f64::total_cmp);
    let median = (shares[4] + shares[5]) / 2.0;
    assert!(median >= 0.8, "median best-arm share {median}");
}

#[test]
fn robust_phe_active_set_only_shrinks() {
    let mut streams = RngStreams::new(11);
    let env = sample_environment::<f64>(4, 10, 0.1, &mut streams).unwrap();
    let mut learner = RobustPhe::new(env.arms.clone(), PhaseEliminationConfig::new(4, 0.01, 0.1));
    let mut previous: Vec<usize> = learner.state().active_arms.clone();
    for _ in 0..5_000 {
        let arm = learner.choose().arm_index;
        let r = draw_reward(&env, arm, &mut streams).unwrap().realized;
        learner.update(arm, r);
        let now = &learner.state().active_arms;
        assert!(now.iter().all(|a| previous.contains(a)));
        previous = now.clone();
    }
    assert!(learner.state().active_history.windows(2).all(|w| w[1] <= w[0]));
    assert!(previous.contains(&env.best_arm()));
}

#[test]
fn noiseless_sweep_has_no_false_negatives() {
    // The target is also the best arm, so stage 1 pulls it from round one.
    let env = EnvironmentSpec::new(
        vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.6, -0.8]],
        vec![0.6, 0.3],
        0.0,
        0,
        NormPolicy::Strict,
    )
    .unwrap();
    let cells = false_negative_sweep(&env, &[1, 5, 20], &[0.0], 10, 0).unwrap();
    assert!(cells.iter().all(|c| c.reps == 10 && c.false_negatives == 0), "{cells:?}");
}

#[test]
fn sweep_refuses_unattackable_fixture() {
    let env = load_instance(&fixture("near_parallel.json"), NormPolicy::AllowUnnormalized).unwrap();
    assert!(false_negative_sweep(&env, &[10], &[0.1], 5, 0).is_err());
}

#[test]
fn config_hash_tracks_fields() {
    let a = small(VictimKind::LinUcb, AttackKind::TwoStage);
    let mut b = a.clone();
    assert_eq!(a.hash(), b.hash());
    b.sigma = 0.2;
    assert_ne!(a.hash(), b.hash());
    assert_eq!(a.hash().len(), 64);
}
