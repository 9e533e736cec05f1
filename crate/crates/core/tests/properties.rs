use linattack::attackability::{certify, AttackabilityReport};
use linattack::envmodel::{EnvironmentSpec, NormPolicy};
use proptest::prelude::*;

fn unit(angle: f64) -> Vec<f64> {
    vec![angle.cos(), angle.sin()]
}

/// A planar instance: arm angles, θ* angle and norm, target index.
fn planar() -> impl Strategy<Value = (Vec<f64>, f64, f64, usize)> {
    (3usize..=7)
        .prop_flat_map(|k| {
            (
                prop::collection::vec(0.0..std::f64::consts::TAU, k),
                0.0..std::f64::consts::TAU,
                0.0..0.99f64,
                0..k,
            )
        })
}

fn env(arms: Vec<Vec<f64>>, theta: Vec<f64>, target: usize) -> EnvironmentSpec<f64> {
    EnvironmentSpec::new(arms, theta, 0.1, target, NormPolicy::Strict).unwrap()
}

fn report(e: &EnvironmentSpec<f64>) -> AttackabilityReport<f64> {
    certify(e).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn dropping_an_arm_never_lowers_the_index((angles, phi, norm, target) in planar(), drop in any::<prop::sample::Index>()) {
        let arms: Vec<Vec<f64>> = angles.iter().map(|&a| unit(a)).collect();
        let theta: Vec<f64> = unit(phi).iter().map(|x| x * norm).collect();
        let full = report(&env(arms.clone(), theta.clone(), target)).epsilon_star;
        let others: Vec<usize> = (0..arms.len()).filter(|&i| i != target).collect();
        let gone = others[drop.index(others.len())];
        let kept: Vec<Vec<f64>> = arms.iter().enumerate().filter(|&(i, _)| i != gone).map(|(_, a)| a.clone()).collect();
        let new_target = if gone < target { target - 1 } else { target };
        let fewer = report(&env(kept, theta, new_target)).epsilon_star;
        prop_assert!(fewer >= full - 1e-12, "{fewer} < {full}");
    }

    #[test]
    fn certificate_is_feasible((angles, phi, norm, target) in planar()) {
        let arms: Vec<Vec<f64>> = angles.iter().map(|&a| unit(a)).collect();
        let theta: Vec<f64> = unit(phi).iter().map(|x| x * norm).collect();
        let e = env(arms, theta, target);
        let r = report(&e);
        let x = e.target();
        let inner = x[0] * r.certificate[0] + x[1] * r.certificate[1];
        prop_assert!(inner.abs() <= 1e-9);
        let t = r.theta_tilde();
        prop_assert!((t[0] * t[0] + t[1] * t[1]).sqrt() <= 1.0 + 1e-8);
        prop_assert_eq!(r.attackable, r.epsilon_star > 0.0);
        // Every other arm sits at least ε* below the target under θ̃.
        let target_mean = x[0] * t[0] + x[1] * t[1];
        for (i, a) in e.arms.iter().enumerate().filter(|&(i, _)| i != e.target_index) {
            let m = a[0] * t[0] + a[1] * t[1];
            prop_assert!(m <= target_mean - r.epsilon_star + 1e-7, "arm {i}");
        }
    }

    #[test]
    fn rotation_leaves_the_index_unchanged((angles, phi, norm, target) in planar(), rot in 0.0..std::f64::consts::TAU) {
        let arms: Vec<Vec<f64>> = angles.iter().map(|&a| unit(a)).collect();
        let theta: Vec<f64> = unit(phi).iter().map(|x| x * norm).collect();
        let turned: Vec<Vec<f64>> = angles.iter().map(|&a| unit(a + rot)).collect();
        let turned_theta: Vec<f64> = unit(phi + rot).iter().map(|x| x * norm).collect();
        let a = report(&env(arms, theta, target)).epsilon_star;
        let b = report(&env(turned, turned_theta, target)).epsilon_star;
        prop_assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
    }

    #[test]
    fn shrinking_the_arms_scales_the_index((angles, phi, norm, target) in planar(), c in 0.1..1.0f64) {
        // With θ∥ fixed, scaling every arm by c scales every mean by c;
        // the ball radius depends only on θ∥, so ε* scales by c too.
        let arms: Vec<Vec<f64>> = angles.iter().map(|&a| unit(a)).collect();
        let theta: Vec<f64> = unit(phi).iter().map(|x| x * norm).collect();
        let scaled: Vec<Vec<f64>> = arms.iter().map(|a| a.iter().map(|x| x * c).collect()).collect();
        let a = report(&env(arms, theta.clone(), target)).epsilon_star;
        let b = report(&env(scaled, theta, target)).epsilon_star;
        prop_assert!((b - c * a).abs() <= 1e-9, "{b} vs {}", c * a);
    }
}

#[test]
fn orthonormal_arms_with_negative_mean_can_be_safe() {
    // The target's own mean can be so low that no unit-norm parameter lifts
    // it above the other arm: ε* = t + r/√(k−1) < 0.
    let e = env(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![-0.9, 0.3], 0);
    let r = report(&e);
    let radius = (1.0f64 - 0.81).sqrt();
    assert!((r.epsilon_star - (-0.9 + radius)).abs() < 1e-9);
    assert!(!r.attackable);
}
