use rand_chacha::ChaCha8Rng;

use super::{AttackError, AttackLedger, AttackPhase, Adversary};
use crate::attackability::{certify, AttackabilityReport};
use crate::envmodel::{gaussian, EnvironmentSpec};
use crate::numerics::dot;
use crate::scalar::Real;

const TARGET_MATCH_TOL: f64 = 1e-8;

/// Null-space attack with oracle access to `θ*`.
///
/// Non-target pulls are fed `xᵀθ̃ + η̃` with `θ̃ = θ*∥ + θ⊥` from the
/// attackability certificate; target pulls pass through. Since `θ⊥ ⟂ x̃`,
/// the target arm looks the same under `θ̃` and `θ*`.
#[derive(Debug, Clone)]
pub struct OracleAttack<T> {
    pub theta_tilde: Vec<T>,
    pub attack_noise_sigma: T,
    pub report: AttackabilityReport<T>,
    arms: Vec<Vec<T>>,
    target_index: usize,
    ledger: AttackLedger<T>,
}

impl<T: Real> OracleAttack<T> {
    /// Certifies `env` and builds the attack, using the environment's noise
    /// level for the attack noise.
    pub fn new(env: &EnvironmentSpec<T>) -> Result<Self, AttackError> {
        let report = certify(env)?;
        if !report.attackable {
            return Err(AttackError::NotAttackable {
                epsilon: report.epsilon_star.as_f64(),
            });
        }
        let theta_tilde = report.theta_tilde();
        let fake = dot(env.target(), &theta_tilde);
        let truth = env.mean_reward(env.target_index);
        if (fake - truth).abs() > T::tol(TARGET_MATCH_TOL) {
            return Err(AttackError::TargetMismatch {
                fake: fake.as_f64(),
                truth: truth.as_f64(),
            });
        }
        Ok(Self {
            theta_tilde,
            attack_noise_sigma: env.noise_sigma,
            report,
            arms: env.arms.clone(),
            target_index: env.target_index,
            ledger: AttackLedger::default(),
        })
    }

    pub fn with_noise(mut self, sigma: T) -> Self {
        self.attack_noise_sigma = sigma;
        self
    }
}

impl<T: Real> Adversary<T> for OracleAttack<T> {
    fn intercept(&mut self, round: usize, arm: usize, true_reward: T, rng: &mut ChaCha8Rng) -> T {
        let is_target = arm == self.target_index;
        let fed = if is_target {
            true_reward
        } else {
            dot(&self.arms[arm], &self.theta_tilde) + gaussian(rng, self.attack_noise_sigma)
        };
        self.ledger
            .record(round, arm, is_target, true_reward, fed, AttackPhase::Oracle);
        fed
    }

    fn ledger(&self) -> &AttackLedger<T> {
        &self.ledger
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envmodel::NormPolicy;
    use rand::SeedableRng;

    fn env() -> EnvironmentSpec<f64> {
        let arms = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        EnvironmentSpec::new(arms, vec![0.0, 0.6, 0.8], 0.0, 0, NormPolicy::Strict).unwrap()
    }

    #[test]
    fn target_untouched_and_noiseless_fake_rewards() {
        let e = env();
        let mut a = OracleAttack::new(&e).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(a.intercept(1, 0, 0.123, &mut rng), 0.123);
        let fed = a.intercept(2, 2, 0.8, &mut rng);
        assert_eq!(fed, dot(&e.arms[2], &a.theta_tilde));
        assert_eq!(a.ledger().entries[0].delta, 0.0);
        assert!(a.ledger().gamma == 0.0);
        // ε* > 0 means every non-target mean now sits below the target's.
        assert!(fed < 0.0);
    }

    #[test]
    fn refuses_unattackable() {
        let arms = vec![vec![1.0, 0.0], vec![1.0, 0.0]];
        let e = EnvironmentSpec::new(arms, vec![1.0, 0.0], 0.1, 0, NormPolicy::Strict).unwrap();
        assert!(matches!(OracleAttack::new(&e), Err(AttackError::NotAttackable { .. })));
    }
}
