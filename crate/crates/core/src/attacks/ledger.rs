use serde::Serialize;

use super::AttackPhase;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LedgerEntry<T> {
    pub round: usize,
    pub arm_index: usize,
    pub is_target: bool,
    pub true_reward: T,
    pub fed_reward: T,
    pub delta: T,
    pub cum_cost: T,
    pub cum_target_pulls: usize,
    pub phase: AttackPhase,
}

/// Every reward change made by an adversary, with running totals.
///
/// `cum_cost` is `C(t) = Σ|Δ|`, `s_prime` the part of it spent on non-target
/// arms and `gamma` the largest single change seen on the target arm.
/// `stage1_cost + stage2_cost == cum_cost`, where stage 2 covers every row
/// not tagged `Stage1`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackLedger<T> {
    pub entries: Vec<LedgerEntry<T>>,
    pub cum_cost: T,
    pub s_prime: T,
    pub gamma: T,
    pub target_pulls: usize,
    pub stage1_cost: T,
    pub stage2_cost: T,
}

impl<T: Real> Default for AttackLedger<T> {
    fn default() -> Self {
        Self {
            entries: Vec::new(),
            cum_cost: T::zero(),
            s_prime: T::zero(),
            gamma: T::zero(),
            target_pulls: 0,
            stage1_cost: T::zero(),
            stage2_cost: T::zero(),
        }
    }
}

impl<T: Real> AttackLedger<T> {
    pub fn record(
        &mut self,
        round: usize,
        arm_index: usize,
        is_target: bool,
        true_reward: T,
        fed_reward: T,
        phase: AttackPhase,
    ) {
        let delta = fed_reward - true_reward;
        let cost = delta.abs();
        self.cum_cost = self.cum_cost + cost;
        if is_target {
            self.target_pulls += 1;
            self.gamma = self.gamma.max(cost);
        } else {
            self.s_prime = self.s_prime + cost;
        }
        if phase == AttackPhase::Stage1 {
            self.stage1_cost = self.stage1_cost + cost;
        } else {
            self.stage2_cost = self.stage2_cost + cost;
        }
        self.entries.push(LedgerEntry {
            round,
            arm_index,
            is_target,
            true_reward,
            fed_reward,
            delta,
            cum_cost: self.cum_cost,
            cum_target_pulls: self.target_pulls,
            phase,
        });
    }

    pub fn rounds(&self) -> usize {
        self.entries.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn totals_split() {
        let mut l: AttackLedger<f64> = AttackLedger::default();
        l.record(1, 0, true, 0.5, 0.2, AttackPhase::Stage1);
        l.record(2, 1, false, 0.1, 0.4, AttackPhase::Stage1);
        l.record(3, 1, false, 0.1, -0.1, AttackPhase::Stage2);
        l.record(4, 0, true, 0.5, 0.5, AttackPhase::Stage2);
        assert!((l.cum_cost - 0.8).abs() < 1e-12);
        assert!((l.stage1_cost - 0.6).abs() < 1e-12);
        assert!((l.stage2_cost - 0.2).abs() < 1e-12);
        assert!((l.s_prime - 0.5).abs() < 1e-12);
        assert!((l.gamma - 0.3).abs() < 1e-12);
        assert_eq!(l.target_pulls, 2);
        assert_eq!(l.entries[3].delta, 0.0);
        assert!(l.entries.windows(2).all(|w| w[1].cum_cost >= w[0].cum_cost));
    }
}
