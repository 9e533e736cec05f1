//! Simulation lab for reward-poisoning attacks on k-armed linear stochastic
//! bandits.
//!
//! [`attackability`] decides whether a target arm can be forced on a
//! learner at sublinear cost and produces the certificate an attacker
//! uses. [`bandits`] holds the victims (LinUCB and robust phased
//! elimination), [`attacks`] the oracle and two-stage null-space attacks,
//! and [`harness`] wires them into seeded, reproducible campaigns.
//!
//! The numeric core is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, which is what the harness and CLI use.

// `!(x > 0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod attackability;
pub mod attacks;
pub mod bandits;
pub mod cli;
pub mod envmodel;
pub mod harness;
pub mod numerics;
pub mod scalar;

pub use scalar::Real;

pub type Environment = envmodel::EnvironmentSpec<f64>;
pub type Report = attackability::AttackabilityReport<f64>;
pub type Projected = attackability::ProjectedParam<f64>;
pub type Matrix = numerics::Mat<f64>;
pub type Ridge = bandits::RidgeState<f64>;
pub type LinUcbF64 = bandits::LinUcb<f64>;
pub type RobustPheF64 = bandits::RobustPhe<f64>;
pub type Ledger = attacks::AttackLedger<f64>;
pub type OracleAttackF64 = attacks::OracleAttack<f64>;
pub type TwoStageAttackF64 = attacks::TwoStageAttack<f64>;
