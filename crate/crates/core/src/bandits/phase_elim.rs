//! Phased elimination with G-optimal exploration, robust to unknown
//! corruption of order o(√T).
//!
//! Phase ℓ = 1, 2, … lasts `m_ℓ = m₀·2^ℓ` rounds (`m₀ = 4d` by default). The
//! pulls of a phase follow the largest-remainder rounding of a G-optimal
//! design over the surviving arms, played round-robin. At the end of the
//! phase a least-squares estimate is fitted on that phase's data only and
//! every arm whose estimated gap to the empirical best exceeds `2W_ℓ` is
//! dropped, with
//!
//! ```text
//! W_ℓ = 2R·√(2d·log(k·ℓ(ℓ+1)/δ) / m_ℓ) + Ŝ_ℓ/m_ℓ,   Ŝ_ℓ = √m_ℓ.
//! ```
//!
//! `R` is the sub-Gaussian scale of the reward noise; with `R = 1` and
//! rewards of scale 0.1 no arm is ever eliminated within 10⁴ rounds, so the
//! scale is a parameter.

use crate::numerics::{dot, Cholesky, Mat};
use crate::scalar::Real;

use super::design::{g_optimal_design, largest_remainder, DEFAULT_DESIGN_TOL};
use super::{ArmChoice, Learner};

const LS_RIDGE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseEliminationConfig<T> {
    /// Base phase length; phase ℓ lasts `m0·2^ℓ` rounds.
    pub m0: usize,
    pub delta: T,
    /// Noise scale `R` multiplying the statistical part of the width.
    pub noise_scale: T,
    pub design_tol: T,
}

impl<T: Real> PhaseEliminationConfig<T> {
    pub fn new(d: usize, delta: T, noise_scale: T) -> Self {
        Self {
            m0: 4 * d,
            delta,
            noise_scale,
            design_tol: T::lit(DEFAULT_DESIGN_TOL),
        }
    }

    pub fn phase_length(&self, phase: usize) -> usize {
        self.m0 << phase
    }

    /// `W_ℓ` for a phase of length `m` in dimension `d` with `k` arms.
    pub fn width(&self, d: usize, k: usize, phase: usize, m: usize) -> T {
        let mf = T::count(m);
        let l = T::count(phase);
        let log_term = (T::count(k) * l * (l + T::one()) / self.delta).ln();
        let stat = T::lit(2.0) * self.noise_scale * (T::lit(2.0) * T::count(d) * log_term / mf).sqrt();
        stat + mf.sqrt() / mf
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState<T> {
    pub phase_index: usize,
    pub active_arms: Vec<usize>,
    /// Aligned with `active_arms`.
    pub design_weights: Vec<T>,
    pub phase_length: usize,
    /// Planned and realized pulls this phase, aligned with `active_arms`.
    pub planned: Vec<usize>,
    pub actual: Vec<usize>,
    /// Least-squares estimate from the last completed phase.
    pub phase_estimate: Vec<T>,
    /// Size of the active set at the start of each phase so far.
    pub active_history: Vec<usize>,
}

impl<T: Real> PhaseState<T> {
    pub fn weights_sum(&self) -> T {
        self.design_weights.iter().copied().sum()
    }
}

/// Round-robin over the plan: cycle through the arms, skipping those whose
/// planned pulls are used up.
pub(crate) fn round_robin(planned: &[usize]) -> Vec<usize> {
    let mut left = planned.to_vec();
    let mut order = Vec::with_capacity(planned.iter().sum());
    while left.iter().any(|&c| c > 0) {
        for (slot, c) in left.iter_mut().enumerate() {
            if *c > 0 {
                *c -= 1;
                order.push(slot);
            }
        }
    }
    order
}

/// Surviving subset of `active` after dropping arms whose estimated gap to
/// the empirical best exceeds `2·width`. The empirical best always survives.
pub fn eliminate<T: Real>(arms: &[Vec<T>], active: &[usize], theta_hat: &[T], width: T) -> Vec<usize> {
    let est: Vec<T> = active.iter().map(|&a| dot(&arms[a], theta_hat)).collect();
    let best = est.iter().copied().fold(T::neg_infinity(), T::max);
    let threshold = T::lit(2.0) * width;
    active
        .iter()
        .zip(&est)
        .filter(|(_, &e)| best - e <= threshold)
        .map(|(&a, _)| a)
        .collect()
}

/// The RobustPhE learner.
#[derive(Debug, Clone)]
pub struct RobustPhe<T> {
    arms: Vec<Vec<T>>,
    config: PhaseEliminationConfig<T>,
    state: PhaseState<T>,
    /// Slots into `state.active_arms`, in play order.
    schedule: Vec<usize>,
    cursor: usize,
    gram: Mat<T>,
    moment: Vec<T>,
}

impl<T: Real> RobustPhe<T> {
    pub fn new(arms: Vec<Vec<T>>, config: PhaseEliminationConfig<T>) -> Self {
        let d = arms[0].len();
        let k = arms.len();
        let mut me = Self {
            arms,
            config,
            state: PhaseState {
                phase_index: 0,
                active_arms: (0..k).collect(),
                design_weights: Vec::new(),
                phase_length: 0,
                planned: Vec::new(),
                actual: Vec::new(),
                phase_estimate: vec![T::zero(); d],
                active_history: Vec::new(),
            },
            schedule: Vec::new(),
            cursor: 0,
            gram: Mat::zeros(d, d),
            moment: vec![T::zero(); d],
        };
        me.start_phase();
        me
    }

    pub fn state(&self) -> &PhaseState<T> {
        &self.state
    }

    pub fn config(&self) -> &PhaseEliminationConfig<T> {
        &self.config
    }

    fn start_phase(&mut self) {
        let s = &mut self.state;
        s.phase_index += 1;
        s.phase_length = self.config.phase_length(s.phase_index);
        let active: Vec<Vec<T>> = s.active_arms.iter().map(|&a| self.arms[a].clone()).collect();
        s.design_weights = g_optimal_design(&active, self.config.design_tol).weights;
        s.planned = largest_remainder(&s.design_weights, s.phase_length);
        s.actual = vec![0; s.active_arms.len()];
        s.active_history.push(s.active_arms.len());
        self.schedule = round_robin(&s.planned);
        self.cursor = 0;
        let d = self.moment.len();
        self.gram = Mat::zeros(d, d);
        self.moment = vec![T::zero(); d];
    }

    /// Fits the phase estimate, eliminates, and opens the next phase.
    pub fn end_phase(&mut self) {
        let d = self.moment.len();
        let mut v = self.gram.clone();
        for i in 0..d {
            v[(i, i)] = v[(i, i)] + T::lit(LS_RIDGE);
        }
        let theta = Cholesky::new(&v).expect("regularized phase Gram matrix is SPD").solve(&self.moment);
        let s = &self.state;
        let w = self
            .config
            .width(d, self.arms.len(), s.phase_index, s.phase_length);
        let survivors = eliminate(&self.arms, &s.active_arms, &theta, w);
        if survivors.len() < s.active_arms.len() {
            log::debug!(
                "phase {}: width {:.4}, {} -> {} arms",
                s.phase_index,
                w.as_f64(),
                s.active_arms.len(),
                survivors.len()
            );
        }
        self.state.active_arms = survivors;
        self.state.phase_estimate = theta;
        self.start_phase();
    }
}

impl<T: Real> Learner<T> for RobustPhe<T> {
    fn choose(&mut self) -> ArmChoice<T> {
        ArmChoice {
            arm_index: self.state.active_arms[self.schedule[self.cursor]],
            ucb_scores: Vec::new(),
        }
    }

    fn update(&mut self, arm: usize, reward: T) {
        let slot = self.schedule[self.cursor];
        debug_assert_eq!(self.state.active_arms[slot], arm);
        let x = &self.arms[arm];
        self.gram.add_outer_scaled(T::one(), x);
        for (m, &xi) in self.moment.iter_mut().zip(x) {
            *m = *m + xi * reward;
        }
        self.state.actual[slot] += 1;
        self.cursor += 1;
        if self.cursor == self.schedule.len() {
            self.end_phase();
        }
    }
}
