use crate::numerics::{dot, norm2, Cholesky, Mat};
use crate::scalar::Real;

use super::{ArmChoice, Learner};

pub const DEFAULT_LAMBDA: f64 = 1.0;
pub const DEFAULT_DELTA: f64 = 0.01;

/// Slack on the `‖x‖_{A⁻¹} ≤ 1/√n` check, relative.
const CB_CHECK_TOL: f64 = 1e-9;

/// Ridge-regression state of LinUCB.
///
/// `a = λI + Σ x xᵀ`, `b = Σ x r`, `theta_hat = a⁻¹ b`, and
/// `alpha_t = R·√(d log((1 + t/λ)/δ)) + √λ` for the current number of
/// updates `t`. `R` is the sub-Gaussian scale of the reward noise and
/// defaults to 1.
#[derive(Debug, Clone)]
pub struct RidgeState<T> {
    pub a: Mat<T>,
    pub b: Vec<T>,
    pub theta_hat: Vec<T>,
    pub lambda: T,
    pub t: usize,
    pub delta: T,
    pub alpha_t: T,
    pub noise_scale: T,
    chol: Cholesky<T>,
}

impl<T: Real> RidgeState<T> {
    pub fn new(d: usize, lambda: T, delta: T) -> Self {
        assert!(lambda > T::zero(), "ridge parameter must be positive");
        assert!(delta > T::zero() && delta < T::one(), "delta must lie in (0, 1)");
        let a = Mat::scaled_identity(d, lambda);
        let chol = Cholesky::new(&a).expect("λI is SPD");
        Self {
            a,
            b: vec![T::zero(); d],
            theta_hat: vec![T::zero(); d],
            lambda,
            t: 0,
            delta,
            alpha_t: Self::alpha(d, 0, lambda, delta, T::one()),
            noise_scale: T::one(),
            chol,
        }
    }

    /// Sets `R` in `alpha_t`.
    pub fn with_noise_scale(mut self, noise_scale: T) -> Self {
        assert!(noise_scale >= T::zero(), "noise scale must be non-negative");
        self.noise_scale = noise_scale;
        self.alpha_t = Self::alpha(self.dim(), self.t, self.lambda, self.delta, noise_scale);
        self
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn alpha(d: usize, t: usize, lambda: T, delta: T, noise_scale: T) -> T {
        let ratio = (T::one() + T::count(t) / lambda) / delta;
        noise_scale * (T::count(d) * ratio.ln()).sqrt() + lambda.sqrt()
    }

    /// `CB_t(x) = α_t ‖x‖_{A_t⁻¹}`
    pub fn confidence_bound(&self, x: &[T]) -> T {
        self.alpha_t * self.chol.inv_quad_norm(x)
    }

    pub fn inv_norm(&self, x: &[T]) -> T {
        self.chol.inv_quad_norm(x)
    }

    /// `‖v‖_{A_t}`
    pub fn design_norm(&self, v: &[T]) -> T {
        self.chol.quad_norm(v)
    }

    /// Arm with the largest `xᵀθ̂ + CB_t(x)`; ties go to the lowest index.
    pub fn choose(&self, arms: &[Vec<T>]) -> ArmChoice<T> {
        let scores: Vec<T> = arms
            .iter()
            .map(|x| dot(x, &self.theta_hat) + self.confidence_bound(x))
            .collect();
        let mut best = 0;
        for (i, &s) in scores.iter().enumerate().skip(1) {
            if s > scores[best] {
                best = i;
            }
        }
        ArmChoice {
            arm_index: best,
            ucb_scores: scores,
        }
    }

    pub fn update(&mut self, x: &[T], reward: T) {
        self.a.add_outer_scaled(T::one(), x);
        for (bi, &xi) in self.b.iter_mut().zip(x) {
            *bi = *bi + xi * reward;
        }
        self.chol = Cholesky::new(&self.a).expect("ridge design matrix stays SPD");
        self.theta_hat = self.chol.solve(&self.b);
        self.t += 1;
        self.alpha_t = Self::alpha(self.dim(), self.t, self.lambda, self.delta, self.noise_scale);
    }
}

/// Default ridge parameter for keeping `‖θ̂_t‖ < 1`. No constructive rule
/// exists for the smallest such λ, so the default is returned and runs
/// record violations through [`NormMonitor`] instead.
pub fn linucb_lambda_for_unit_ball<T: Real>(_data_scale_hint: Option<T>) -> T {
    T::lit(DEFAULT_LAMBDA)
}

/// Counts rounds on which the ridge estimate left the open unit ball.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NormMonitor {
    pub rounds: usize,
    pub violations: usize,
}

/// LinUCB over a fixed arm pool.
#[derive(Debug, Clone)]
pub struct LinUcb<T> {
    arms: Vec<Vec<T>>,
    state: RidgeState<T>,
    pulls: Vec<usize>,
    norm_monitor: NormMonitor,
    cb_checks: usize,
    cb_violations: usize,
}

impl<T: Real> LinUcb<T> {
    pub fn new(arms: Vec<Vec<T>>, lambda: T, delta: T) -> Self {
        Self::with_noise_scale(arms, lambda, delta, T::one())
    }

    pub fn with_noise_scale(arms: Vec<Vec<T>>, lambda: T, delta: T, noise_scale: T) -> Self {
        let d = arms[0].len();
        let k = arms.len();
        Self {
            arms,
            state: RidgeState::new(d, lambda, delta).with_noise_scale(noise_scale),
            pulls: vec![0; k],
            norm_monitor: NormMonitor::default(),
            cb_checks: 0,
            cb_violations: 0,
        }
    }

    pub fn state(&self) -> &RidgeState<T> {
        &self.state
    }

    pub fn pulls(&self) -> &[usize] {
        &self.pulls
    }

    pub fn norm_monitor(&self) -> NormMonitor {
        self.norm_monitor
    }

    /// (checks, violations) of `CB_t(x) ≤ α_t/√n(x)` over every pulled arm
    /// on every round so far.
    pub fn cb_bound_record(&self) -> (usize, usize) {
        (self.cb_checks, self.cb_violations)
    }
}

impl<T: Real> Learner<T> for LinUcb<T> {
    fn choose(&mut self) -> ArmChoice<T> {
        let tol = T::one() + T::tol(CB_CHECK_TOL);
        for (x, &n) in self.arms.iter().zip(&self.pulls) {
            if n == 0 {
                continue;
            }
            self.cb_checks += 1;
            let cb = self.state.confidence_bound(x);
            if cb > tol * self.state.alpha_t / T::count(n).sqrt() {
                self.cb_violations += 1;
            }
        }
        self.state.choose(&self.arms)
    }

    fn update(&mut self, arm: usize, reward: T) {
        self.state.update(&self.arms[arm], reward);
        self.pulls[arm] += 1;
        self.norm_monitor.rounds += 1;
        if norm2(&self.state.theta_hat) >= T::one() {
            self.norm_monitor.violations += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{max_abs, spd_solve, sub};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn first_choice_ties_to_lowest_index() {
        let mut l = LinUcb::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], 1.0, 0.01);
        let c = l.choose();
        assert_eq!(c.arm_index, 0);
        assert_eq!(c.ucb_scores[0], c.ucb_scores[1]);
    }

    #[test]
    fn first_update_by_hand() {
        let mut s: RidgeState<f64> = RidgeState::new(2, 1.0, 0.01);
        s.update(&[1.0, 0.0], 1.0);
        assert_eq!(s.a, Mat::diag(&[2.0, 1.0]));
        assert!((s.theta_hat[0] - 0.5).abs() < 1e-15 && s.theta_hat[1] == 0.0);
        assert_eq!(s.t, 1);
        let expect = (2.0 * (2.0f64 / 0.01).ln()).sqrt() + 1.0;
        assert!((s.alpha_t - expect).abs() < 1e-12);
    }

    #[test]
    fn zero_update_keeps_estimate() {
        let mut s = RidgeState::new(3, 1.0, 0.01);
        s.update(&[0.0, 0.0, 0.0], 0.0);
        assert_eq!(s.a, Mat::identity(3));
        assert_eq!(s.theta_hat, vec![0.0; 3]);
    }

    #[test]
    fn incremental_matches_batch_ridge() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let d = 5;
        let mut s = RidgeState::new(d, 1.0, 0.01);
        let mut xs = Vec::new();
        let mut rs = Vec::new();
        for _ in 0..500 {
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let r = rng.random_range(-1.0..1.0);
            s.update(&x, r);
            xs.push(x);
            rs.push(r);
        }
        let mut a = Mat::identity(d);
        let mut b = vec![0.0; d];
        for (x, r) in xs.iter().zip(&rs) {
            for i in 0..d {
                b[i] += x[i] * r;
                for j in 0..d {
                    a[(i, j)] += x[i] * x[j];
                }
            }
        }
        assert!(s.a.max_abs_diff(&a) <= 1e-9);
        let batch = spd_solve(&a, &b).unwrap();
        assert!(max_abs(&sub(&batch, &s.theta_hat)) <= 1e-7);
    }

    #[test]
    fn choice_matches_naive_scores() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let arms: Vec<Vec<f64>> = (0..8)
            .map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let mut l = LinUcb::new(arms.clone(), 1.0, 0.01);
        for _ in 0..60 {
            let c = l.choose();
            let s = l.state();
            let naive: Vec<f64> = arms
                .iter()
                .map(|x| {
                    let ainv_x = spd_solve(&s.a, x).unwrap();
                    dot(x, &s.theta_hat) + s.alpha_t * dot(x, &ainv_x).sqrt()
                })
                .collect();
            let best = naive
                .iter()
                .enumerate()
                .fold(0, |b, (i, &v)| if v > naive[b] { i } else { b });
            assert_eq!(c.arm_index, best);
            l.update(c.arm_index, rng.random_range(-1.0..1.0));
        }
    }

    #[test]
    fn confidence_bound_shrinks_with_pulls() {
        let mut l = LinUcb::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], 1.0, 0.01);
        for _ in 0..100 {
            l.update(0, 1.0);
        }
        let s = l.state();
        assert!(s.confidence_bound(&[1.0, 0.0]) <= s.alpha_t / 10.0);
        l.choose();
        assert_eq!(l.cb_bound_record(), (1, 0));
    }

    #[test]
    fn large_lambda_shrinks_estimate() {
        let mut s = RidgeState::new(2, 1e9, 0.01);
        for _ in 0..100 {
            s.update(&[1.0, 0.0], 1.0);
        }
        assert!(norm2(&s.theta_hat) < 1e-6);
        assert_eq!(linucb_lambda_for_unit_ball::<f64>(None), 1.0);
    }
}
