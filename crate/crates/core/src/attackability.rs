//! Attackability index and certificate.
//!
//! An environment/target pair is attackable iff
//!
//! ```text
//! ε* = max ε  s.t.  x̃ᵀθ∥ ≥ ε + x_aᵀ(θ∥ + θ⊥)   for every non-target arm a
//!                   x̃ᵀθ⊥ = 0
//!                   ‖θ∥ + θ⊥‖ ≤ 1
//! ```
//!
//! is strictly positive, where `θ∥` is the projection of the parameter onto
//! the target arm. Writing `θ⊥ = B z` with `B` an orthonormal basis of the
//! complement of `x̃` turns this into a concave max–min over a Euclidean ball
//! of radius `√(1 − ‖θ∥‖²)`, which is what the solvers here work on.

use serde::Serialize;
use thiserror::Error;

use crate::envmodel::{EnvironmentSpec, PublicView};
use crate::numerics::{add_scaled, dot, norm2, nullspace_basis, scale, sub, Mat, NumericsError};
use crate::scalar::Real;

/// Iteration budget for the general-dimension solver.
pub const DEFAULT_MAX_ITER: usize = 200_000;
/// Tolerance on `‖θ∥‖ ≤ 1` before the problem is declared infeasible.
pub const NORM_TOL: f64 = 1e-9;
/// Tolerance on `x̃ᵀθ⊥ = 0` and `‖θ∥ + θ⊥‖ ≤ 1` for reported certificates.
pub const CERTIFICATE_TOL: f64 = 1e-8;
/// Tolerance on the per-arm gap constraints for reported certificates.
pub const CONSTRAINT_TOL: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AttackabilityError {
    #[error("target arm is the zero vector")]
    ZeroTarget,
    #[error("projected parameter has norm {norm} > 1; no feasible certificate exists")]
    InfeasibleNorm { norm: f64 },
    #[error("exact solver needs a one-dimensional null space, found dimension {found}")]
    WrongDimension { found: usize },
    #[error("certificate failed verification: {0}")]
    CertificateInvalid(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// `θ∥ = (x̃ᵀθ / ‖x̃‖²) x̃` together with `x̃ᵀθ∥`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectedParam<T> {
    pub theta_parallel: Vec<T>,
    pub target_mean: T,
}

impl<T: Real> ProjectedParam<T> {
    /// Builds `θ∥` from an (estimated) mean reward of the target arm.
    pub fn from_target_reward(target: &[T], mean_reward: T) -> Result<Self, AttackabilityError> {
        let nn = dot(target, target);
        if !(nn > T::zero()) {
            return Err(AttackabilityError::ZeroTarget);
        }
        let theta_parallel = scale(mean_reward / nn, target);
        let target_mean = dot(target, &theta_parallel);
        Ok(Self {
            theta_parallel,
            target_mean,
        })
    }
}

pub fn project_parallel<T: Real>(
    target: &[T],
    theta: &[T],
) -> Result<ProjectedParam<T>, AttackabilityError> {
    ProjectedParam::from_target_reward(target, dot(target, theta))
}

/// `max_{‖z‖ ≤ radius} min_a (offsets[a] − slopes[a]ᵀ z)`
#[derive(Debug, Clone, PartialEq)]
pub struct MaxMinBallProblem<T> {
    pub slopes: Vec<Vec<T>>,
    pub offsets: Vec<T>,
    pub radius: T,
}

impl<T: Real> MaxMinBallProblem<T> {
    pub fn dim(&self) -> usize {
        self.slopes.first().map_or(0, Vec::len)
    }

    /// Objective value and the active piece (lowest index on ties).
    pub fn evaluate(&self, z: &[T]) -> (T, usize) {
        let mut best = T::infinity();
        let mut arg = 0;
        for (a, (s, &o)) in self.slopes.iter().zip(&self.offsets).enumerate() {
            let v = o - dot(s, z);
            if v < best {
                best = v;
                arg = a;
            }
        }
        (best, arg)
    }

    pub fn objective(&self, z: &[T]) -> T {
        self.evaluate(z).0
    }

    fn max_slope_norm(&self) -> T {
        self.slopes.iter().map(|s| norm2(s)).fold(T::zero(), T::max)
    }
}

/// The reduced problem plus the basis that maps `z` back to `θ⊥ = B z`.
#[derive(Debug, Clone)]
pub struct Reduction<T> {
    pub problem: MaxMinBallProblem<T>,
    pub basis: Mat<T>,
    /// Original arm index of each row of the problem.
    pub arm_indices: Vec<usize>,
}

pub fn reduce_to_ball<T: Real>(
    view: PublicView<'_, T>,
    proj: &ProjectedParam<T>,
) -> Result<Reduction<T>, AttackabilityError> {
    let target = view.target();
    let basis = nullspace_basis(target).map_err(|_| AttackabilityError::ZeroTarget)?;
    let pn = norm2(&proj.theta_parallel);
    if pn > T::one() + T::tol(NORM_TOL) {
        return Err(AttackabilityError::InfeasibleNorm { norm: pn.as_f64() });
    }
    let radius = (T::one() - pn * pn).max(T::zero()).sqrt();
    let mut slopes = Vec::new();
    let mut offsets = Vec::new();
    let mut arm_indices = Vec::new();
    for (i, arm) in view.others() {
        offsets.push(proj.target_mean - dot(arm, &proj.theta_parallel));
        slopes.push(basis.tr_mul_vec(arm));
        arm_indices.push(i);
    }
    Ok(Reduction {
        problem: MaxMinBallProblem {
            slopes,
            offsets,
            radius,
        },
        basis,
        arm_indices,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    Exact1d,
    Subgradient,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BallSolution<T> {
    pub epsilon: T,
    pub z: Vec<T>,
    pub iterations: usize,
    pub duality_gap_bound: T,
    pub method: SolveMethod,
}

/// Exact maximizer for a one-dimensional reduced problem.
///
/// The objective is concave piecewise linear on `[−r, r]`, so its maximum is
/// attained at an endpoint or at an intersection of two pieces. All such
/// candidates (plus `0`) are evaluated; ties go to the smaller `|z|`.
pub fn solve_exact_1d<T: Real>(p: &MaxMinBallProblem<T>) -> Result<BallSolution<T>, AttackabilityError> {
    if p.dim() != 1 {
        return Err(AttackabilityError::WrongDimension { found: p.dim() });
    }
    let r = p.radius;
    let mut candidates = vec![T::zero()];
    if r > T::zero() {
        candidates.push(-r);
        candidates.push(r);
        for a in 0..p.slopes.len() {
            for b in (a + 1)..p.slopes.len() {
                let ds = p.slopes[a][0] - p.slopes[b][0];
                if ds != T::zero() {
                    let z = (p.offsets[a] - p.offsets[b]) / ds;
                    if z.abs() <= r {
                        candidates.push(z);
                    }
                }
            }
        }
    }
    let tie = T::lit(8.0) * T::epsilon();
    let mut best_z = T::zero();
    let mut best = p.objective(&[best_z]);
    for &z in &candidates[1..] {
        let v = p.objective(&[z]);
        let scale = T::one().max(best.abs());
        if v > best + tie * scale || ((v - best).abs() <= tie * scale && z.abs() < best_z.abs()) {
            best = v;
            best_z = z;
        }
    }
    Ok(BallSolution {
        epsilon: best,
        z: vec![best_z],
        iterations: candidates.len(),
        duality_gap_bound: T::zero(),
        method: SolveMethod::Exact1d,
    })
}

/// Same as [`MaxMinBallProblem::evaluate`] over row-major slopes.
fn evaluate_flat<T: Real>(flat: &[T], offsets: &[T], z: &[T]) -> (T, usize) {
    let mut best = T::infinity();
    let mut arg = 0;
    for (a, (row, &o)) in flat.chunks_exact(z.len()).zip(offsets).enumerate() {
        let v = o - dot(row, z);
        if v < best {
            best = v;
            arg = a;
        }
    }
    (best, arg)
}

fn project_to_ball<T: Real>(z: &mut [T], r: T) {
    let n = norm2(z);
    if n > r {
        let s = r / n;
        z.iter_mut().for_each(|x| *x = *x * s);
    }
}

/// Projected supergradient ascent on `f(z) = min_a (o_a − s_aᵀz)` over
/// `‖z‖ ≤ r`, with normalized steps `r/√t`.
///
/// Returns whichever of the best visited iterate and the step-weighted
/// average scores higher. The reported gap bound is `G r / √max_iter` with
/// `G` the largest slope norm. `tol` is advisory: the budget is fixed so
/// runs are reproducible.
pub fn solve_subgradient<T: Real>(
    p: &MaxMinBallProblem<T>,
    max_iter: usize,
    _tol: T,
) -> BallSolution<T> {
    let m = p.dim();
    let r = p.radius;
    let g_max = p.max_slope_norm();
    let zero = vec![T::zero(); m];
    if !(r > T::zero()) || m == 0 || !(g_max > T::zero()) || p.slopes.is_empty() {
        return BallSolution {
            epsilon: p.objective(&zero),
            z: zero,
            iterations: 0,
            duality_gap_bound: T::zero(),
            method: SolveMethod::Subgradient,
        };
    }

    let mut z = zero.clone();
    let mut best_z = zero.clone();
    let mut best = T::neg_infinity();
    let mut avg = zero;
    let mut weight = T::zero();
    let mut iterations = 0;
    // Unit directions; `None` marks a flat piece.
    let dirs: Vec<Option<Vec<T>>> = p
        .slopes
        .iter()
        .map(|s| {
            let ns = norm2(s);
            (ns > T::zero()).then(|| s.iter().map(|&x| x / ns).collect())
        })
        .collect();
    // Row-major copy of the slopes so the hot loop walks one buffer.
    let flat: Vec<T> = p.slopes.iter().flatten().copied().collect();
    for t in 1..=max_iter {
        iterations = t;
        let (f, active) = evaluate_flat(&flat, &p.offsets, &z);
        if f > best {
            best = f;
            best_z.copy_from_slice(&z);
        }
        let Some(dir) = &dirs[active] else {
            // The active piece is flat, so f(z) is a global upper bound.
            break;
        };
        let step = r / T::count(t).sqrt();
        for (zi, &di) in z.iter_mut().zip(dir) {
            *zi = *zi - step * di;
        }
        project_to_ball(&mut z, r);
        weight = weight + step;
        for (ai, &zi) in avg.iter_mut().zip(&z) {
            *ai = *ai + step * zi;
        }
    }
    let last = p.objective(&z);
    if last > best {
        best = last;
        best_z.copy_from_slice(&z);
    }
    if weight > T::zero() {
        let mean: Vec<T> = avg.iter().map(|&a| a / weight).collect();
        let v = p.objective(&mean);
        if v > best {
            best = v;
            best_z = mean;
        }
    }
    BallSolution {
        epsilon: best,
        z: best_z,
        iterations,
        duality_gap_bound: g_max * r / T::count(max_iter.max(1)).sqrt(),
        method: SolveMethod::Subgradient,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttackabilityReport<T> {
    pub epsilon_star: T,
    /// `θ⊥`, orthogonal to the target arm.
    pub certificate: Vec<T>,
    pub attackable: bool,
    pub iterations: usize,
    pub duality_gap_bound: T,
    pub method: SolveMethod,
    pub theta_parallel: Vec<T>,
}

impl<T: Real> AttackabilityReport<T> {
    /// The attacker's parameter `θ∥ + θ⊥`.
    pub fn theta_tilde(&self) -> Vec<T> {
        add_scaled(&self.theta_parallel, T::one(), &self.certificate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolverOptions {
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

/// Solves for the attackability index with default solver options.
pub fn attackability_index<T: Real>(
    view: PublicView<'_, T>,
    proj: &ProjectedParam<T>,
) -> Result<AttackabilityReport<T>, AttackabilityError> {
    attackability_index_with(view, proj, SolverOptions::default())
}

pub fn attackability_index_with<T: Real>(
    view: PublicView<'_, T>,
    proj: &ProjectedParam<T>,
    opts: SolverOptions,
) -> Result<AttackabilityReport<T>, AttackabilityError> {
    let red = reduce_to_ball(view, proj)?;
    let sol = if red.problem.dim() == 1 {
        solve_exact_1d(&red.problem)?
    } else {
        solve_subgradient(&red.problem, opts.max_iter, T::zero())
    };
    let certificate = red.basis.mul_vec(&sol.z);
    let report = AttackabilityReport {
        epsilon_star: sol.epsilon,
        certificate,
        attackable: sol.epsilon > T::zero(),
        iterations: sol.iterations,
        duality_gap_bound: sol.duality_gap_bound,
        method: sol.method,
        theta_parallel: proj.theta_parallel.clone(),
    };
    verify_certificate(view, proj, &report.certificate, report.epsilon_star)?;
    Ok(report)
}

/// Attackability of an environment with full knowledge of `θ*`.
pub fn certify<T: Real>(env: &EnvironmentSpec<T>) -> Result<AttackabilityReport<T>, AttackabilityError> {
    let proj = project_parallel(env.target(), &env.theta_star)?;
    attackability_index(env.public_view(), &proj)
}

/// Checks the constraints of the original program for a candidate
/// `(ε, θ⊥)`.
pub fn verify_certificate<T: Real>(
    view: PublicView<'_, T>,
    proj: &ProjectedParam<T>,
    certificate: &[T],
    epsilon: T,
) -> Result<(), AttackabilityError> {
    let violations = certificate_violations(view, proj, certificate, epsilon);
    match violations.first() {
        None => Ok(()),
        Some(v) => Err(AttackabilityError::CertificateInvalid(v.to_string())),
    }
}

/// A violated constraint of the original program.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NotOrthogonal { inner: f64 },
    NormExceeded { norm: f64 },
    Gap { arm: usize, perturbed_mean: f64, bound: f64 },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::NotOrthogonal { inner } => write!(f, "x̃ᵀθ⊥ = {inner} ≠ 0"),
            Violation::NormExceeded { norm } => write!(f, "‖θ∥ + θ⊥‖ = {norm} > 1"),
            Violation::Gap {
                arm,
                perturbed_mean,
                bound,
            } => write!(f, "arm {arm} has perturbed mean {perturbed_mean} > {bound}"),
        }
    }
}

/// Every constraint of the original program violated by `(ε, θ⊥)`.
pub fn certificate_violations<T: Real>(
    view: PublicView<'_, T>,
    proj: &ProjectedParam<T>,
    certificate: &[T],
    epsilon: T,
) -> Vec<Violation> {
    let mut out = Vec::new();
    let target = view.target();
    let tol = T::tol(CERTIFICATE_TOL);
    let inner = dot(target, certificate);
    if inner.abs() > tol * T::one().max(norm2(target)) {
        out.push(Violation::NotOrthogonal { inner: inner.as_f64() });
    }
    let theta = add_scaled(&proj.theta_parallel, T::one(), certificate);
    let n = norm2(&theta);
    if n > T::one() + tol {
        out.push(Violation::NormExceeded { norm: n.as_f64() });
    }
    let bound = proj.target_mean - epsilon;
    for (a, arm) in view.others() {
        let perturbed = dot(arm, &theta);
        if perturbed > bound + T::tol(CONSTRAINT_TOL) {
            out.push(Violation::Gap {
                arm: a,
                perturbed_mean: perturbed.as_f64(),
                bound: bound.as_f64(),
            });
        }
    }
    out
}

/// `θ₀ = argmax_{‖θ‖≤1} [x̃ᵀθ − max_{a≠x̃} x_aᵀθ]` and its optimal gap `ε₀*`.
#[derive(Debug, Clone, PartialEq)]
pub struct Theta0<T> {
    pub theta0: Vec<T>,
    pub epsilon0: T,
}

pub fn solve_theta0<T: Real>(view: PublicView<'_, T>) -> Theta0<T> {
    solve_theta0_with(view, SolverOptions::default())
}

pub fn solve_theta0_with<T: Real>(view: PublicView<'_, T>, opts: SolverOptions) -> Theta0<T> {
    let target = view.target();
    let problem = MaxMinBallProblem {
        slopes: view.others().map(|(_, a)| sub(a, target)).collect(),
        offsets: vec![T::zero(); view.arms.len() - 1],
        radius: T::one(),
    };
    let sol = solve_subgradient(&problem, opts.max_iter, T::zero());
    Theta0 {
        theta0: sol.z,
        epsilon0: sol.epsilon,
    }
}
