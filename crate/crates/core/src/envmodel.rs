//! Bandit environments: arm pools, the true parameter, reward draws, the
//! random instance generator, and the JSON instance format.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attackability::{self, AttackabilityError};
use crate::numerics::{dot, norm2};
use crate::scalar::Real;

/// Slack allowed on the unit-norm bound for arms and the parameter.
pub const NORM_TOL: f64 = 1e-9;

/// Default cap on rejection-sampling attempts for attackable instances.
pub const DEFAULT_MAX_TRIES: usize = 1000;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("arm index {index} out of range for {k} arms")]
    IndexOutOfRange { index: usize, k: usize },
    #[error("invalid environment field `{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error("`{field}` has norm {norm} > 1 (pass allow-unnormalized to accept it)")]
    Unnormalized { field: String, norm: f64 },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("no attackable environment found after {tries} tries")]
    ExhaustedTries { tries: usize },
    #[error(transparent)]
    Attackability(#[from] AttackabilityError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> EnvError {
    EnvError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

/// Whether arm/parameter norms above one are rejected or only reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NormPolicy {
    #[default]
    Strict,
    /// Accept norms above one with a warning. Used by hand-written
    /// geometric fixtures whose vectors are not rescaled.
    AllowUnnormalized,
}

/// A k-armed linear bandit instance together with the adversary's target.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentSpec<T> {
    pub arms: Vec<Vec<T>>,
    pub theta_star: Vec<T>,
    pub noise_sigma: T,
    pub target_index: usize,
}

/// The part of an environment an adversary without oracle access may see.
#[derive(Debug, Clone, Copy)]
pub struct PublicView<'a, T> {
    pub arms: &'a [Vec<T>],
    pub target_index: usize,
}

impl<'a, T: Real> PublicView<'a, T> {
    pub fn target(&self) -> &'a [T] {
        &self.arms[self.target_index]
    }

    pub fn dim(&self) -> usize {
        self.arms[0].len()
    }

    /// Non-target arms with their original indices.
    pub fn others(&self) -> impl Iterator<Item = (usize, &'a [T])> + 'a {
        let target = self.target_index;
        self.arms
            .iter()
            .enumerate()
            .filter(move |(i, _)| *i != target)
            .map(|(i, a)| (i, a.as_slice()))
    }
}

impl<T: Real> EnvironmentSpec<T> {
    pub fn new(
        arms: Vec<Vec<T>>,
        theta_star: Vec<T>,
        noise_sigma: T,
        target_index: usize,
        policy: NormPolicy,
    ) -> Result<Self, EnvError> {
        let env = Self {
            arms,
            theta_star,
            noise_sigma,
            target_index,
        };
        env.validate(policy)?;
        Ok(env)
    }

    pub fn dim(&self) -> usize {
        self.theta_star.len()
    }

    pub fn num_arms(&self) -> usize {
        self.arms.len()
    }

    pub fn target(&self) -> &[T] {
        &self.arms[self.target_index]
    }

    pub fn public_view(&self) -> PublicView<'_, T> {
        PublicView {
            arms: &self.arms,
            target_index: self.target_index,
        }
    }

    pub fn mean_reward(&self, arm: usize) -> T {
        dot(&self.arms[arm], &self.theta_star)
    }

    /// Index of the arm with the highest true mean (lowest index on ties).
    pub fn best_arm(&self) -> usize {
        let mut best = 0;
        for a in 1..self.num_arms() {
            if self.mean_reward(a) > self.mean_reward(best) {
                best = a;
            }
        }
        best
    }

    pub fn validate(&self, policy: NormPolicy) -> Result<(), EnvError> {
        let d = self.dim();
        let k = self.num_arms();
        if d == 0 {
            return Err(invalid("theta_star", "dimension must be at least 1"));
        }
        if k < 2 {
            return Err(invalid("arms", format!("need at least 2 arms, found {k}")));
        }
        if self.target_index >= k {
            return Err(invalid(
                "target_index",
                format!("{} is not a valid arm index for k = {k}", self.target_index),
            ));
        }
        if !(self.noise_sigma >= T::zero()) || !self.noise_sigma.is_finite() {
            return Err(invalid("sigma", "must be finite and non-negative"));
        }
        if self.theta_star.iter().any(|x| !x.is_finite()) {
            return Err(invalid("theta_star", "entries must be finite"));
        }
        for (i, arm) in self.arms.iter().enumerate() {
            if arm.len() != d {
                return Err(invalid(
                    format!("arms[{i}]"),
                    format!("expected length {d}, found {}", arm.len()),
                ));
            }
            if arm.iter().any(|x| !x.is_finite()) {
                return Err(invalid(format!("arms[{i}]"), "entries must be finite"));
            }
        }
        let limit = T::one() + T::lit(NORM_TOL);
        let check = |field: String, v: &[T]| -> Result<(), EnvError> {
            let n = norm2(v);
            if n > limit {
                match policy {
                    NormPolicy::Strict => {
                        return Err(EnvError::Unnormalized {
                            field,
                            norm: n.as_f64(),
                        })
                    }
                    NormPolicy::AllowUnnormalized => {
                        log::warn!("{field} has norm {n} > 1; accepted as unnormalized")
                    }
                }
            }
            Ok(())
        };
        check("theta_star".to_string(), &self.theta_star)?;
        for (i, arm) in self.arms.iter().enumerate() {
            check(format!("arms[{i}]"), arm)?;
        }
        Ok(())
    }
}

/// One realized reward from the environment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardDraw<T> {
    pub arm_index: usize,
    pub mean: T,
    pub noise: T,
    pub realized: T,
}

/// Independent pseudo-random streams derived from one master seed.
///
/// Environment noise, attack noise and instance sampling each get their own
/// ChaCha stream, so attacked and clean runs with the same seed see the same
/// environment noise.
#[derive(Debug, Clone)]
pub struct RngStreams {
    pub env: ChaCha8Rng,
    pub attack: ChaCha8Rng,
    pub sampler: ChaCha8Rng,
}

impl RngStreams {
    const ENV_STREAM: u64 = 1;
    const ATTACK_STREAM: u64 = 2;
    const SAMPLER_STREAM: u64 = 3;

    pub fn new(seed: u64) -> Self {
        let stream = |id| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(id);
            rng
        };
        Self {
            env: stream(Self::ENV_STREAM),
            attack: stream(Self::ATTACK_STREAM),
            sampler: stream(Self::SAMPLER_STREAM),
        }
    }
}

/// Draws `N(0, σ²)`. A standard normal is always consumed, so the stream
/// position does not depend on `σ`.
pub fn gaussian<T: Real, R: Rng + ?Sized>(rng: &mut R, sigma: T) -> T {
    let z: f64 = rng.sample(StandardNormal);
    sigma * T::lit(z)
}

pub fn draw_reward<T: Real>(
    env: &EnvironmentSpec<T>,
    arm: usize,
    rng: &mut RngStreams,
) -> Result<RewardDraw<T>, EnvError> {
    if arm >= env.num_arms() {
        return Err(EnvError::IndexOutOfRange {
            index: arm,
            k: env.num_arms(),
        });
    }
    let mean = env.mean_reward(arm);
    let noise = gaussian(&mut rng.env, env.noise_sigma);
    Ok(RewardDraw {
        arm_index: arm,
        mean,
        noise,
        realized: mean + noise,
    })
}

fn normalized<T: Real>(v: Vec<T>) -> Vec<T> {
    let n = norm2(&v);
    if n > T::zero() {
        v.into_iter().map(|x| x / n).collect()
    } else {
        v
    }
}

/// Random instance: per-dimension variances `v_j ~ U(0,1)` shared by all
/// arms, arm coordinates `~ N(0, v_j)`, arms and `θ* ~ N(0, I)` normalized
/// to unit length, target drawn uniformly. Uses the sampler stream only.
pub fn sample_environment<T: Real>(
    d: usize,
    k: usize,
    sigma: T,
    rng: &mut RngStreams,
) -> Result<EnvironmentSpec<T>, EnvError> {
    if d < 2 {
        return Err(invalid("d", format!("must be at least 2, found {d}")));
    }
    if k < 2 {
        return Err(invalid("k", format!("must be at least 2, found {k}")));
    }
    let r = &mut rng.sampler;
    let std_devs: Vec<f64> = (0..d).map(|_| r.random::<f64>().sqrt()).collect();
    let mut arms = Vec::with_capacity(k);
    for _ in 0..k {
        let arm: Vec<T> = std_devs
            .iter()
            .map(|&s| T::lit(s * r.sample::<f64, _>(StandardNormal)))
            .collect();
        arms.push(normalized(arm));
    }
    let theta: Vec<T> = (0..d)
        .map(|_| T::lit(r.sample::<f64, _>(StandardNormal)))
        .collect();
    let target_index = r.random_range(0..k);
    EnvironmentSpec::new(arms, normalized(theta), sigma, target_index, NormPolicy::Strict)
}

/// An accepted instance and the number of draws it took.
#[derive(Debug, Clone)]
pub struct Sampled<T> {
    pub env: EnvironmentSpec<T>,
    pub tries: usize,
}

/// Redraws `generate` until the instance is certified attackable
/// (`ε* > 0`), at most `max_tries` times.
pub fn resample_until_attackable<T, F>(
    max_tries: usize,
    rng: &mut RngStreams,
    mut generate: F,
) -> Result<Sampled<T>, EnvError>
where
    T: Real,
    F: FnMut(&mut RngStreams) -> Result<EnvironmentSpec<T>, EnvError>,
{
    if max_tries == 0 {
        return Err(invalid("max_tries", "must be at least 1"));
    }
    for tries in 1..=max_tries {
        let env = generate(rng)?;
        let report = attackability::certify(&env)?;
        if report.attackable {
            return Ok(Sampled { env, tries });
        }
    }
    Err(EnvError::ExhaustedTries { tries: max_tries })
}

pub fn sample_attackable_environment<T: Real>(
    d: usize,
    k: usize,
    sigma: T,
    rng: &mut RngStreams,
    max_tries: usize,
) -> Result<Sampled<T>, EnvError> {
    resample_until_attackable(max_tries, rng, |r| sample_environment(d, k, sigma, r))
}

/// On-disk instance layout.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub d: usize,
    pub k: usize,
    pub sigma: f64,
    pub arms: Vec<Vec<f64>>,
    pub theta_star: Vec<f64>,
    pub target_index: usize,
}

impl From<&EnvironmentSpec<f64>> for InstanceFile {
    fn from(env: &EnvironmentSpec<f64>) -> Self {
        Self {
            d: env.dim(),
            k: env.num_arms(),
            sigma: env.noise_sigma,
            arms: env.arms.clone(),
            theta_star: env.theta_star.clone(),
            target_index: env.target_index,
        }
    }
}

impl InstanceFile {
    pub fn into_spec(self, policy: NormPolicy) -> Result<EnvironmentSpec<f64>, EnvError> {
        if self.theta_star.len() != self.d {
            return Err(invalid(
                "theta_star",
                format!("header says d = {}, found length {}", self.d, self.theta_star.len()),
            ));
        }
        if self.arms.len() != self.k {
            return Err(invalid(
                "arms",
                format!("header says k = {}, found {} arms", self.k, self.arms.len()),
            ));
        }
        for (i, arm) in self.arms.iter().enumerate() {
            if arm.len() != self.d {
                return Err(invalid(
                    format!("arms[{i}]"),
                    format!("header says d = {}, found length {}", self.d, arm.len()),
                ));
            }
        }
        EnvironmentSpec::new(self.arms, self.theta_star, self.sigma, self.target_index, policy)
    }
}

pub fn instance_to_json(env: &EnvironmentSpec<f64>) -> String {
    serde_json::to_string_pretty(&InstanceFile::from(env)).expect("instance serializes")
}

pub fn instance_from_json(text: &str, policy: NormPolicy) -> Result<EnvironmentSpec<f64>, EnvError> {
    let file: InstanceFile = serde_json::from_str(text).map_err(|e| EnvError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    file.into_spec(policy)
}

pub fn save_instance(env: &EnvironmentSpec<f64>, path: &Path) -> Result<(), EnvError> {
    fs::write(path, instance_to_json(env) + "\n").map_err(|source| EnvError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_instance(path: &Path, policy: NormPolicy) -> Result<EnvironmentSpec<f64>, EnvError> {
    let text = fs::read_to_string(path).map_err(|source| EnvError::Io {
        path: path.display().to_string(),
        source,
    })?;
    instance_from_json(&text, policy)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env2(theta: [f64; 2], sigma: f64) -> EnvironmentSpec<f64> {
        EnvironmentSpec::new(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            theta.to_vec(),
            sigma,
            0,
            NormPolicy::Strict,
        )
        .unwrap()
    }

    #[test]
    fn noiseless_draws() {
        let mut rng = RngStreams::new(1);
        let draw = draw_reward(&env2([0.5, 0.0], 0.0), 0, &mut rng).unwrap();
        assert_eq!(draw.realized, 0.5);
        assert_eq!(draw.realized, draw.mean + draw.noise);
        let draw = draw_reward(&env2([0.0, 0.0], 0.0), 1, &mut rng).unwrap();
        assert_eq!(draw.realized, 0.0);
        assert!(matches!(
            draw_reward(&env2([0.0, 0.0], 0.0), 2, &mut rng),
            Err(EnvError::IndexOutOfRange { index: 2, k: 2 })
        ));
    }

    #[test]
    fn noise_moments_match() {
        let env = env2([0.6, 0.8], 0.1);
        let mut rng = RngStreams::new(99);
        let n = 100_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| draw_reward(&env, 1, &mut rng).unwrap().realized)
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - 0.8).abs() <= 3.0 * 0.1 / (n as f64).sqrt());
        // Var of the sample variance of a Gaussian is 2σ⁴/(n−1).
        assert!((var - 0.01).abs() <= 4.0 * (2.0 * 1e-4 / (n - 1) as f64).sqrt());
    }

    #[test]
    fn sampled_environment_shapes() {
        let mut rng = RngStreams::new(4);
        let env: EnvironmentSpec<f64> = sample_environment(10, 30, 0.1, &mut rng).unwrap();
        assert_eq!(env.num_arms(), 30);
        assert_eq!(env.dim(), 10);
        for a in &env.arms {
            assert!((norm2(a) - 1.0).abs() < 1e-9);
        }
        assert!((norm2(&env.theta_star) - 1.0).abs() < 1e-9);

        let small: EnvironmentSpec<f64> = sample_environment(2, 2, 0.1, &mut rng).unwrap();
        for a in &small.arms {
            assert!((norm2(a) - 1.0).abs() < 1e-12);
        }
        assert!(sample_environment::<f64>(1, 3, 0.1, &mut rng).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let a: EnvironmentSpec<f64> = sample_environment(6, 8, 0.1, &mut RngStreams::new(17)).unwrap();
        let b: EnvironmentSpec<f64> = sample_environment(6, 8, 0.1, &mut RngStreams::new(17)).unwrap();
        assert_eq!(instance_to_json(&a), instance_to_json(&b));
        let c: EnvironmentSpec<f64> = sample_environment(6, 8, 0.1, &mut RngStreams::new(18)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn attackable_sampler_accepts_orthonormal_first_try() {
        let mut rng = RngStreams::new(2);
        let sampled = resample_until_attackable(5, &mut rng, |r| {
            let target = r.sampler.random_range(0..4);
            let arms = (0..4)
                .map(|i| (0..4).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect();
            EnvironmentSpec::new(arms, vec![0.5, 0.5, 0.5, 0.5], 0.1, target, NormPolicy::Strict)
        })
        .unwrap();
        assert_eq!(sampled.tries, 1);
    }

    #[test]
    fn attackable_sampler_exhausts_on_duplicate_arms() {
        let mut rng = RngStreams::new(2);
        let err = resample_until_attackable(7, &mut rng, |r| {
            let target = r.sampler.random_range(0..3);
            let arms = vec![vec![0.6, 0.8]; 3];
            EnvironmentSpec::new(arms, vec![1.0, 0.0], 0.1, target, NormPolicy::Strict)
        })
        .unwrap_err();
        assert!(matches!(err, EnvError::ExhaustedTries { tries: 7 }));
    }

    #[test]
    fn default_sampler_finds_attackable_instance() {
        let mut rng = RngStreams::new(10);
        let s = sample_attackable_environment(10, 30, 0.1, &mut rng, DEFAULT_MAX_TRIES).unwrap();
        let report = attackability::certify(&s.env).unwrap();
        assert!(report.attackable && report.epsilon_star > 0.0);
        assert!(s.tries >= 1);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let env: EnvironmentSpec<f64> = sample_environment(5, 7, 0.1, &mut RngStreams::new(3)).unwrap();
        let back = instance_from_json(&instance_to_json(&env), NormPolicy::Strict).unwrap();
        assert_eq!(env, back);
    }

    #[test]
    fn malformed_files_report_location() {
        let bad_header = r#"{"d": 3, "k": 2, "sigma": 0.1, "arms": [[1,0],[0,1]], "theta_star": [0,1], "target_index": 0}"#;
        match instance_from_json(bad_header, NormPolicy::Strict) {
            Err(EnvError::Invalid { field, .. }) => assert_eq!(field, "theta_star"),
            other => panic!("unexpected {other:?}"),
        }
        let truncated = "{\n  \"d\": 2,\n  \"k\": ";
        match instance_from_json(truncated, NormPolicy::Strict) {
            Err(EnvError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unnormalized_needs_opt_in() {
        let arms = vec![vec![0.0, 1.0], vec![1.0, 2.0]];
        assert!(matches!(
            EnvironmentSpec::new(arms.clone(), vec![1.0, 1.0], 0.1, 0, NormPolicy::Strict),
            Err(EnvError::Unnormalized { .. })
        ));
        assert!(EnvironmentSpec::new(arms, vec![1.0, 1.0], 0.1, 0, NormPolicy::AllowUnnormalized).is_ok());
    }
}
