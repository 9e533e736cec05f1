use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::HarnessError;
use crate::bandits::{DEFAULT_DELTA, DEFAULT_LAMBDA};
use crate::envmodel::DEFAULT_MAX_TRIES;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VictimKind {
    LinUcb,
    RobustPhe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    None,
    Oracle,
    TwoStage,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvSource {
    /// Fresh random instance per seed.
    Sample,
    /// Random instance per seed, redrawn until certified attackable.
    SampleAttackable,
    /// Fixed instance from an instance JSON file; its own `sigma` is used.
    File(PathBuf),
}

fn default_lambda() -> f64 {
    DEFAULT_LAMBDA
}

fn default_delta() -> f64 {
    DEFAULT_DELTA
}

fn default_max_tries() -> usize {
    DEFAULT_MAX_TRIES
}

/// One campaign: an instance recipe, a victim, an attack and a seed list.
///
/// `T` and `T1` are signed so that a negative value is reported by
/// [`ExperimentConfig::validate`] under its own field name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub d: usize,
    pub k: usize,
    pub sigma: f64,
    #[serde(rename = "T")]
    pub horizon: i64,
    /// Stage-1 length; `None` picks ⌈√T⌉ against LinUCB and ⌈T^0.4⌉
    /// against RobustPhE.
    #[serde(rename = "T1", default)]
    pub t1: Option<i64>,
    pub victim: VictimKind,
    pub attack: AttackKind,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    pub seeds: Vec<u64>,
    pub env_source: EnvSource,
    #[serde(default)]
    pub allow_unnormalized: bool,
    /// First-target-pull compensation; `None` enables it against LinUCB
    /// only.
    #[serde(default)]
    pub compensate: Option<bool>,
    /// Noise scale in RobustPhE's confidence width; `None` uses the
    /// instance's `sigma`.
    #[serde(default)]
    pub phe_noise_scale: Option<f64>,
    /// Noise scale `R` in LinUCB's `alpha_t`; `None` uses the instance's
    /// `sigma`.
    #[serde(default)]
    pub linucb_noise_scale: Option<f64>,
    #[serde(default = "default_max_tries")]
    pub max_tries: usize,
}

fn invalid(field: &str, message: impl Into<String>) -> HarnessError {
    HarnessError::Config {
        field: field.to_string(),
        message: message.into(),
    }
}

impl ExperimentConfig {
    /// Desk-scale settings: d = 10, k = 30, σ = 0.1, T = 10⁴, ten seeds on
    /// attackable samples.
    pub fn desk_default(victim: VictimKind, attack: AttackKind) -> Self {
        Self {
            d: 10,
            k: 30,
            sigma: 0.1,
            horizon: 10_000,
            t1: None,
            victim,
            attack,
            lambda: DEFAULT_LAMBDA,
            delta: DEFAULT_DELTA,
            seeds: (0..10).collect(),
            env_source: EnvSource::SampleAttackable,
            allow_unnormalized: false,
            compensate: None,
            phe_noise_scale: None,
            linucb_noise_scale: None,
            max_tries: DEFAULT_MAX_TRIES,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.horizon < 1 {
            return Err(invalid("T", format!("must be at least 1, found {}", self.horizon)));
        }
        if !matches!(self.env_source, EnvSource::File(_)) {
            if self.d < 2 {
                return Err(invalid("d", format!("must be at least 2, found {}", self.d)));
            }
            if self.k < 2 {
                return Err(invalid("k", format!("must be at least 2, found {}", self.k)));
            }
            if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
                return Err(invalid("sigma", format!("must be finite and non-negative, found {}", self.sigma)));
            }
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(invalid("lambda", format!("must be positive, found {}", self.lambda)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid("delta", format!("must lie in (0, 1), found {}", self.delta)));
        }
        if self.seeds.is_empty() {
            return Err(invalid("seeds", "must not be empty"));
        }
        if self.max_tries == 0 {
            return Err(invalid("max_tries", "must be at least 1"));
        }
        for (field, v) in [("phe_noise_scale", self.phe_noise_scale), ("linucb_noise_scale", self.linucb_noise_scale)] {
            if let Some(s) = v {
                if !(s >= 0.0 && s.is_finite()) {
                    return Err(invalid(field, format!("must be finite and non-negative, found {s}")));
                }
            }
        }
        if let Some(t1) = self.t1 {
            if self.attack == AttackKind::TwoStage && !(t1 > 0 && t1 < self.horizon) {
                return Err(invalid("T1", format!("must satisfy 0 < T1 < T = {}, found {t1}", self.horizon)));
            }
        }
        if self.attack == AttackKind::TwoStage && self.stage1_length() >= self.horizon() {
            return Err(invalid("T", "too short to leave room for a second stage"));
        }
        Ok(())
    }

    pub fn horizon(&self) -> usize {
        self.horizon.max(0) as usize
    }

    pub fn stage1_length(&self) -> usize {
        match self.t1 {
            Some(t1) => t1.max(0) as usize,
            None => default_t1(self.victim, self.horizon()),
        }
    }

    pub fn compensate(&self) -> bool {
        self.compensate.unwrap_or(self.victim == VictimKind::LinUcb)
    }

    /// SHA-256 of the canonical JSON encoding, hex.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(json.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// ⌈T^{1/2}⌉ against LinUCB, ⌈T^{2/5}⌉ against RobustPhE.
pub fn default_t1(victim: VictimKind, horizon: usize) -> usize {
    let t = horizon as f64;
    let v = match victim {
        VictimKind::LinUcb => t.sqrt(),
        VictimKind::RobustPhe => t.powf(0.4),
    };
    v.ceil() as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_stage_lengths() {
        assert_eq!(default_t1(VictimKind::LinUcb, 10_000), 100);
        assert_eq!(default_t1(VictimKind::RobustPhe, 10_000), 40);
        assert_eq!(default_t1(VictimKind::LinUcb, 2_500), 50);
    }

    #[test]
    fn validation_names_field() {
        let mut c = ExperimentConfig::desk_default(VictimKind::LinUcb, AttackKind::TwoStage);
        c.horizon = -5;
        match c.validate() {
            Err(HarnessError::Config { field, .. }) => assert_eq!(field, "T"),
            other => panic!("unexpected {other:?}"),
        }
        let mut c = ExperimentConfig::desk_default(VictimKind::LinUcb, AttackKind::TwoStage);
        c.t1 = Some(10_000);
        assert!(matches!(c.validate(), Err(HarnessError::Config { field, .. }) if field == "T1"));
    }

    #[test]
    fn json_shape() {
        let text = r#"{"d": 10, "k": 30, "sigma": 0.1, "T": 100, "victim": "robustphe",
            "attack": "two_stage", "seeds": [1, 2], "env_source": {"file": "x.json"}}"#;
        let c: ExperimentConfig = serde_json::from_str(text).unwrap();
        assert_eq!(c.env_source, EnvSource::File("x.json".into()));
        assert_eq!(c.stage1_length(), 7);
        assert!(!c.compensate());
        assert_eq!(c.lambda, 1.0);
        let back: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        assert!(serde_json::from_str::<ExperimentConfig>(&text.replace("\"d\"", "\"dd\"")).is_err());
    }
}
