use rayon::prelude::*;
use serde::Serialize;

use super::config::{AttackKind, ExperimentConfig};
use super::run::{run_single, stage1_verdict, RunOutput};
use super::HarnessError;
use crate::attackability::certify;
use crate::envmodel::{EnvironmentSpec, RngStreams};

/// Runs every seed of `cfg` in parallel; results come back in seed order.
pub fn run_campaign(cfg: &ExperimentConfig) -> Result<Vec<RunOutput>, HarnessError> {
    cfg.validate()?;
    cfg.seeds.par_iter().map(|&seed| run_single(cfg, seed)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    #[serde(rename = "T1")]
    pub t1: usize,
    pub sigma: f64,
    pub reps: usize,
    pub false_negatives: usize,
    pub rate: f64,
}

/// Fraction of repetitions in which the two-stage adversary wrongly
/// declares an attackable instance unattackable after `T₁` rounds against
/// LinUCB, for every `(T₁, σ)` pair. Repetition `i` uses seed
/// `base_seed + i` in every cell.
pub fn false_negative_sweep(
    env: &EnvironmentSpec<f64>,
    t1_values: &[usize],
    sigma_values: &[f64],
    reps: usize,
    base_seed: u64,
) -> Result<Vec<SweepCell>, HarnessError> {
    let truth = certify(env)?;
    if !truth.attackable {
        return Err(HarnessError::FixtureNotAttackable {
            epsilon: truth.epsilon_star,
        });
    }
    let mut cells = Vec::new();
    for &t1 in t1_values {
        for &sigma in sigma_values {
            let mut e = env.clone();
            e.noise_sigma = sigma;
            let verdicts: Vec<bool> = (0..reps as u64)
                .into_par_iter()
                .map(|i| {
                    let mut streams = RngStreams::new(base_seed + i);
                    stage1_verdict(&e, t1, 1.0, 0.01, &mut streams)
                })
                .collect::<Result<_, _>>()?;
            let false_negatives = verdicts.iter().filter(|&&v| !v).count();
            cells.push(SweepCell {
                t1,
                sigma,
                reps,
                false_negatives,
                rate: false_negatives as f64 / reps.max(1) as f64,
            });
        }
    }
    Ok(cells)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbePoint {
    #[serde(rename = "T")]
    pub horizon: usize,
    /// `C(T)/T` per seed, in seed order.
    pub cost_per_round: Vec<f64>,
    pub mean_cost: f64,
    pub mean_cost_per_round: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    pub points: Vec<ProbePoint>,
    /// Least-squares slope of `log C` against `log T`; `None` when some
    /// mean cost is zero.
    pub beta: Option<f64>,
}

/// Reruns `cfg` at each horizon in `checkpoints` (T₁ left to the default
/// rule unless fixed in `cfg`) and fits the growth exponent of the cost.
pub fn sublinearity_probe(cfg: &ExperimentConfig, checkpoints: &[usize]) -> Result<ProbeReport, HarnessError> {
    if checkpoints.len() < 2 {
        return Err(HarnessError::Config {
            field: "checkpoints".into(),
            message: "need at least two horizons".into(),
        });
    }
    let mut points = Vec::new();
    for &horizon in checkpoints {
        let mut c = cfg.clone();
        c.horizon = horizon as i64;
        if c.attack != AttackKind::TwoStage {
            c.t1 = None;
        }
        let runs = run_campaign(&c)?;
        let cost_per_round: Vec<f64> = runs.iter().map(|r| r.result.total_cost / horizon as f64).collect();
        let n = runs.len() as f64;
        let mean_cost = runs.iter().map(|r| r.result.total_cost).sum::<f64>() / n;
        points.push(ProbePoint {
            horizon,
            mean_cost_per_round: mean_cost / horizon as f64,
            cost_per_round,
            mean_cost,
        });
    }
    let beta = if points.iter().all(|p| p.mean_cost > 0.0) {
        let xy: Vec<(f64, f64)> = points
            .iter()
            .map(|p| ((p.horizon as f64).ln(), p.mean_cost.ln()))
            .collect();
        Some(fit_slope(&xy))
    } else {
        None
    };
    Ok(ProbeReport { points, beta })
}

/// Ordinary least-squares slope.
pub fn fit_slope(xy: &[(f64, f64)]) -> f64 {
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = xy.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xy.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let xy: Vec<(f64, f64)> = [10.0f64, 100.0, 1000.0]
            .iter()
            .map(|&t| (t.ln(), (3.0 * t.powf(0.75)).ln()))
            .collect();
        assert!((fit_slope(&xy) - 0.75).abs() < 1e-12);
    }
}
