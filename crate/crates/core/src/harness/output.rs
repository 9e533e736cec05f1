use std::fs;
use std::path::Path;

use serde::Serialize;

use super::experiments::{ProbeReport, SweepCell};
use super::run::{RunOutput, RunResult};
use super::HarnessError;
use crate::attacks::LedgerEntry;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<(), HarnessError> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(io_err(path))
}

/// Round log with columns `round, arm_index, is_target, true_reward,
/// fed_reward, delta, cum_cost, cum_target_pulls, phase`.
pub fn write_round_log(path: &Path, entries: &[LedgerEntry<f64>]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    for e in entries {
        w.serialize(e)?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_xy(path: &Path, points: impl IntoIterator<Item = (f64, f64)>) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["x", "y"])?;
    for (x, y) in points {
        w.write_record([x.to_string(), y.to_string()])?;
    }
    w.flush().map_err(io_err(path))
}

/// Writes `rounds_seed{s}.csv`, `summary_seed{s}.json` and the two curve
/// files `cost_vs_t_seed{s}.csv`, `target_pulls_vs_t_seed{s}.csv`.
pub fn write_run(dir: &Path, run: &RunOutput) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let s = run.result.seed;
    let entries = &run.ledger.entries;
    write_round_log(&dir.join(format!("rounds_seed{s}.csv")), entries)?;
    write_json(&dir.join(format!("summary_seed{s}.json")), &run.result)?;
    write_xy(
        &dir.join(format!("cost_vs_t_seed{s}.csv")),
        entries.iter().map(|e| (e.round as f64, e.cum_cost)),
    )?;
    write_xy(
        &dir.join(format!("target_pulls_vs_t_seed{s}.csv")),
        entries.iter().map(|e| (e.round as f64, e.cum_target_pulls as f64)),
    )
}

/// Per-seed files plus `campaign.json` holding every summary.
pub fn write_campaign(dir: &Path, runs: &[RunOutput]) -> Result<(), HarnessError> {
    for r in runs {
        write_run(dir, r)?;
    }
    let summaries: Vec<&RunResult> = runs.iter().map(|r| &r.result).collect();
    write_json(&dir.join("campaign.json"), &summaries)
}

pub fn write_sweep(path: &Path, cells: &[SweepCell]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    for c in cells {
        w.serialize(c)?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_probe(dir: &Path, report: &ProbeReport) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_json(&dir.join("probe.json"), report)?;
    write_xy(
        &dir.join("cost_per_round_vs_t.csv"),
        report.points.iter().map(|p| (p.horizon as f64, p.mean_cost_per_round)),
    )
}
