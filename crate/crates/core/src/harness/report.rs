use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::model::ModelConfig;

use super::experiments::Outcome;
use super::fit::ScalingFit;
use super::plan::ExperimentPlan;

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// SHA-256 of the canonical JSON form of the plan.
pub fn config_hash(plan: &ExperimentPlan) -> String {
    let canonical = serde_json::to_vec(plan).expect("plans always serialize");
    hex::encode(Sha256::digest(&canonical))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    /// The point ran but one of its pass/fail checks did not hold.
    CheckFailed,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointStatus {
    pub index: usize,
    pub config: ModelConfig,
    pub status: Status,
    pub error: Option<String>,
    pub warnings: Vec<String>,
    pub runtime_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Manifest {
    pub experiment: &'static str,
    pub config_hash: String,
    pub code_version: &'static str,
    pub plan: ExperimentPlan,
    pub csv: String,
    pub points: Vec<PointStatus>,
    pub fit: Option<ScalingFit>,
    pub fit_error: Option<String>,
    /// Whether the fitted metric strictly decreases along the sweep axis.
    pub strictly_decreasing: Option<bool>,
}

impl Manifest {
    pub fn new(plan: &ExperimentPlan, outcome: &Outcome) -> Self {
        let points = outcome
            .points
            .iter()
            .map(|p| PointStatus {
                index: p.point.index,
                config: p.point.config.clone(),
                status: p.status,
                error: p.error.clone(),
                warnings: p.warnings.clone(),
                runtime_s: p.runtime_s,
            })
            .collect();
        Self {
            experiment: plan.experiment.name(),
            config_hash: config_hash(plan),
            code_version: CODE_VERSION,
            plan: plan.clone(),
            csv: format!("{}.csv", plan.experiment.name()),
            points,
            fit: outcome.fit.clone(),
            fit_error: outcome.fit_error.clone(),
            strictly_decreasing: outcome.strictly_decreasing,
        }
    }
}

/// Writes `<experiment>.csv` and `manifest.json` into `dir`; returns their
/// paths.
pub fn write_outputs(dir: &Path, plan: &ExperimentPlan, outcome: &Outcome) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir)?;
    let manifest = Manifest::new(plan, outcome);
    let csv_path = dir.join(&manifest.csv);
    let mut w = csv::Writer::from_path(&csv_path)?;
    let mut header = outcome.header.clone();
    header.push("runtime_s".into());
    w.write_record(&header)?;
    for p in &outcome.points {
        for row in &p.rows {
            let mut rec = row.clone();
            rec.push(p.runtime_s.to_string());
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    let manifest_path = dir.join("manifest.json");
    fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)?;
    Ok((csv_path, manifest_path))
}
