//! Run reports and freeze files.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `value ≤ threshold`.
    AtMost,
    /// `value ≥ threshold`.
    AtLeast,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub id: String,
    pub value: f64,
    pub threshold: f64,
    pub relation: Relation,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn at_most(id: impl Into<String>, value: f64, threshold: f64, detail: impl Into<String>) -> Check {
        Check { id: id.into(), value, threshold, relation: Relation::AtMost, passed: value <= threshold, detail: detail.into() }
    }

    pub fn at_least(id: impl Into<String>, value: f64, threshold: f64, detail: impl Into<String>) -> Check {
        Check { id: id.into(), value, threshold, relation: Relation::AtLeast, passed: value >= threshold, detail: detail.into() }
    }

    /// A yes/no outcome recorded as 1/0 against threshold 1.
    pub fn flag(id: impl Into<String>, ok: bool, detail: impl Into<String>) -> Check {
        Check::at_least(id, if ok { 1.0 } else { 0.0 }, 1.0, detail)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionOutcome {
    pub check_id: String,
    pub frozen_value: f64,
    pub value: Option<f64>,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RngProvenance {
    pub generator: String,
    pub scheme: String,
    pub base_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub name: String,
    pub kind: String,
    pub config_digest: String,
    pub checks: Vec<Check>,
    pub regressions: Vec<RegressionOutcome>,
    /// Set when the run stopped early; the checks gathered so far are kept.
    pub error: Option<String>,
    pub passed: bool,
    pub wall_clock_s: f64,
    pub workers: usize,
    pub rng: RngProvenance,
    pub artifacts: Vec<String>,
}

impl RunReport {
    pub fn check(&self, id: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.id == id)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrozenCheck {
    pub check_id: String,
    pub frozen_value: f64,
    pub tolerance: f64,
    pub provenance: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FreezeFile {
    pub entries: Vec<FrozenCheck>,
}

impl FreezeFile {
    pub fn load(path: &Path) -> Result<FreezeFile> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }

    /// Sorted by id so re-freezing identical values gives identical bytes.
    pub fn to_json(&self) -> Result<String> {
        let mut e = self.entries.clone();
        e.sort_by(|a, b| a.check_id.cmp(&b.check_id));
        Ok(serde_json::to_string_pretty(&FreezeFile { entries: e })? + "\n")
    }

    /// Frozen entries for `ids` from a finished report. `rel_tol` scales with `|value|`.
    pub fn from_report(report: &RunReport, ids: &[String], rel_tol: f64) -> Result<FreezeFile> {
        if ids.is_empty() {
            return Err(Error::Freeze("no check ids given".into()));
        }
        let mut entries = Vec::new();
        for id in ids {
            let c = report.check(id).ok_or_else(|| Error::UnknownCheck(id.clone()))?;
            if !c.passed {
                return Err(Error::Freeze(format!("check {id} failed (value {:e}, threshold {:e})", c.value, c.threshold)));
            }
            entries.push(FrozenCheck {
                check_id: id.clone(),
                frozen_value: c.value,
                tolerance: rel_tol * c.value.abs().max(f64::MIN_POSITIVE),
                provenance: format!("{} seed {} config {}", report.name, report.rng.base_seed, report.config_digest),
            });
        }
        Ok(FreezeFile { entries })
    }

    pub fn compare(&self, report: &RunReport) -> Vec<RegressionOutcome> {
        self.entries
            .iter()
            .map(|f| {
                let value = report.check(&f.check_id).map(|c| c.value);
                let passed = value.is_some_and(|v| (v - f.frozen_value).abs() <= f.tolerance);
                RegressionOutcome {
                    check_id: f.check_id.clone(),
                    frozen_value: f.frozen_value,
                    value,
                    tolerance: f.tolerance,
                    passed,
                }
            })
            .collect()
    }
}
