use std::path::Path;

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::graph::NetworkSpec;
use crate::sampling::SigmaBand;

use super::config::ExperimentConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckKind {
    Exact,
    Statistical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Skipped,
}

/// One line of a report. For exact checks `statistic ≤ tolerance` passes;
/// for statistical ones `statistic` is the worst |z| and `tolerance` the
/// Bonferroni-corrected critical value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub kind: CheckKind,
    pub statistic: Option<f64>,
    pub tolerance: Option<f64>,
    pub comparisons: Option<usize>,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// A check whose statistical verdict waits for the size of its family.
#[derive(Debug, Clone)]
pub(crate) enum Pending {
    Exact {
        name: String,
        value: f64,
        tolerance: f64,
        note: Option<String>,
    },
    Stat {
        name: String,
        worst_z: f64,
        comparisons: usize,
        note: Option<String>,
    },
    Skipped {
        name: String,
        reason: String,
    },
}

impl Pending {
    pub fn exact(name: &str, value: f64, tolerance: f64) -> Self {
        Pending::Exact {
            name: name.into(),
            value,
            tolerance,
            note: None,
        }
    }

    pub fn stat(name: &str, worst_z: f64, comparisons: usize) -> Self {
        Pending::Stat {
            name: name.into(),
            worst_z,
            comparisons,
            note: None,
        }
    }

    pub fn skipped(name: &str, reason: impl Into<String>) -> Self {
        Pending::Skipped {
            name: name.into(),
            reason: reason.into(),
        }
    }

    pub fn with_note(mut self, text: impl Into<String>) -> Self {
        match &mut self {
            Pending::Exact { note, .. } | Pending::Stat { note, .. } => *note = Some(text.into()),
            Pending::Skipped { reason, .. } => *reason = text.into(),
        }
        self
    }
}

/// Resolves verdicts, correcting every statistical check for the number of
/// statistical checks in the run.
pub(crate) fn finalize(pending: Vec<Pending>, sigma_level: f64) -> (Vec<CheckRecord>, usize) {
    let family = pending.iter().filter(|p| matches!(p, Pending::Stat { .. })).count();
    let band = SigmaBand::new(sigma_level, family);
    let records = pending
        .into_iter()
        .map(|p| match p {
            Pending::Exact {
                name,
                value,
                tolerance,
                note,
            } => CheckRecord {
                name,
                kind: CheckKind::Exact,
                statistic: Some(value),
                tolerance: Some(tolerance),
                comparisons: None,
                verdict: if value <= tolerance { Verdict::Pass } else { Verdict::Fail },
                note,
            },
            Pending::Stat {
                name,
                worst_z,
                comparisons,
                note,
            } => {
                let critical = band.split(comparisons).critical_z();
                CheckRecord {
                    name,
                    kind: CheckKind::Statistical,
                    statistic: Some(worst_z.abs()),
                    tolerance: Some(critical),
                    comparisons: Some(comparisons),
                    verdict: if worst_z.abs() <= critical { Verdict::Pass } else { Verdict::Fail },
                    note,
                }
            }
            Pending::Skipped { name, reason } => CheckRecord {
                name,
                kind: CheckKind::Exact,
                statistic: None,
                tolerance: None,
                comparisons: None,
                verdict: Verdict::Skipped,
                note: Some(reason),
            },
        })
        .collect();
    (records, family)
}

#[derive(Debug, Clone, Serialize)]
pub struct Environment {
    pub seed: u64,
    pub threads: usize,
    pub version: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub suite: String,
    pub verdict: Verdict,
    pub config: ExperimentConfig,
    pub network: NetworkSpec,
    /// Pinning applied for the field and loop-soup checks when the network
    /// file has none.
    pub default_pinning_applied: bool,
    pub environment: Environment,
    /// Number of statistical checks sharing the Bonferroni correction.
    pub statistical_family: usize,
    pub checks: Vec<CheckRecord>,
    pub timings: Vec<Timing>,
}

impl ExperimentReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn check(&self, name: &str) -> Option<&CheckRecord> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// A CSV table emitted next to the report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub name: String,
    pub csv: String,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: ExperimentReport,
    pub tables: Vec<Table>,
}

impl Outcome {
    /// Writes `report.json` and one `<name>.csv` per table.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let io = |path: &Path, source| LabError::Io {
            path: path.display().to_string(),
            source,
        };
        std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        let report = dir.join("report.json");
        let json = serde_json::to_string_pretty(&self.report).expect("report serializes");
        std::fs::write(&report, json + "\n").map_err(|e| io(&report, e))?;
        for t in &self.tables {
            let path = dir.join(format!("{}.csv", t.name));
            std::fs::write(&path, &t.csv).map_err(|e| io(&path, e))?;
        }
        Ok(())
    }
}
