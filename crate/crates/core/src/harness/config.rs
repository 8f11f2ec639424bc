use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::loopsoup::{DEFAULT_CUTOFF, DEFAULT_TRUNCATION_TOLERANCE};
use crate::sampling::ChainParams;

/// Environment variable that sets the worker-pool size when no explicit
/// thread count is configured.
pub const THREADS_ENV: &str = "CURRENT_LAB_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    VerifyCoupling,
    GffCheck,
    LoopsoupCheck,
    VrjpCheck,
    ReconstructCheck,
    Full,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::VerifyCoupling,
        Suite::GffCheck,
        Suite::LoopsoupCheck,
        Suite::VrjpCheck,
        Suite::ReconstructCheck,
        Suite::Full,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::VerifyCoupling => "verify-coupling",
            Suite::GffCheck => "gff-check",
            Suite::LoopsoupCheck => "loopsoup-check",
            Suite::VrjpCheck => "vrjp-check",
            Suite::ReconstructCheck => "reconstruct-check",
            Suite::Full => "full",
        }
    }
}

impl FromStr for Suite {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| LabError::validation("suite", format!("unknown suite '{s}'")))
    }
}

impl std::fmt::Display for Suite {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub tv_exact: f64,
    pub tv_recon: f64,
    pub sigma_level: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            tv_exact: 1e-12,
            tv_recon: 1e-10,
            sigma_level: 3.0,
        }
    }
}

fn default_replicas() -> usize {
    100_000
}

fn default_alpha() -> f64 {
    0.5
}

fn default_cutoff() -> usize {
    DEFAULT_CUTOFF
}

fn default_truncation_tolerance() -> f64 {
    DEFAULT_TRUNCATION_TOLERANCE
}

/// One verification run. Serialized back into the report with every
/// default filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub network: PathBuf,
    pub suite: Suite,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_cutoff")]
    pub cutoff: usize,
    #[serde(default = "default_truncation_tolerance")]
    pub truncation_tolerance: f64,
    /// VRJP vertex order; identity when absent.
    #[serde(default)]
    pub order: Option<Vec<usize>>,
    /// Second order for the order-invariance check; reversed when absent.
    #[serde(default)]
    pub alt_order: Option<Vec<usize>>,
    #[serde(default)]
    pub chain: ChainParams,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(network: impl Into<PathBuf>, suite: Suite) -> Self {
        ExperimentConfig {
            network: network.into(),
            suite,
            replicas: default_replicas(),
            seed: 0,
            tolerances: Tolerances::default(),
            alpha: default_alpha(),
            cutoff: default_cutoff(),
            truncation_tolerance: default_truncation_tolerance(),
            order: None,
            alt_order: None,
            chain: ChainParams::default(),
            threads: None,
            out: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| LabError::validation("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| LabError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text).map_err(|e| match e {
            LabError::Validation { field, message } => {
                LabError::validation(field, format!("{}: {message}", path.display()))
            }
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.tolerances;
        for (field, v) in [
            ("tolerances.tv_exact", t.tv_exact),
            ("tolerances.tv_recon", t.tv_recon),
            ("tolerances.sigma_level", t.sigma_level),
            ("truncation_tolerance", self.truncation_tolerance),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(LabError::validation(field, "must be positive and finite"));
            }
        }
        if self.replicas < crate::sampling::stats::MIN_SAMPLES {
            return Err(LabError::validation(
                "replicas",
                format!("{} is below the minimum of {}", self.replicas, crate::sampling::stats::MIN_SAMPLES),
            ));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(LabError::validation("alpha", "must be positive and finite"));
        }
        if self.cutoff < 2 {
            return Err(LabError::validation("cutoff", "must be at least 2"));
        }
        if self.threads == Some(0) {
            return Err(LabError::validation("threads", "must be at least 1"));
        }
        Ok(())
    }

    /// Explicit setting, else the environment variable, else all cores.
    pub fn resolved_threads(&self) -> Result<usize> {
        if let Some(t) = self.threads {
            return Ok(t);
        }
        match std::env::var(THREADS_ENV) {
            Ok(v) => match v.trim().parse::<usize>() {
                Ok(t) if t > 0 => Ok(t),
                _ => Err(LabError::validation(THREADS_ENV, format!("'{v}' is not a positive integer"))),
            },
            Err(_) => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
        }
    }
}
