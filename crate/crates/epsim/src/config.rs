//! Run-configuration schema for the command-line frontend.
//!
//! Configs are JSON files deserialized with `deny_unknown_fields`, so typos
//! fail loudly before any computation starts.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decoherence::MemoryParams;
use crate::network::{load_latency_csv, sample_latency, LinkConfig, NetworkError};
use crate::purify::Protocol;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("invalid config value: {0}")]
    Invalid(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// Named quantum-memory technologies with fixed T1/T2 values (seconds).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MemoryPreset {
    Ca40,
    Er167,
    Nv,
    Yb171,
    ScCavityA,
    ScCavityB,
}

impl MemoryPreset {
    pub const ALL: [MemoryPreset; 6] = [
        MemoryPreset::Ca40,
        MemoryPreset::Er167,
        MemoryPreset::Nv,
        MemoryPreset::Yb171,
        MemoryPreset::ScCavityA,
        MemoryPreset::ScCavityB,
    ];

    pub fn params(self) -> MemoryParams {
        let (t1, t2) = match self {
            MemoryPreset::Ca40 => (1.14, 0.5),
            MemoryPreset::Er167 => (600.0, 1.3),
            MemoryPreset::Nv => (200.0, 0.5),
            MemoryPreset::Yb171 => (12000.0, 4200.0),
            MemoryPreset::ScCavityA => (0.0256, 0.034),
            MemoryPreset::ScCavityB => (0.0012, 0.00072),
        };
        MemoryParams::new(t1, t2).expect("preset tables are valid by construction")
    }

    pub fn label(self) -> &'static str {
        match self {
            MemoryPreset::Ca40 => "ca40",
            MemoryPreset::Er167 => "er167",
            MemoryPreset::Nv => "nv",
            MemoryPreset::Yb171 => "yb171",
            MemoryPreset::ScCavityA => "sc-cavity-a",
            MemoryPreset::ScCavityB => "sc-cavity-b",
        }
    }
}

/// Memory selection: a preset, optionally overridden by explicit T1/T2.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemorySpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<MemoryPreset>,
    /// Seconds; overrides the preset's T1 when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t1: Option<f64>,
    /// Seconds; overrides the preset's T2 when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t2: Option<f64>,
}

impl MemorySpec {
    pub fn preset(preset: MemoryPreset) -> Self {
        Self {
            preset: Some(preset),
            t1: None,
            t2: None,
        }
    }

    pub fn resolve(&self) -> Result<MemoryParams, ConfigError> {
        let base = self.preset.map(MemoryPreset::params);
        let t1 = self.t1.or(base.map(|m| m.t1)).ok_or_else(|| {
            ConfigError::Invalid("memory needs a preset or an explicit t1".into())
        })?;
        let t2 = self.t2.or(base.map(|m| m.t2)).ok_or_else(|| {
            ConfigError::Invalid("memory needs a preset or an explicit t2".into())
        })?;
        MemoryParams::new(t1, t2).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn label(&self) -> String {
        match (self.preset, self.t1, self.t2) {
            (Some(p), None, None) => p.label().to_string(),
            _ => {
                let m = self
                    .resolve()
                    .map(|m| (m.t1, m.t2))
                    .unwrap_or((f64::NAN, f64::NAN));
                format!("t1={}s_t2={}s", m.0, m.1)
            }
        }
    }
}

/// Evenly spaced values from `start` to `stop` inclusive.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridRange {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl GridRange {
    pub fn values(&self) -> Result<Vec<f64>, ConfigError> {
        if self.points == 0 {
            return Err(ConfigError::Invalid("grid needs at least one point".into()));
        }
        if self.stop < self.start {
            return Err(ConfigError::Invalid(format!(
                "grid stop {} below start {}",
                self.stop, self.start
            )));
        }
        if self.points == 1 {
            return Ok(vec![self.start]);
        }
        let step = (self.stop - self.start) / (self.points - 1) as f64;
        Ok((0..self.points)
            .map(|i| self.start + step * i as f64)
            .collect())
    }
}

/// Where the latency axis comes from: an explicit grid, an explicit list, or
/// draws from an empirical CSV via the inverse CDF.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LatencySource {
    Grid(GridRange),
    List(Vec<f64>),
    Csv { path: String, samples: usize },
}

impl LatencySource {
    /// Resolve to a concrete latency list in ms.  CSV draws consume `rng`.
    pub fn resolve<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>, ConfigError> {
        let latencies = match self {
            LatencySource::Grid(range) => range.values()?,
            LatencySource::List(values) => values.clone(),
            LatencySource::Csv { path, samples } => {
                if *samples == 0 {
                    return Err(ConfigError::Invalid(
                        "csv latency source needs samples >= 1".into(),
                    ));
                }
                let dist = load_latency_csv(path)?;
                let mut drawn: Vec<f64> =
                    (0..*samples).map(|_| sample_latency(&dist, rng)).collect();
                drawn.sort_by(|a, b| a.partial_cmp(b).unwrap());
                drawn
            }
        };
        if latencies.is_empty() {
            return Err(ConfigError::Invalid("latency list is empty".into()));
        }
        for &l in &latencies {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(ConfigError::Invalid(format!("bad latency {l} ms")));
            }
        }
        Ok(latencies)
    }
}

fn default_seed() -> u64 {
    0
}

fn default_f0() -> f64 {
    0.75
}

fn default_max_rounds() -> usize {
    crate::experiments::DEFAULT_MAX_ROUNDS
}

fn default_substeps() -> u32 {
    1
}

fn default_protocol() -> Protocol {
    Protocol::Dejmps {
        variant: Default::default(),
    }
}

fn default_mc_samples() -> usize {
    crate::experiments::DEFAULT_MC_SAMPLES
}

fn default_thresholds() -> Vec<f64> {
    vec![QKD_THRESHOLD, DQC_THRESHOLD]
}

/// Application fidelity floors.
pub const QKD_THRESHOLD: f64 = 0.81;
pub const DQC_THRESHOLD: f64 = 0.98;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayCurveConfig {
    #[serde(default = "default_f0")]
    pub f0: f64,
    pub memories: Vec<MemorySpec>,
    pub latency: LatencySource,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryConfig {
    #[serde(default = "default_protocol")]
    pub protocol: Protocol,
    #[serde(default = "default_f0")]
    pub f0: f64,
    pub memory: MemorySpec,
    pub latency: LatencySource,
    #[serde(default = "default_max_rounds")]
    pub max_rounds: usize,
    #[serde(default = "default_substeps")]
    pub substeps: u32,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpcHeatmapConfig {
    #[serde(default = "default_protocol")]
    pub protocol: Protocol,
    #[serde(default = "default_f0")]
    pub f0: f64,
    pub memory: MemorySpec,
    pub latency: LatencySource,
    /// Budget axis (expected consumed pairs E).
    pub budgets: GridRange,
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
    #[serde(default = "default_max_rounds")]
    pub max_rounds: usize,
    #[serde(default = "default_substeps")]
    pub substeps: u32,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateSweepConfig {
    /// Defaults to both protocols in their default variants.
    #[serde(default)]
    pub protocols: Vec<Protocol>,
    #[serde(default = "default_f0")]
    pub f0: f64,
    pub memory: MemorySpec,
    pub latency: LatencySource,
    #[serde(default = "default_thresholds")]
    pub thresholds: Vec<f64>,
    #[serde(default)]
    pub link: LinkConfig,
    #[serde(default = "default_max_rounds")]
    pub max_rounds: usize,
    #[serde(default = "default_substeps")]
    pub substeps: u32,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_nus() -> Vec<u32> {
    vec![1, 2, 10]
}

fn default_convergence_rounds() -> usize {
    crate::experiments::DEFAULT_MAX_ROUNDS
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    #[serde(default = "default_protocol")]
    pub protocol: Protocol,
    #[serde(default = "default_f0")]
    pub f0: f64,
    pub memory: MemorySpec,
    /// Idle windows to test, ms.
    pub dt_ms: Vec<f64>,
    #[serde(default = "default_nus")]
    pub nus: Vec<u32>,
    #[serde(default = "default_convergence_rounds")]
    pub rounds: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenLatencyConfig {
    /// Mean of ln(latency/ms).
    pub mu_log_ms: f64,
    /// Standard deviation of ln(latency/ms); must be positive.
    pub sigma_log: f64,
    pub count: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

/// Load and schema-validate a JSON config file into `T`.
pub fn load_config<T: serde::de::DeserializeOwned>(
    path: impl AsRef<Path>,
) -> Result<T, ConfigError> {
    let path_str = path.as_ref().display().to_string();
    let text = std::fs::read_to_string(&path).map_err(|source| ConfigError::Io {
        path: path_str.clone(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
        path: path_str,
        source,
    })
}

/// Reject physically invalid common fields before any computation.
pub fn validate_fidelity(f0: f64, name: &str) -> Result<(), ConfigError> {
    if !(0.0..=1.0).contains(&f0) {
        return Err(ConfigError::Invalid(format!(
            "{name} must lie in [0, 1], got {f0}"
        )));
    }
    Ok(())
}
