//! Experiment configuration: one versioned JSON document with a block per
//! subcommand. Emitted manifests are configs too, so any run can be
//! repeated from its manifest.

use std::path::PathBuf;

use htq::bounds::{InitialCondition, Search};
use htq::busyperiod::{GridSpec, Theta};
use htq::dist::SpatialDistribution;
use htq::model::HtqParams;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub busy_dist: Option<BusyDistConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tandem: Option<TandemConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub throughput: Option<ThroughputConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validate: Option<ValidateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plot: Option<PlotConfig>,
    /// Filled in on output; ignored on input.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<ManifestInfo>,
}

impl ExperimentConfig {
    pub fn empty() -> Self {
        ExperimentConfig {
            version: SCHEMA_VERSION,
            seed: 0,
            jobs: None,
            out_dir: None,
            simulate: None,
            busy_dist: None,
            bounds: None,
            tandem: None,
            throughput: None,
            validate: None,
            plot: None,
            manifest: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestInfo {
    pub tool: String,
    pub tool_version: String,
    pub command: String,
}

fn one() -> u64 {
    1
}

fn default_sample() -> Option<f64> {
    Some(0.01)
}

fn unit_length() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub params: HtqParams,
    pub horizon: f64,
    #[serde(default = "one")]
    pub reps: u64,
    /// `null` records jumps only.
    #[serde(default = "default_sample")]
    pub sample_interval: Option<f64>,
    #[serde(default)]
    pub monitor: bool,
    #[serde(default)]
    pub cap: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusyDistConfig {
    pub psi: SpatialDistribution,
    /// Constant service rate `p`.
    pub service_rate: f64,
    pub lambda: f64,
    #[serde(default = "from_psi")]
    pub theta: Theta,
    pub n_max: usize,
    #[serde(default)]
    pub grid: Option<GridSpec>,
}

fn from_psi() -> Theta {
    Theta::FromPsi
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub superlinear: Option<SuperlinearSweep>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sublinear_perturbed: Option<PerturbedSweep>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub superlinear_perturbed: Option<PerturbedSweep>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_star: Option<LambdaStarConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linear: Option<LinearConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuperlinearSweep {
    #[serde(rename = "L")]
    pub length: f64,
    pub m_values: Vec<f64>,
    pub delta: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub psi: SpatialDistribution,
    pub phi: SpatialDistribution,
    #[serde(default = "empty_init")]
    pub init: InitialCondition,
    #[serde(default)]
    pub search: Search,
    #[serde(default)]
    pub grid_step: Option<f64>,
}

fn empty_init() -> InitialCondition {
    InitialCondition::Empty
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbedSweep {
    #[serde(rename = "L", default = "unit_length")]
    pub length: f64,
    pub m_values: Vec<f64>,
    pub eta_values: Vec<f64>,
    pub psi: SpatialDistribution,
    pub phi: SpatialDistribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaStarConfig {
    pub ell: f64,
    pub m: f64,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "F")]
    pub f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearConfig {
    #[serde(rename = "L")]
    pub length: f64,
    pub psi: SpatialDistribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TandemConfig {
    pub params: HtqParams,
    pub delta: f64,
    pub horizon: f64,
    #[serde(default = "one")]
    pub reps: u64,
}

fn default_rel_width() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThroughputConfig {
    /// The arrival rate in here is ignored.
    pub params: HtqParams,
    pub delta: f64,
    pub horizon: f64,
    pub cap: usize,
    pub reps: u64,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    #[serde(default = "default_rel_width")]
    pub rel_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateConfig {
    /// Random states per exponent for the service-rate lemmas.
    pub states: usize,
    pub kl_states: usize,
    /// Integrator relative tolerance for the monitored runs.
    pub rtol: f64,
    pub sim_horizon: f64,
    pub sim_reps: u64,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        ValidateConfig {
            states: 2500,
            kl_states: 1000,
            rtol: 1e-8,
            sim_horizon: 20.0,
            sim_reps: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlotConfig {
    pub plots: Vec<PlotSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlotSpec {
    /// File name of the SVG, relative to the output directory.
    pub output: String,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub x_label: Option<String>,
    #[serde(default)]
    pub y_label: Option<String>,
    #[serde(default)]
    pub log_y: bool,
    pub series: Vec<SeriesSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesSpec {
    pub csv: PathBuf,
    pub x: String,
    pub y: String,
    #[serde(default)]
    pub label: Option<String>,
    /// Split rows into one series per distinct value of this column.
    #[serde(default)]
    pub group_by: Option<String>,
}

fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            CliError::Config(inner.to_string())
        } else {
            CliError::Config(format!("at `{path}`: {inner}"))
        }
    })
}

/// Parse and version-check an experiment config (or a manifest).
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = parse_json(text)?;
    if cfg.version != SCHEMA_VERSION {
        return Err(CliError::Config(format!(
            "at `version`: unsupported schema version {}, expected {SCHEMA_VERSION}",
            cfg.version
        )));
    }
    if cfg.jobs == Some(0) {
        return Err(CliError::Config("at `jobs`: must be at least 1".into()));
    }
    Ok(cfg)
}

/// Parse a spatial distribution such as `{"kind": "uniform", "lo": 0, "hi": 1}`.
pub fn parse_distribution(text: &str) -> Result<SpatialDistribution> {
    parse_json(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config() {
        let c = parse_config(r#"{"version": 1}"#).unwrap();
        assert_eq!(c, ExperimentConfig::empty());
    }

    #[test]
    fn wrong_version() {
        let e = parse_config(r#"{"version": 2}"#).unwrap_err();
        assert!(e.to_string().contains("version"));
    }

    #[test]
    fn errors_carry_field_paths() {
        let text = r#"{"version": 1, "simulate": {"params": {"L": 1, "m": "x"}, "horizon": 1}}"#;
        let e = parse_config(text).unwrap_err().to_string();
        assert!(e.contains("simulate.params.m"), "{e}");
        let e = parse_config(r#"{"version": 1, "bogus": 3}"#).unwrap_err().to_string();
        assert!(e.contains("bogus"), "{e}");
        let text = r#"{"version": 1, "tandem": {"params": {"L": 1, "m": 0.5, "lambda": 1,
            "phi": {"kind": "uniform", "lo": 0, "hi": 1},
            "psi": {"kind": "uniform", "lo": 1, "hi": 0}}, "delta": 0.2, "horizon": 1}}"#;
        let e = parse_config(text).unwrap_err().to_string();
        assert!(e.contains("tandem.params.psi"), "{e}");
    }

    #[test]
    fn defaults_are_filled() {
        let text = r#"{"version": 1, "simulate": {"params": {"L": 1, "m": 1, "lambda": 0.5,
            "phi": {"kind": "dirac", "point": 0}, "psi": {"kind": "dirac", "point": 1}}, "horizon": 10}}"#;
        let c = parse_config(text).unwrap();
        let s = c.simulate.unwrap();
        assert_eq!(s.reps, 1);
        assert_eq!(s.sample_interval, Some(0.01));
        assert!(!s.monitor);
    }

    #[test]
    fn distributions() {
        assert!(parse_distribution(r#"{"kind": "dirac", "point": 0.5}"#).is_ok());
        assert!(parse_distribution(r#"{"kind": "uniform", "lo": 0, "hi": 1}"#).is_ok());
        assert!(parse_distribution(r#"{"kind": "grid", "h": 0.5, "values": [1, 1, 1]}"#).is_ok());
        assert!(parse_distribution(r#"{"kind": "normal"}"#).is_err());
        assert!(parse_distribution("[").is_err());
    }
}
