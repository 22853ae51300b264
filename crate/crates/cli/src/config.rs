//! Config ingestion: a versioned JSON schema describing the model and the
//! per-command parameters, validated into a `ModelInstance` at load time.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use kingman::measure::{discretize, DensityFamily, Interval, Measure};
use kingman::recursion::{
    Environment, EnvironmentCycle, ModelInstance, SelectionCycle, SelectionFn,
};

use crate::commands::CmdError;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_GRID_CELLS: usize = 1024;

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: u32,
    pub model: ModelSpec,
    /// Steps to simulate (simulate / verify / conjecture).
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    /// TV windows for `verify`, as `[lo, hi]` pairs; defaulted per regime
    /// when absent.
    #[serde(default)]
    pub windows: Option<Vec<[f64; 2]>>,
    /// Spectral sweep grid; defaulted to the admissible interval when absent.
    #[serde(default)]
    pub z_grid: Option<ZGridSpec>,
    /// Evaluation points for `genfun`; defaulted to fractions of the
    /// critical parameter when absent.
    #[serde(default)]
    pub z_values: Option<Vec<f64>>,
    #[serde(default = "default_series_terms")]
    pub series_terms: usize,
    /// `verify` passes when every final TV gap is below this.
    #[serde(default = "default_tv_threshold")]
    pub tv_pass_threshold: f64,
    /// Selection maps for `conjecture`; identity cycle when absent.
    #[serde(default)]
    pub selection: Option<Vec<SelectionSpec>>,
    /// Recorded in every output for reproducibility bookkeeping.
    #[serde(default)]
    pub seed: u64,
}

fn default_horizon() -> usize {
    2000
}

fn default_series_terms() -> usize {
    400
}

fn default_tv_threshold() -> f64 {
    1e-8
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub environments: Vec<EnvironmentSpec>,
    pub p0: MeasureSpec,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSpec {
    pub beta: f64,
    pub q: MeasureSpec,
}

/// Either an explicit atom list or a density expanded on a grid at load
/// time; exactly one of the two.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub density: DensitySpec,
    #[serde(default)]
    pub cells: Option<usize>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensitySpec {
    Uniform { lo: f64, hi: f64 },
    Beta { alpha: f64, beta: f64 },
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SelectionSpec {
    Identity,
    Constant { value: f64 },
    Power { exponent: f64 },
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ZGridSpec {
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

/// A loaded config: the raw spec, the validated model, and the hash of the
/// config bytes that every output embeds.
#[derive(Debug)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub model: ModelInstance,
    pub sha256: String,
}

pub fn load_config(path: &Path) -> Result<LoadedConfig, CmdError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CmdError::Config(format!("cannot read {}: {e}", path.display())))?;
    let sha256 = hex_digest(&bytes);
    let mut deserializer = serde_json::Deserializer::from_slice(&bytes);
    let config: RunConfig = serde_path_to_error::deserialize(&mut deserializer)
        .map_err(|e| CmdError::Config(format!("config field `{}`: {}", e.path(), e.inner())))?;
    if config.schema != SCHEMA_VERSION {
        return Err(CmdError::Config(format!(
            "unsupported schema version {} (expected {SCHEMA_VERSION})",
            config.schema
        )));
    }
    let model = build_model(&config.model)?;
    Ok(LoadedConfig {
        config,
        model,
        sha256,
    })
}

fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn build_model(spec: &ModelSpec) -> Result<ModelInstance, CmdError> {
    let mut envs = Vec::with_capacity(spec.environments.len());
    for (i, env_spec) in spec.environments.iter().enumerate() {
        let q = build_measure(&env_spec.q)
            .map_err(|e| CmdError::Config(format!("environments[{i}].q: {e}")))?;
        let env = Environment::new(env_spec.beta, q)
            .map_err(|e| CmdError::Config(format!("environments[{i}]: {e}")))?;
        envs.push(env);
    }
    let cycle =
        EnvironmentCycle::new(envs).map_err(|e| CmdError::Config(format!("environments: {e}")))?;
    let p0 = build_measure(&spec.p0).map_err(|e| CmdError::Config(format!("p0: {e}")))?;
    ModelInstance::new(cycle, p0).map_err(|e| CmdError::Config(e.to_string()))
}

fn build_measure(spec: &MeasureSpec) -> Result<Measure, String> {
    match (&spec.atoms, &spec.grid) {
        (Some(atoms), None) => {
            let total: f64 = atoms.iter().map(|a| a[1]).sum();
            if !((total - 1.0).abs() <= 1e-6) {
                return Err(format!("atom masses sum to {total}, expected 1"));
            }
            Measure::probability(atoms.iter().map(|a| (a[0], a[1] / total)))
                .map_err(|e| e.to_string())
        }
        (None, Some(grid)) => {
            let family = match &grid.density {
                DensitySpec::Uniform { lo, hi } => DensityFamily::Uniform { lo: *lo, hi: *hi },
                DensitySpec::Beta { alpha, beta } => DensityFamily::Beta {
                    alpha: *alpha,
                    beta: *beta,
                },
            };
            discretize(&family, grid.cells.unwrap_or(DEFAULT_GRID_CELLS)).map_err(|e| e.to_string())
        }
        _ => Err("measure needs exactly one of `atoms` or `grid`".into()),
    }
}

pub fn build_selection(config: &RunConfig, k: usize) -> Result<SelectionCycle, CmdError> {
    match &config.selection {
        None => Ok(SelectionCycle::identity(k)),
        Some(specs) => {
            if specs.len() != k {
                return Err(CmdError::Config(format!(
                    "selection lists {} maps for a period-{k} cycle",
                    specs.len()
                )));
            }
            let maps = specs
                .iter()
                .map(|s| match s {
                    SelectionSpec::Identity => SelectionFn::Identity,
                    SelectionSpec::Constant { value } => SelectionFn::Constant(*value),
                    SelectionSpec::Power { exponent } => SelectionFn::Power(*exponent),
                })
                .collect();
            SelectionCycle::new(maps).map_err(|e| CmdError::Config(e.to_string()))
        }
    }
}

pub fn build_windows(config: &RunConfig) -> Result<Vec<Interval>, CmdError> {
    match &config.windows {
        None => Ok(Vec::new()),
        Some(raw) => raw
            .iter()
            .map(|w| Interval::new(w[0], w[1]).map_err(|e| CmdError::Config(e.to_string())))
            .collect(),
    }
}
