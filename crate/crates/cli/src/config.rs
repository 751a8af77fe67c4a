//! Per-command configuration schemas and the run sidecar.
//!
//! Every config rejects unknown keys. Missing optional keys take the defaults
//! below, and the fully resolved config is what the sidecar records.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use infospread::ensemble::{natural_cutoff, CorrelationKernel, DegreeDistribution};
use infospread::fit::FitOptions;
use infospread::meanfield::{ModelParams, SolveOptions, SweepOptions};
use infospread::series::{KscOptions, DEFAULT_BIN_HOURS, HARTIGAN_THRESHOLD};
use infospread::timevarying::TimeVaryingParams;

use crate::error::{CliError, CliResult};

fn one() -> u32 {
    1
}
fn yes() -> bool {
    true
}
fn bin_hours() -> f64 {
    DEFAULT_BIN_HOURS
}
fn time_scale() -> f64 {
    500.0
}
fn population() -> f64 {
    1e4
}
fn unit_dt() -> f64 {
    1.0
}
fn one_run() -> usize {
    1
}
fn third() -> f64 {
    1.0 / 3.0
}
fn k_max() -> usize {
    10
}
fn hartigan() -> f64 {
    HARTIGAN_THRESHOLD
}
fn sigma() -> f64 {
    2.0
}

/// Truncated power law with optional θ-mixing correlation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub gamma: f64,
    #[serde(default = "one")]
    pub m: u32,
    pub k_cut: u32,
    #[serde(default)]
    pub theta: f64,
}

impl KernelSpec {
    pub fn distribution(&self) -> CliResult<DegreeDistribution> {
        Ok(DegreeDistribution::power_law(self.gamma, self.m, self.k_cut)?)
    }

    /// Uncorrelated at θ = 0, θ-mixing otherwise.
    pub fn kernel_at(&self, theta: f64) -> CliResult<CorrelationKernel> {
        let dist = self.distribution()?;
        if theta == 0.0 {
            Ok(CorrelationKernel::uncorrelated(dist))
        } else {
            Ok(CorrelationKernel::theta_mix(dist, theta)?)
        }
    }

    pub fn kernel(&self) -> CliResult<CorrelationKernel> {
        self.kernel_at(self.theta)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub kernel: KernelSpec,
    /// Include the per-degree ANND table.
    #[serde(default = "yes")]
    pub annd: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Alpha,
    Theta,
}

/// Either explicit values or an inclusive `start:step:stop` range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Values(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl Grid {
    pub fn values(&self) -> CliResult<Vec<f64>> {
        let v = match self {
            Grid::Values(v) => v.clone(),
            Grid::Range { start, stop, step } => {
                if !(*step > 0.0) || !start.is_finite() || !stop.is_finite() {
                    return Err(CliError::config("grid step must be positive and bounds finite"));
                }
                if stop < start {
                    Vec::new()
                } else {
                    // Tolerate the rounding in e.g. 0.01:0.01:1, and trim the
                    // accumulated noise so 0.1 + 2·0.1 prints as 0.3.
                    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
                    (0..n)
                        .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
                        .collect()
                }
            }
        };
        if v.is_empty() {
            return Err(CliError::config("empty grid"));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub kernel: KernelSpec,
    pub axis: Axis,
    pub grid: Grid,
    pub lambda: f64,
    pub beta: f64,
    /// Fixed α for θ sweeps.
    #[serde(default)]
    pub alpha: Option<f64>,
    /// One curve per θ for α sweeps; defaults to the kernel's θ.
    #[serde(default)]
    pub thetas: Option<Vec<f64>>,
    #[serde(default)]
    pub options: SweepOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SolveInit {
    /// `a_k(0) = 1/population` in every class.
    Uniform,
    /// One seed vertex of the given degree.
    Degree(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub kernel: KernelSpec,
    pub params: ModelParams,
    #[serde(default = "uniform_init")]
    pub init: SolveInit,
    #[serde(default = "population")]
    pub population: f64,
    #[serde(default)]
    pub options: SolveOptions,
    #[serde(default)]
    pub format: Format,
}

fn uniform_init() -> SolveInit {
    SolveInit::Uniform
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum GenGraphConfig {
    Ba {
        n: usize,
        m: usize,
    },
    /// Power-law degree sequence wired by stub matching. `k_cut` defaults to
    /// the natural cutoff for `n`.
    Configuration {
        n: usize,
        gamma: f64,
        #[serde(default = "one")]
        m: u32,
        #[serde(default)]
        k_cut: Option<u32>,
    },
}

impl GenGraphConfig {
    pub fn resolve(&mut self) {
        if let GenGraphConfig::Configuration { n, gamma, k_cut, .. } = self {
            if k_cut.is_none() && *gamma > 2.0 {
                *k_cut = Some(natural_cutoff(*n, *gamma));
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    /// Edge-list path.
    pub input: String,
    /// Vertex count; defaults to the `# n = ...` header of the edge list.
    #[serde(default)]
    pub n: Option<usize>,
    pub params: ModelParams,
    #[serde(default = "unit_dt")]
    pub dt: f64,
    /// Seed vertex of a single run; drawn uniformly when absent.
    #[serde(default)]
    pub initial_active: Option<usize>,
    /// More than one run reports the ensemble prevalence instead of a trace.
    #[serde(default = "one_run")]
    pub runs: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TvSeriesConfig {
    pub theta: TimeVaryingParams,
    pub len: usize,
    #[serde(default = "bin_hours")]
    pub bin_hours: f64,
    #[serde(default = "time_scale")]
    pub time_scale: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub input: String,
    #[serde(default)]
    pub column: Option<String>,
    #[serde(default = "bin_hours")]
    pub bin_width: f64,
    #[serde(default = "time_scale")]
    pub time_scale: f64,
    #[serde(default)]
    pub initial_theta: Option<TimeVaryingParams>,
    #[serde(default)]
    pub options: FitOptions,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictConfig {
    pub input: String,
    #[serde(default)]
    pub column: Option<String>,
    #[serde(default = "bin_hours")]
    pub bin_width: f64,
    #[serde(default = "third")]
    pub train_fraction: f64,
    #[serde(default = "time_scale")]
    pub time_scale: f64,
    /// Keep the forecast values in the report.
    #[serde(default)]
    pub forecasts: bool,
    #[serde(default)]
    pub options: FitOptions,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterConfig {
    /// Directory of series CSVs or one wide CSV.
    pub input: String,
    #[serde(default)]
    pub column: Option<String>,
    #[serde(default = "bin_hours")]
    pub bin_width: f64,
    /// Fixed cluster count; chosen by the Hartigan rule when absent.
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default = "k_max")]
    pub k_max: usize,
    #[serde(default = "hartigan")]
    pub threshold: f64,
    #[serde(default)]
    pub options: KscOptions,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothConfig {
    pub input: String,
    #[serde(default)]
    pub column: Option<String>,
    #[serde(default = "bin_hours")]
    pub bin_width: f64,
    #[serde(default = "sigma")]
    pub sigma: f64,
}

/// Written next to every output file as `<out>.run.json`; accepted back by
/// `--config` to repeat the run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub command: String,
    pub seed: Option<u64>,
    pub version: String,
    pub config: Value,
}

impl Sidecar {
    /// Recognizes a sidecar by its exact key set.
    pub fn detect(v: &Value) -> Option<Self> {
        let obj = v.as_object()?;
        let keys = ["command", "seed", "version", "config"];
        if obj.len() == keys.len() && keys.iter().all(|k| obj.contains_key(*k)) {
            serde_json::from_value(v.clone()).ok()
        } else {
            None
        }
    }
}
