//! Experiment configuration files.
//!
//! A config is a TOML document. `--set a.b=value` overrides are applied to
//! the parsed document before it is checked against the schema; `value` is
//! read as a TOML value and falls back to a bare string.

use std::path::{Path, PathBuf};

use kpnn_core::mc::{LowerBoundPlan, ReplicationPlan, SummaryOptions};
use kpnn_core::process::{MeanFunction, NoiseScale, NoiseSpec, RegressionSpec};
use kpnn_core::{DensitySpec, Model, Point, WeightScheme};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    CltRate,
    PnnCount,
    BiasDecay,
    TailCalibration,
    Concentration,
    LowerBoundFit,
    AssumptionAudit,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::CltRate,
        Experiment::PnnCount,
        Experiment::BiasDecay,
        Experiment::TailCalibration,
        Experiment::Concentration,
        Experiment::LowerBoundFit,
        Experiment::AssumptionAudit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::CltRate => "clt-rate",
            Experiment::PnnCount => "pnn-count",
            Experiment::BiasDecay => "bias-decay",
            Experiment::TailCalibration => "tail-calibration",
            Experiment::Concentration => "concentration",
            Experiment::LowerBoundFit => "lower-bound-fit",
            Experiment::AssumptionAudit => "assumption-audit",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Experiment::CltRate => "distance of the standardized prediction vector to the Gaussian, per (n, k)",
            Experiment::PnnCount => "moments of the voting-set size L and its k log^(d-1) n normalization",
            Experiment::BiasDecay => "bias and variance of the prediction against r0, with the noise floor",
            Experiment::TailCalibration => "simulated region membership against the Poisson formula and tail bound",
            Experiment::Concentration => "fraction of samples with L <= E L / 2 (k >= 11)",
            Experiment::LowerBoundFit => "growth exponent in k of the double membership integral",
            Experiment::AssumptionAudit => "region-stabilization checks on random configurations",
        }
    }

    pub fn columns(self) -> &'static [&'static str] {
        match self {
            Experiment::CltRate => &["n", "k", "m", "reps", "d_k", "d_k_se", "d_rect", "sigma_min_eig", "mean_L"],
            Experiment::PnnCount => &["n", "k", "x0_index", "d", "mean_L", "se_L", "ratio_to_klogd", "recip_moment"],
            Experiment::BiasDecay => &[
                "n", "k", "x0_index", "reps", "r0", "mean", "bias", "abs_bias", "se", "var", "floor", "floor_pass",
            ],
            Experiment::TailCalibration => {
                &["case", "n", "k", "lambda", "psi", "tail_bound", "mc_freq", "mc_se", "z"]
            }
            Experiment::Concentration => &["n", "k", "x0_index", "reps", "mean_L", "fraction", "se", "skipped"],
            Experiment::LowerBoundFit => &["t", "alpha", "n", "k", "estimate", "se", "exponent", "exponent_se"],
            Experiment::AssumptionAudit => &[
                "instance",
                "d",
                "points",
                "k",
                "points_checked",
                "r1_violations",
                "r3_violations",
                "r4_violations",
                "collapsed",
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default = "default_density")]
    pub density: DensitySpec,
    #[serde(default = "default_noise")]
    pub noise: NoiseSpec,
    #[serde(default = "default_r0")]
    pub r0: MeanFunction,
    #[serde(default = "default_sigma")]
    pub sigma: NoiseScale,
}

fn default_density() -> DensitySpec {
    DensitySpec::unit_cube(2)
}

fn default_noise() -> NoiseSpec {
    NoiseSpec::Gaussian
}

fn default_r0() -> MeanFunction {
    MeanFunction::Constant { value: 0.0 }
}

fn default_sigma() -> NoiseScale {
    NoiseScale::Constant { value: 1.0 }
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            density: default_density(),
            noise: default_noise(),
            r0: default_r0(),
            sigma: default_sigma(),
        }
    }
}

impl ModelSection {
    pub fn model(&self) -> Model {
        Model::new(
            self.density.clone(),
            self.noise,
            RegressionSpec::new(self.r0.clone(), self.sigma.clone()),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "default_ns")]
    pub n: Vec<f64>,
    #[serde(default = "default_ks")]
    pub k: Vec<usize>,
    /// Test points; empty means the centre of the density's support box.
    #[serde(default)]
    pub x0: Vec<Point>,
}

fn default_ns() -> Vec<f64> {
    vec![1e3, 1e4]
}

fn default_ks() -> Vec<usize> {
    vec![1]
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            n: default_ns(),
            k: default_ks(),
            x0: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SummarySection {
    pub grid: usize,
    pub bootstrap: usize,
}

impl Default for SummarySection {
    fn default() -> Self {
        let o = SummaryOptions::default();
        SummarySection {
            grid: o.grid,
            bootstrap: o.bootstrap,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TailSection {
    pub cases: usize,
    /// Poisson samples per case.
    pub draws: usize,
}

impl Default for TailSection {
    fn default() -> Self {
        TailSection {
            cases: 20,
            draws: 20_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuditSection {
    pub instances: usize,
}

impl Default for AuditSection {
    fn default() -> Self {
        AuditSection { instances: 500 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LowerBoundSection {
    pub t: f64,
    pub alpha: f64,
    pub n: f64,
    pub outer: usize,
    pub inner: usize,
}

impl Default for LowerBoundSection {
    fn default() -> Self {
        LowerBoundSection {
            t: 1.0,
            alpha: 1.0,
            n: 1e4,
            outer: 20_000,
            inner: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub plot: bool,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub scheme: WeightScheme,
    #[serde(default)]
    pub summary: SummarySection,
    #[serde(default)]
    pub tail: TailSection,
    #[serde(default)]
    pub audit: AuditSection,
    #[serde(default)]
    pub lower_bound: LowerBoundSection,
}

fn default_reps() -> usize {
    1000
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        ExperimentConfig::deserialize(toml::Value::Table(table)).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text, overrides)
    }

    pub fn model(&self) -> Model {
        self.model.model()
    }

    pub fn x0s(&self) -> Result<Vec<Point>> {
        if self.grid.x0.is_empty() {
            let (lo, hi) = self.model.density.support();
            Ok(vec![Point::new(lo.iter().zip(hi).map(|(l, h)| 0.5 * (l + h)).collect())?])
        } else {
            Ok(self.grid.x0.clone())
        }
    }

    pub fn replication_plan(&self) -> Result<ReplicationPlan> {
        Ok(ReplicationPlan {
            model: self.model(),
            ns: self.grid.n.clone(),
            ks: self.grid.k.clone(),
            x0s: self.x0s()?,
            reps: self.reps,
            scheme: self.scheme,
            seed: self.seed,
        })
    }

    pub fn lower_bound_plan(&self) -> LowerBoundPlan {
        let lb = &self.lower_bound;
        LowerBoundPlan {
            dim: self.model.density.dim(),
            ks: self.grid.k.clone(),
            t: lb.t,
            alpha: lb.alpha,
            n: lb.n,
            outer: lb.outer,
            inner: lb.inner,
            seed: self.seed,
        }
    }

    pub fn summary_options(&self) -> SummaryOptions {
        SummaryOptions {
            grid: self.summary.grid,
            bootstrap: self.summary.bootstrap,
        }
    }
}

fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Applies one `dotted.key=value` override.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{spec}` is not of the form key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("override key `{key}` is malformed")));
    }
    let (last, path) = parts.split_last().expect("split yields at least one part");
    let mut cur = table;
    for p in path {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override `{key}`: `{p}` is not a table")))?;
    }
    cur.insert(last.to_string(), parse_value(raw.trim()));
    Ok(())
}
