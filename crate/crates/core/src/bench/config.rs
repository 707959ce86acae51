//! Experiment configuration: TOML ingestion, validation, overrides, hashing.
//!
//! The config file is a flat TOML document; every value can also be set from
//! the command line (`--seed`, `--paths`, ... or the generic
//! `--set key=value` for nested keys). Command-line values win.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{InitialLaw, LinearGaussianParams, SimGrid, SteinSteinParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    LinearGaussian,
    SteinStein,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algo {
    Ls,
    Tvr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    Mc,
    Pde,
    European,
}

/// Initial law of the unobserved state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LawConfig {
    Gaussian { mean: f64, std: f64 },
    Uniform { lo: f64, hi: f64 },
    TwoPoint { lo: f64, hi: f64 },
    Dirac { value: f64 },
}

impl LawConfig {
    pub fn to_law(self) -> InitialLaw {
        match self {
            LawConfig::Gaussian { mean, std } => InitialLaw::Gaussian { mean, std },
            LawConfig::Uniform { lo, hi } => InitialLaw::Uniform { lo, hi },
            LawConfig::TwoPoint { lo, hi } => InitialLaw::TwoPoint { lo, hi },
            LawConfig::Dirac { value } => InitialLaw::Dirac { value },
        }
    }

    pub fn label(&self) -> String {
        match self {
            LawConfig::Gaussian { mean, std } => format!("N({mean},{std}^2)"),
            LawConfig::Uniform { lo, hi } => format!("U[{lo},{hi}]"),
            LawConfig::TwoPoint { lo, hi } => format!("half({lo},{hi})"),
            LawConfig::Dirac { value } => format!("dirac({value})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub horizon: f64,
    pub dt_exercise: f64,
    pub delta_obs: f64,
    #[serde(default = "default_substeps")]
    pub substeps: usize,
}

fn default_substeps() -> usize {
    1
}

impl GridConfig {
    pub fn to_grid(&self) -> Result<SimGrid> {
        SimGrid::new(self.horizon, self.dt_exercise, self.delta_obs, self.substeps)
    }
}

fn default_algo() -> Algo {
    Algo::Ls
}

fn default_solver() -> Solver {
    Solver::Mc
}

fn default_seed() -> u64 {
    20_260_811
}

fn default_paths() -> usize {
    30_000
}

fn default_european_paths() -> usize {
    200_000
}

fn default_quad_order() -> usize {
    16
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    #[serde(default = "default_algo")]
    pub algo: Algo,
    #[serde(default = "default_solver")]
    pub solver: Solver,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_paths")]
    pub paths: usize,
    pub particles: usize,
    #[serde(default = "default_european_paths")]
    pub european_paths: usize,
    /// Gauss–Hermite order of the European feature.
    #[serde(default = "default_quad_order")]
    pub quad_order: usize,
    pub y0: f64,
    pub initial_law: LawConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub linear_gaussian: Option<LinearGaussianParams>,
    #[serde(default)]
    pub stein_stein: Option<SteinSteinParams>,
}

impl ExperimentConfig {
    /// Linear-Gaussian benchmark defaults: N(0, 0.05^2), y0 = 2, N = 30000,
    /// n = 500, delta = 0.01, dt = 0.05.
    pub fn linear_gaussian_default() -> Self {
        ExperimentConfig {
            model: ModelKind::LinearGaussian,
            algo: Algo::Ls,
            solver: Solver::Mc,
            seed: default_seed(),
            paths: 30_000,
            particles: 500,
            european_paths: default_european_paths(),
            quad_order: default_quad_order(),
            y0: 2.0,
            initial_law: LawConfig::Gaussian { mean: 0.0, std: 0.05 },
            grid: GridConfig { horizon: 1.0, dt_exercise: 0.05, delta_obs: 0.01, substeps: 1 },
            linear_gaussian: Some(crate::model::linear_gaussian_example_params()),
            stein_stein: Some(crate::model::stein_stein_example_params()),
        }
    }

    /// Stochastic-volatility benchmark defaults: price 110 (log-price
    /// ln 110), vol pinned at 0.15, N = 30000, n = 1000, dt = 0.05.
    pub fn stein_stein_default() -> Self {
        ExperimentConfig {
            model: ModelKind::SteinStein,
            algo: Algo::Ls,
            solver: Solver::Mc,
            seed: default_seed(),
            paths: 30_000,
            particles: 1000,
            european_paths: default_european_paths(),
            quad_order: default_quad_order(),
            y0: 110.0f64.ln(),
            initial_law: LawConfig::Dirac { value: 0.15 },
            grid: GridConfig { horizon: 1.0, dt_exercise: 0.05, delta_obs: 0.01, substeps: 1 },
            linear_gaussian: Some(crate::model::linear_gaussian_example_params()),
            stein_stein: Some(crate::model::stein_stein_example_params()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.paths < 2 || self.particles < 2 {
            return Err(Error::config("paths and particles must each be at least 2"));
        }
        if self.quad_order < 2 {
            return Err(Error::config("quad_order must be at least 2"));
        }
        self.initial_law.to_law().validate()?;
        self.grid.to_grid()?;
        match self.model {
            ModelKind::LinearGaussian => {
                let p = self
                    .linear_gaussian
                    .ok_or_else(|| Error::config("missing [linear_gaussian] parameters"))?;
                p.validate()?;
                if self.y0 <= 0.0 {
                    return Err(Error::config("y0 must be positive for the linear model"));
                }
            }
            ModelKind::SteinStein => {
                let p = self
                    .stein_stein
                    .ok_or_else(|| Error::config("missing [stein_stein] parameters"))?;
                p.validate()?;
            }
        }
        Ok(())
    }

    pub fn lg_params(&self) -> Result<LinearGaussianParams> {
        self.linear_gaussian.ok_or_else(|| Error::config("missing [linear_gaussian] parameters"))
    }

    pub fn ss_params(&self) -> Result<SteinSteinParams> {
        self.stein_stein.ok_or_else(|| Error::config("missing [stein_stein] parameters"))
    }

    /// Short human-readable description for result rows.
    pub fn summary(&self) -> String {
        format!(
            "{}/{}/y0={}/N={}/n={}/dt={}/delta={}/seed={}",
            match self.model {
                ModelKind::LinearGaussian => "linear_gaussian",
                ModelKind::SteinStein => "stein_stein",
            },
            self.initial_law.label(),
            self.y0,
            self.paths,
            self.particles,
            self.grid.dt_exercise,
            self.grid.delta_obs,
            self.seed,
        )
    }

    /// Hash of the canonical TOML serialization; identifies a rerunnable row.
    pub fn hash(&self) -> String {
        let text = toml::to_string(self).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().take(6).map(|b| format!("{b:02x}")).collect()
    }
}

/// Reads and parses a config file; the error names the path.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(format!("cannot read config file {}: {e}", path.display())))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

/// Applies one `key=value` override with dotted nesting, e.g.
/// `linear_gaussian.kappa=2.5` or `grid.dt_exercise=0.1`.
pub fn apply_set(config: &ExperimentConfig, assignment: &str) -> Result<ExperimentConfig> {
    let (key, raw_value) = assignment
        .split_once('=')
        .ok_or_else(|| Error::config(format!("--set expects key=value, got '{assignment}'")))?;
    let mut table: toml::Table = toml::Table::try_from(config.clone())
        .map_err(|e| Error::Parse(format!("config serialization failed: {e}")))?;
    let value: toml::Value = raw_value
        .parse::<toml::Value>()
        .unwrap_or_else(|_| toml::Value::String(raw_value.to_string()));
    let mut cursor = &mut table;
    let parts: Vec<&str> = key.split('.').collect();
    for part in &parts[..parts.len() - 1] {
        cursor = cursor
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::config(format!("'{part}' is not a table in '{key}'")))?;
    }
    cursor.insert(parts[parts.len() - 1].to_string(), value);
    table.try_into().map_err(|e| Error::Parse(format!("override '{assignment}': {e}")))
}
