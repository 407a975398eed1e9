//! Run configuration files.

use std::path::{Path, PathBuf};

use centroaffine::body::BodySpec;
use centroaffine::invariants::{default_p_list, MAX_SEQUENCE_INDEX};
use centroaffine::sphere::Resolution;
use centroaffine::suite::{default_tolerance, SuiteConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: default_out_dir(),
            formats: default_formats(),
        }
    }
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_formats() -> Vec<Format> {
    vec![Format::Json, Format::Csv]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    /// Planar grid of the flow; defaults to `fine` when that is set on the
    /// command line or in the file, else to 128 nodes.
    #[serde(default)]
    pub resolution: Option<Resolution>,
    /// Step of the traced run; defaults to the stability bound.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "default_steps")]
    pub steps: usize,
    /// Largest half-width of the volume differences.
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_levels")]
    pub levels: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            resolution: None,
            dt: None,
            steps: default_steps(),
            tau: default_tau(),
            levels: default_levels(),
        }
    }
}

pub const DEFAULT_FLOW_RESOLUTION: Resolution = Resolution::Circle(128);

fn default_steps() -> usize {
    100
}

fn default_tau() -> f64 {
    centroaffine::flowcheck::DEFAULT_TAU
}

fn default_levels() -> usize {
    2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Fourier,
    Sphharm,
    /// Random centered ellipses.
    Ellipsoid,
}

impl Family {
    pub fn dim(self) -> usize {
        match self {
            Family::Fourier => 2,
            Family::Sphharm => 3,
            Family::Ellipsoid => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FalsifyConfig {
    #[serde(default = "default_family")]
    pub family: Family,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Checks with slack below `margin · tol` are logged.
    #[serde(default = "default_margin")]
    pub margin: f64,
}

impl Default for FalsifyConfig {
    fn default() -> Self {
        FalsifyConfig {
            family: default_family(),
            samples: default_samples(),
            margin: default_margin(),
        }
    }
}

fn default_family() -> Family {
    Family::Fourier
}

fn default_samples() -> usize {
    100
}

fn default_margin() -> f64 {
    10.0
}

/// Contents of a configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: u32,
    #[serde(default)]
    pub body: Option<BodySpec>,
    #[serde(default)]
    pub fine: Option<Resolution>,
    #[serde(default)]
    pub coarse: Option<Resolution>,
    #[serde(default)]
    pub p_list: Option<Vec<f64>>,
    /// Last index of the limit sequences.
    #[serde(default = "default_p_max")]
    pub p_max: usize,
    /// Last index of the inequality chains in the suite.
    #[serde(default = "default_chain_p_max")]
    pub chain_p_max: usize,
    #[serde(default)]
    pub tolerance: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub flow: FlowConfig,
    #[serde(default)]
    pub falsify: FalsifyConfig,
}

fn default_p_max() -> usize {
    20
}

fn default_chain_p_max() -> usize {
    6
}

/// Command-line overrides.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub resolution: Option<Resolution>,
    pub p_max: Option<usize>,
}

/// Parses `N` or `Nθ,Nφ`.
pub fn parse_resolution(s: &str) -> Result<Resolution, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |p: &str| p.parse::<usize>().map_err(|e| format!("bad resolution component {p:?}: {e}"));
    match parts.as_slice() {
        [n] => Ok(Resolution::Circle(num(n)?)),
        [a, b] => Ok(Resolution::Sphere(num(a)?, num(b)?)),
        _ => Err(format!("resolution must be N or Ntheta,Nphi, got {s:?}")),
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<RunConfig, CliError> {
        let config: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if config.schema != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "unsupported schema {}; expected {SCHEMA_VERSION}",
                config.schema
            )));
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        RunConfig::from_json(&text)
    }

    /// Applies command-line overrides; a new fine resolution also resets the
    /// coarse one to half of it.
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(out) = &o.out {
            self.output.dir = out.clone();
        }
        if let Some(r) = o.resolution {
            self.fine = Some(r);
            self.coarse = Some(r.coarser());
        }
        if let Some(p) = o.p_max {
            self.p_max = p;
        }
    }

    pub fn flow_resolution(&self) -> Resolution {
        self.flow.resolution.or(self.fine).unwrap_or(DEFAULT_FLOW_RESOLUTION)
    }

    pub fn wants(&self, format: Format) -> bool {
        self.output.formats.contains(&format)
    }

    /// Fixes every defaulted setting for a body of dimension `dim`.
    pub fn resolve(&self, dim: usize) -> Result<Resolved, CliError> {
        let base = SuiteConfig::for_dim(dim).map_err(|e| CliError::Config(e.to_string()))?;
        let fine = self.fine.unwrap_or(base.fine);
        let coarse = self.coarse.unwrap_or(if self.fine.is_some() { fine.coarser() } else { base.coarse });
        if fine.dim() != dim || coarse.dim() != dim {
            return Err(CliError::Config(format!(
                "resolution {fine}/{coarse} does not fit a body of dimension {dim}"
            )));
        }
        if coarse.node_count() >= fine.node_count() {
            return Err(CliError::Config(format!("coarse resolution {coarse} must be below fine {fine}")));
        }
        if !(2..=MAX_SEQUENCE_INDEX).contains(&self.p_max) {
            return Err(CliError::Config(format!("p_max must lie in 2..={MAX_SEQUENCE_INDEX}")));
        }
        if !(2..=MAX_SEQUENCE_INDEX).contains(&self.chain_p_max) {
            return Err(CliError::Config(format!("chain_p_max must lie in 2..={MAX_SEQUENCE_INDEX}")));
        }
        if let Some(t) = self.tolerance {
            if !(t > 0.0 && t.is_finite()) {
                return Err(CliError::Config(format!("tolerance must be positive, got {t}")));
            }
        }
        let p_list = self.p_list.clone().unwrap_or_else(|| default_p_list(dim));
        if p_list.iter().any(|p| !p.is_finite()) {
            return Err(CliError::Config("p_list entries must be finite".into()));
        }
        Ok(Resolved {
            dim,
            fine,
            coarse,
            p_list,
            p_max: self.p_max,
            chain_p_max: self.chain_p_max,
            tolerance: self.tolerance.unwrap_or_else(|| default_tolerance(dim)),
            tolerance_override: self.tolerance,
            seed: self.seed,
        })
    }
}

/// Settings after defaults are filled in; recorded in every output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Resolved {
    pub dim: usize,
    pub fine: Resolution,
    pub coarse: Resolution,
    pub p_list: Vec<f64>,
    pub p_max: usize,
    pub chain_p_max: usize,
    pub tolerance: f64,
    #[serde(skip)]
    pub tolerance_override: Option<f64>,
    pub seed: u64,
}

impl Resolved {
    pub fn suite_config(&self) -> SuiteConfig {
        SuiteConfig {
            fine: self.fine,
            coarse: self.coarse,
            p_list: self.p_list.clone(),
            chain_p_max: self.chain_p_max,
            tol: self.tolerance_override,
            seed: self.seed,
        }
    }
}
