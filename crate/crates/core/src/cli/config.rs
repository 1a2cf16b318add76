//! Versioned JSON documents read by the subcommands. Unknown keys are errors.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::calculus::oracle::OracleSuiteConfig;
use crate::data::Dataset;
use crate::diagnostics::DEFAULT_EXACTNESS_TOL;
use crate::error::{Error, Result};
use crate::experiments::{
    gen_figure_eight, gen_four_region, gen_swiss_roll, FigureEightConfig, FourRegionConfig, LabelTable,
    SwissRollConfig,
};
use crate::network::{Activation, Architecture};
use crate::training::{LossKind, TrainConfig, TrainerKind};

pub const CONFIG_VERSION: u32 = 1;

fn check_version(v: u32) -> Result<()> {
    if v != CONFIG_VERSION {
        return Err(Error::Config(format!(
            "unsupported config version {v}; this build reads version {CONFIG_VERSION}"
        )));
    }
    Ok(())
}

/// Reads and parses `path`, mapping every failure to a config error that names the file.
pub fn load<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureSpec {
    pub widths: Vec<usize>,
    /// Per-layer activations; when absent every hidden layer uses `hidden`
    /// and the output layer is linear.
    #[serde(default)]
    pub activations: Option<Vec<Activation>>,
    #[serde(default = "default_hidden")]
    pub hidden: Activation,
}

fn default_hidden() -> Activation {
    Activation::sigmoid(1.0)
}

impl ArchitectureSpec {
    pub fn build(&self) -> Result<Architecture> {
        match &self.activations {
            Some(a) => Architecture::new(self.widths.clone(), a.clone()),
            None => Architecture::with_hidden(self.widths.clone(), self.hidden),
        }
    }
}

/// Where training or diagnostic samples come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    FourRegion {
        n: usize,
        seed: u64,
        #[serde(default)]
        table: LabelTable,
    },
    FigureEight {
        n_points: usize,
        noise_halfwidth: f64,
        seed: u64,
    },
    SwissRoll {
        n: usize,
        seed: u64,
        q_seed: u64,
    },
    /// Header row, then `input_dim` input columns followed by the target columns.
    /// A relative path is resolved against the config file's directory.
    Csv { path: PathBuf, input_dim: usize },
}

impl DataSource {
    pub fn load(&self, base: &Path) -> Result<Dataset> {
        match self {
            DataSource::FourRegion { n, seed, table } => gen_four_region(*n, *seed, table)?.to_dataset(),
            DataSource::FigureEight {
                n_points,
                noise_halfwidth,
                seed,
            } => gen_figure_eight(*n_points, *noise_halfwidth, *seed)?.to_dataset(),
            DataSource::SwissRoll { n, seed, q_seed } => gen_swiss_roll(*n, *seed, *q_seed)?.to_dataset(),
            DataSource::Csv { path, input_dim } => read_csv(&base.join(path), *input_dim),
        }
    }
}

fn read_csv(path: &Path, input_dim: usize) -> Result<Dataset> {
    if input_dim == 0 {
        return Err(Error::Config("csv input_dim must be at least 1".into()));
    }
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))?;
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let row: Vec<f64> = rec
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Config(format!("{} row {}: {e}", path.display(), i + 1)))?;
        if row.len() <= input_dim {
            return Err(Error::Config(format!(
                "{} row {}: {} columns, need more than input_dim = {input_dim}",
                path.display(),
                i + 1,
                row.len()
            )));
        }
        inputs.push(row[..input_dim].to_vec());
        targets.push(row[input_dim..].to_vec());
    }
    if inputs.is_empty() {
        return Err(Error::Config(format!("{} has no data rows", path.display())));
    }
    Dataset::new(inputs, targets)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitSpec {
    pub seed: u64,
    pub scale: f64,
    pub bias_scale: f64,
}

impl Default for InitSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            scale: 1.0,
            bias_scale: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainFile {
    pub version: u32,
    pub architecture: ArchitectureSpec,
    pub data: DataSource,
    #[serde(default = "LossKind::smoothed_l1")]
    pub loss: LossKind,
    #[serde(default = "default_trainer")]
    pub trainer: TrainerKind,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub init: InitSpec,
}

fn default_trainer() -> TrainerKind {
    TrainerKind::GaussNewton
}

impl TrainFile {
    pub fn check(&self) -> Result<()> {
        check_version(self.version)?;
        self.loss.validate()?;
        self.train.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseFile {
    pub version: u32,
    /// Relative paths are resolved against the config file's directory.
    pub checkpoint: PathBuf,
    pub data: DataSource,
    #[serde(default = "LossKind::smoothed_l1")]
    pub loss: LossKind,
    /// Intrinsic dimension of the data, for the width advisory.
    pub data_dim: usize,
    #[serde(default = "default_exactness")]
    pub exactness_tol: f64,
    #[serde(default = "default_tol_factor")]
    pub tol_factor: f64,
    /// Input used for the per-layer classification; defaults to the first sample.
    #[serde(default)]
    pub probe: Option<Vec<f64>>,
}

fn default_exactness() -> f64 {
    DEFAULT_EXACTNESS_TOL
}

fn default_tol_factor() -> f64 {
    crate::linalg::DEFAULT_TOL_FACTOR
}

impl DiagnoseFile {
    pub fn check(&self) -> Result<()> {
        check_version(self.version)?;
        self.loss.validate()?;
        if !(self.exactness_tol > 0.0 && self.tol_factor > 0.0) {
            return Err(Error::Config("exactness_tol and tol_factor must be positive".into()));
        }
        if self.data_dim == 0 {
            return Err(Error::Config("data_dim must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyFile {
    pub version: u32,
    #[serde(default)]
    pub suite: OracleSuiteConfig,
}

impl VerifyFile {
    pub fn check(&self) -> Result<()> {
        check_version(self.version)?;
        self.suite.validate()
    }
}

impl Default for VerifyFile {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            suite: OracleSuiteConfig::default(),
        }
    }
}

/// Settings for any of the three experiments; absent sections use defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub version: u32,
    #[serde(default)]
    pub four_region: FourRegionConfig,
    #[serde(default)]
    pub figure_eight: FigureEightConfig,
    #[serde(default)]
    pub swiss_roll: SwissRollConfig,
}

impl Default for ExperimentFile {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            four_region: FourRegionConfig::default(),
            figure_eight: FigureEightConfig::default(),
            swiss_roll: SwissRollConfig::default(),
        }
    }
}

impl ExperimentFile {
    pub fn check(&self) -> Result<()> {
        check_version(self.version)?;
        self.four_region.validate()?;
        self.figure_eight.validate()?;
        self.swiss_roll.validate()
    }
}
