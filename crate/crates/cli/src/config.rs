use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use volres::data::Split;
use volres::train::{SweepGrid, TrainConfig};

/// Floating-point type used for training.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F32,
    F64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum EnsembleMode {
    #[default]
    MeanSoftmax,
    WeightAverage,
    None,
}

impl EnsembleMode {
    pub fn name(self) -> &'static str {
        match self {
            EnsembleMode::MeanSoftmax => "mean-softmax",
            EnsembleMode::WeightAverage => "weight-average",
            EnsembleMode::None => "none",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VoxelizeSection {
    pub input_dir: Option<PathBuf>,
    pub dims: [usize; 3],
    /// Recorded with the cache; conversion itself draws no random numbers.
    pub seed: u64,
    /// Fraction of unreadable meshes tolerated before the command fails.
    pub max_skip_fraction: f64,
}

impl Default for VoxelizeSection {
    fn default() -> Self {
        VoxelizeSection {
            input_dir: None,
            dims: [30, 30, 30],
            seed: 0,
            max_skip_fraction: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    /// Glob pattern for checkpoint files.
    pub checkpoints: Option<String>,
    pub ensemble: EnsembleMode,
    pub split: Split,
    pub batch_size: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            checkpoints: None,
            ensemble: EnsembleMode::default(),
            split: Split::Test,
            batch_size: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GradcheckSection {
    pub seed: u64,
    pub cases_per_op: usize,
    pub network_coords_per_param: usize,
}

impl Default for GradcheckSection {
    fn default() -> Self {
        let d = volres::gradcheck::GradCheckConfig::default();
        GradcheckSection {
            seed: d.seed,
            cases_per_op: d.cases_per_op,
            network_coords_per_param: d.network_coords_per_param,
        }
    }
}

/// Everything a command needs. Each command reads the sections it uses;
/// the resolved document is written next to the command's outputs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub command: Option<String>,
    /// Directory holding `train.voxl`, `test.voxl` and `index.json`.
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub precision: Precision,
    pub voxelize: VoxelizeSection,
    pub train: TrainConfig,
    pub eval: EvalSection,
    pub gradcheck: GradcheckSection,
    pub grid: SweepGrid,
}

impl RunConfig {
    /// Parse a config file, rejecting unknown keys. A stored `command` must
    /// match the command being run.
    pub fn load(path: Option<&Path>, command: &str) -> Result<Self> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let cfg: RunConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        if let Some(c) = &cfg.command {
            if c != command {
                bail!("config {} is for `{c}`, not `{command}`", path.display());
            }
        }
        Ok(cfg)
    }

    pub fn out_dir(&self) -> Result<&Path> {
        self.out
            .as_deref()
            .context("no output directory: pass --out or set \"out\" in the config")
    }

    pub fn data_dir(&self) -> Result<&Path> {
        self.data
            .as_deref()
            .context("no data directory: pass --data or set \"data\" in the config")
    }

    /// Write `resolved_config.json` into the output directory.
    pub fn write_resolved(&self, command: &str) -> Result<PathBuf> {
        let mut resolved = self.clone();
        resolved.command = Some(command.to_owned());
        let path = self.out_dir()?.join("resolved_config.json");
        volres::util::write_atomic(&path, serde_json::to_string_pretty(&resolved)?.as_bytes())?;
        Ok(path)
    }
}

/// `30` for a cube or `d,h,w`.
pub fn parse_dims(s: &str) -> std::result::Result<[usize; 3], String> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    match parts.as_slice() {
        &[n] => Ok([n, n, n]),
        &[d, h, w] => Ok([d, h, w]),
        _ => Err(format!("expected N or D,H,W, got {s:?}")),
    }
}
