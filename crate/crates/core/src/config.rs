//! The TOML run configuration shared by every command.
//!
//! ```toml
//! seed = 0
//!
//! [task]
//! n_query = 64
//!
//! [train]
//! epochs = 25
//!
//! [[eval.datasets]]
//! source = "dev"
//! kind = "moons"
//! n = 1000
//! noise = 0.05
//! anomaly_ratio = 0.1
//! seed = 0
//! ```
//!
//! Every section is optional and unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::detector::EnsembleConfig;
use crate::error::{Error, Result};
use crate::eval::bench::{BenchConfig, MethodSpec};
use crate::eval::datasets::{load_csv, make_blobs, make_dev_dataset, BlobSpec, Dataset, DevSpec};
use crate::model::ArchConfig;
use crate::scm::ScmHyperparams;
use crate::task::{Regime, TaskConfig};
use crate::train::TrainConfig;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Master seed for task generation.
    pub seed: u64,
    pub scm: ScmHyperparams,
    pub task: TaskConfig,
    pub arch: ArchConfig,
    pub train: TrainConfig,
    pub ensemble: EnsembleConfig,
    pub eval: EvalConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub datasets: Vec<DatasetEntry>,
    pub methods: Vec<MethodSpec>,
    pub bench: BenchConfig,
    /// Checkpoint directory for the `icl` method.
    pub checkpoint: Option<PathBuf>,
    pub thresholds: Vec<Threshold>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            datasets: Vec::new(),
            methods: vec![MethodSpec::Icl, MethodSpec::Knn { k: 5 }],
            bench: BenchConfig::default(),
            checkpoint: None,
            thresholds: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DatasetEntry {
    File { name: String, path: PathBuf },
    Dev(DevSpec),
    Blobs(BlobSpec),
}

impl DatasetEntry {
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DatasetEntry::File { name, path } => load_csv(path, name),
            DatasetEntry::Dev(spec) => make_dev_dataset(spec),
            DatasetEntry::Blobs(spec) => make_blobs(spec),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    AucRoc,
    AucPr,
    F1,
}

/// A lower bound on an aggregate metric; `cmd_eval` fails when it is missed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Threshold {
    pub regime: Regime,
    pub method: String,
    pub metric: Metric,
    pub min: f64,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses the file and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
        let mut cfg = Self::from_toml_str(&text)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for d in &mut self.eval.datasets {
            if let DatasetEntry::File { path, .. } = d {
                fix(path);
            }
        }
        if let Some(p) = &mut self.eval.checkpoint {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scm.validate()?;
        self.task.validate()?;
        self.arch.validate()?;
        self.train.validate()?;
        self.ensemble.validate(self.arch.d_max)?;
        if self.task.d_max > self.arch.d_max {
            return Err(Error::InvalidConfig(format!(
                "task.d_max ({}) exceeds arch.d_max ({})",
                self.task.d_max, self.arch.d_max
            )));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    /// Writes the effective configuration as `config.toml` in `dir`.
    pub fn echo_into(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(Error::io(dir))?;
        let path = dir.join("config.toml");
        std::fs::write(&path, self.to_toml()?).map_err(Error::io(&path))
    }
}
