//! Run manifests: everything needed to trace and reproduce a training run.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use quatde_core::{Metrics, ModelVariant, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::io::{self, Layout, LoadedDataset};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSnapshot {
    pub variant: String,
    pub dim: usize,
    pub epochs: usize,
    pub nbatches: usize,
    pub learning_rate: f64,
    pub lambda: f64,
    pub negatives: usize,
    pub valid_interval: usize,
    pub seed: u64,
}

impl From<&TrainConfig> for ConfigSnapshot {
    fn from(c: &TrainConfig) -> Self {
        Self {
            variant: c.variant.to_string(),
            dim: c.dim,
            epochs: c.epochs,
            nbatches: c.nbatches,
            learning_rate: c.learning_rate,
            lambda: c.lambda,
            negatives: c.negatives,
            valid_interval: c.valid_interval,
            seed: c.seed,
        }
    }
}

impl ConfigSnapshot {
    pub fn to_config(&self) -> Result<TrainConfig> {
        let variant: ModelVariant = self
            .variant
            .parse()
            .map_err(|_| anyhow::anyhow!("unknown variant {:?}", self.variant))?;
        Ok(TrainConfig {
            epochs: self.epochs,
            nbatches: self.nbatches,
            learning_rate: self.learning_rate,
            lambda: self.lambda,
            negatives: self.negatives,
            dim: self.dim,
            valid_interval: self.valid_interval,
            seed: self.seed,
            variant,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub path: PathBuf,
    pub layout: String,
    /// File names relative to `path`, in digest order.
    pub files: Vec<String>,
    pub sha256: String,
    pub entities: usize,
    pub relations: usize,
    pub train: usize,
    pub valid: usize,
    pub test: usize,
}

impl DatasetInfo {
    pub fn describe(path: &Path, loaded: &LoadedDataset) -> Result<Self> {
        let ds = &loaded.dataset;
        Ok(Self {
            path: path.to_path_buf(),
            layout: match loaded.layout {
                Layout::Integer => "integer",
                Layout::Raw => "raw",
            }
            .to_string(),
            files: loaded
                .files
                .iter()
                .map(|f| f.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default())
                .collect(),
            sha256: io::digest_files(&loaded.files)?,
            entities: ds.num_entities(),
            relations: ds.num_relations(),
            train: ds.train.len(),
            valid: ds.valid.len(),
            test: ds.test.len(),
        })
    }

    /// Recomputes the digest of the files on disk.
    pub fn current_digest(&self) -> Result<String> {
        let files: Vec<PathBuf> = self.files.iter().map(|f| self.path.join(f)).collect();
        Ok(io::digest_files(&files)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsSnapshot {
    pub count: usize,
    pub mr: f64,
    pub mrr: f64,
    pub hit1: f64,
    pub hit3: f64,
    pub hit10: f64,
}

impl From<&Metrics> for MetricsSnapshot {
    fn from(m: &Metrics) -> Self {
        Self {
            count: m.count,
            mr: m.mr,
            mrr: m.mrr,
            hit1: m.hit1,
            hit3: m.hit3,
            hit10: m.hit10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub config: ConfigSnapshot,
    pub dataset: DatasetInfo,
    pub seed: u64,
    pub started_at: String,
    pub finished_at: String,
    pub checkpoint: PathBuf,
    pub training_log: PathBuf,
    pub best_epoch: Option<usize>,
    /// Filtered test metrics of the saved checkpoint, when a test split exists.
    pub final_metrics: Option<MetricsSnapshot>,
}

impl RunManifest {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

pub fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}
