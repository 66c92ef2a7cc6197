//! JSON pipeline configuration.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "alpha": 0.2,
//!   "models": {
//!     "A": { "backend": { "kind": "oracle", "gt": "brain_mask.nii" } },
//!     "B": { "backend": { "kind": "external", "command": ["python", "serve.py", "B"] } }
//!   }
//! }
//! ```
//!
//! Omitted windows and steps default to the model table; relative paths are
//! resolved against the config file's directory. Oracle ground truth is
//! binarized and conformed exactly like the input image.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::cascade::{conform, BfsCombine, CascadeConfig, StageSpec, VoteRule};
use crate::defaults::{ModelId, ALPHA, BFS_MODELS, CONFORM_SIDE, CONFORM_SPACING, DFS_MODELS};
use crate::error::{Error, Result};
use crate::morphology::Connectivity;
use crate::nifti::read_nifti;
use crate::predictor::{make_constant, make_external, make_noisy_oracle, make_oracle, NoiseSpec, PredictorHandle};
use crate::seed::derive_seed;
use crate::volume::{Volume, VolumeKind};
use crate::windowing::AccumulateMode;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_TIMEOUT_MS: u64 = 30_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConformSpec {
    pub side: usize,
    pub spacing: f64,
}

impl Default for ConformSpec {
    fn default() -> Self {
        ConformSpec {
            side: CONFORM_SIDE,
            spacing: CONFORM_SPACING,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendSpec {
    Oracle {
        gt: PathBuf,
    },
    NoisyOracle {
        gt: PathBuf,
        #[serde(default)]
        noise: NoiseSpec,
        /// Defaults to a stream derived from the master seed and model letter.
        #[serde(default)]
        model_seed: Option<u64>,
    },
    External {
        command: Vec<String>,
        #[serde(default = "default_timeout")]
        timeout_ms: u64,
    },
    Constant {
        value: f32,
    },
}

fn default_timeout() -> u64 {
    DEFAULT_TIMEOUT_MS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default)]
    pub window: Option<usize>,
    #[serde(default)]
    pub step: Option<usize>,
    pub backend: BackendSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub conform: ConformSpec,
    #[serde(default = "default_alpha")]
    pub alpha: f32,
    #[serde(default)]
    pub bfs_threshold: f32,
    #[serde(default)]
    pub bfs_combine: BfsCombine,
    #[serde(default)]
    pub accumulate_mode: AccumulateMode,
    #[serde(default)]
    pub vote_rule: VoteRule,
    #[serde(default)]
    pub connectivity: Connectivity,
    pub models: BTreeMap<ModelId, ModelSpec>,
    #[serde(default = "default_bfs")]
    pub bfs_stages: Vec<ModelId>,
    #[serde(default = "default_dfs")]
    pub dfs_stages: Vec<ModelId>,
}

fn default_alpha() -> f32 {
    ALPHA
}

fn default_bfs() -> Vec<ModelId> {
    BFS_MODELS.to_vec()
}

fn default_dfs() -> Vec<ModelId> {
    DFS_MODELS.to_vec()
}

impl PipelineConfig {
    /// Every model uses the same backend.
    pub fn uniform(backend: BackendSpec) -> Self {
        PipelineConfig {
            schema_version: SCHEMA_VERSION,
            conform: ConformSpec::default(),
            alpha: ALPHA,
            bfs_threshold: 0.0,
            bfs_combine: BfsCombine::Union,
            accumulate_mode: AccumulateMode::Sum,
            vote_rule: VoteRule::Majority,
            connectivity: Connectivity::TwentySix,
            models: ModelId::ALL
                .iter()
                .map(|&m| {
                    (
                        m,
                        ModelSpec {
                            window: None,
                            step: None,
                            backend: backend.clone(),
                        },
                    )
                })
                .collect(),
            bfs_stages: default_bfs(),
            dfs_stages: default_dfs(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        for id in self.bfs_stages.iter().chain(&self.dfs_stages) {
            if !self.models.contains_key(id) {
                return Err(Error::Config(format!("stage uses model {id}, which has no entry in `models`")));
            }
        }
        for (id, m) in &self.models {
            if let BackendSpec::External { command, .. } = &m.backend {
                if command.is_empty() {
                    return Err(Error::Config(format!("model {id}: external command is empty")));
                }
            }
            if let BackendSpec::NoisyOracle { noise, .. } = &m.backend {
                noise.validate().map_err(|e| Error::Config(format!("model {id}: {e}")))?;
            }
        }
        Ok(())
    }

    fn window_step(&self, id: ModelId) -> (usize, usize) {
        let m = &self.models[&id];
        (m.window.unwrap_or(id.row().window), m.step.unwrap_or(id.row().step))
    }

    /// Instantiates the predictors. `base` resolves relative paths and
    /// `master_seed` seeds noisy oracles without an explicit `model_seed`.
    pub fn build(&self, base: &Path, master_seed: u64) -> Result<CascadeConfig> {
        self.validate()?;
        let mut gts: BTreeMap<PathBuf, Arc<Volume>> = BTreeMap::new();
        let mut handles: BTreeMap<ModelId, PredictorHandle> = BTreeMap::new();
        let mut used: Vec<ModelId> = self.bfs_stages.iter().chain(&self.dfs_stages).copied().collect();
        used.sort();
        used.dedup();
        for id in used {
            let (w, _) = self.window_step(id);
            let mut load_gt = |p: &Path| -> Result<Arc<Volume>> {
                let path = if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
                if let Some(v) = gts.get(&path) {
                    return Ok(v.clone());
                }
                let v = Arc::new(load_ground_truth(&path, &self.conform)?);
                gts.insert(path, v.clone());
                Ok(v)
            };
            let h = match &self.models[&id].backend {
                BackendSpec::Oracle { gt } => make_oracle(load_gt(gt)?, w)?,
                BackendSpec::NoisyOracle { gt, noise, model_seed } => {
                    let seed = model_seed.unwrap_or_else(|| derive_seed(master_seed, "model", id as u64));
                    make_noisy_oracle(load_gt(gt)?, w, noise.clone(), seed)?
                }
                BackendSpec::External { command, timeout_ms } => {
                    let command: Vec<String> = command.clone();
                    make_external(&command, w, Duration::from_millis(*timeout_ms))?
                }
                BackendSpec::Constant { value } => make_constant(*value, w)?,
            };
            handles.insert(id, h.with_id(id.to_string()));
        }
        let stage = |id: &ModelId| -> StageSpec {
            let (window, step) = self.window_step(*id);
            StageSpec {
                name: id.to_string(),
                model: handles[id].clone(),
                window,
                step,
                alpha: self.alpha,
            }
        };
        let cfg = CascadeConfig {
            bfs_stages: self.bfs_stages.iter().map(stage).collect(),
            dfs_stages: self.dfs_stages.iter().map(stage).collect(),
            bfs_threshold: self.bfs_threshold,
            bfs_combine: self.bfs_combine,
            accumulate_mode: self.accumulate_mode,
            vote_rule: self.vote_rule,
            connectivity: self.connectivity,
            conform_side: self.conform.side,
            conform_spacing: self.conform.spacing,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Reads a mask or label map, sets every nonzero voxel to 1, and conforms it.
pub fn load_ground_truth(path: &Path, spec: &ConformSpec) -> Result<Volume> {
    let raw = read_nifti(path)?;
    let data = raw.data().iter().map(|&v| (v != 0.0) as u8 as f32).collect();
    let mask = Volume::from_vec(raw.dims(), raw.spacing(), VolumeKind::Mask, data)?;
    conform(&mask, spec.side, spec.spacing)
}
