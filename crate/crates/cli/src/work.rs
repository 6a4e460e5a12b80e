//! Layout of the work directory shared by the subcommands.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use vertseg::data::{Phase, Plane, SliceCache, SliceSample};
use vertseg::network::{Architecture, Model, ModelConfig, Scale};
use vertseg::training::{TrainConfig, BEST_FILE};

use crate::cli::{GlobalArgs, PlaneArg};

/// What `preprocess` recorded about the cached dataset.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub source: PathBuf,
    pub seed: u64,
    pub fractions: [f64; 3],
    pub train: Vec<String>,
    pub valid: Vec<String>,
    pub test: Vec<String>,
}

impl DatasetInfo {
    /// Short content hash naming the dataset in reports.
    pub fn id(&self) -> String {
        let mut ids = self.train.clone();
        ids.extend(self.valid.iter().cloned());
        ids.extend(self.test.iter().cloned());
        let h = vertseg::eval::report::config_hash(&(ids, self.seed, self.fractions));
        format!("{}-{}", self.source.file_name().and_then(|s| s.to_str()).unwrap_or("dataset"), &h[..12])
    }
}

pub struct Work {
    pub root: PathBuf,
}

impl Work {
    pub fn new(root: &Path) -> Self {
        Work { root: root.to_path_buf() }
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.root.join("cache")
    }

    pub fn dataset_file(&self) -> PathBuf {
        self.root.join("dataset.json")
    }

    pub fn model_dir(&self, arch: Architecture, plane: PlaneArg) -> PathBuf {
        self.root.join("models").join(format!("{}-{}", arch.label(), plane.name()))
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.root.join("reports")
    }

    pub fn ablation_dir(&self) -> PathBuf {
        self.root.join("ablation")
    }

    pub fn dataset(&self) -> Result<DatasetInfo> {
        let path = self.dataset_file();
        if !path.exists() {
            bail!("missing preprocessed dataset: {} not found (run `vertseg preprocess` first)", path.display());
        }
        Ok(serde_json::from_slice(&std::fs::read(&path)?).with_context(|| format!("reading {}", path.display()))?)
    }

    pub fn cache(&self) -> Result<SliceCache> {
        let dir = self.cache_dir();
        if !dir.join(vertseg::data::cache::INDEX_FILE).exists() {
            bail!("missing slice cache: {} not found (run `vertseg preprocess` first)", dir.display());
        }
        Ok(SliceCache::open(&dir)?)
    }

    /// Cached slices of `planes` in `phase`, resized to `size`.
    pub fn slices(&self, planes: &[Plane], phase: Phase, size: (usize, usize)) -> Result<Vec<SliceSample<f32>>> {
        let cache = self.cache()?;
        let mut out = Vec::new();
        for &plane in planes {
            for s in cache.load_all::<f32>(plane, phase)? {
                out.push(s.resized(size)?);
            }
        }
        Ok(out)
    }

    /// Best weights of `arch` for `plane`, falling back to a model trained
    /// on all planes.
    pub fn trained_model(&self, arch: Architecture, plane: Plane) -> Result<(Model<f32>, PathBuf)> {
        let own = self.model_dir(arch, plane_arg(plane)).join(BEST_FILE);
        let shared = self.model_dir(arch, PlaneArg::All).join(BEST_FILE);
        for path in [&own, &shared] {
            if path.exists() {
                let model = Model::load(path).with_context(|| format!("loading {}", path.display()))?;
                return Ok((model, path.clone()));
            }
        }
        bail!(
            "missing trained {} model for the {plane} plane: {} not found (run `vertseg train --model {} --plane {plane}` first)",
            arch.label(),
            own.display(),
            arch.label()
        )
    }
}

pub fn plane_arg(p: Plane) -> PlaneArg {
    match p {
        Plane::Sagittal => PlaneArg::Sagittal,
        Plane::Coronal => PlaneArg::Coronal,
        Plane::Axial => PlaneArg::Axial,
    }
}

/// Scale preset: the reference schedule at full scale, a short run at desk
/// scale.
pub fn train_preset(scale: Scale) -> TrainConfig {
    match scale {
        Scale::Full => TrainConfig::default(),
        Scale::Desk => TrainConfig { epochs: 10, batch_size: 4, ..TrainConfig::default() },
    }
}

/// Training config from `--config` or the scale preset, with `--seed` applied.
pub fn train_config(g: &GlobalArgs) -> Result<TrainConfig> {
    let mut cfg = match &g.config {
        Some(path) => {
            if !path.exists() {
                bail!("missing config file: {}", path.display());
            }
            TrainConfig::load(path).with_context(|| format!("reading {}", path.display()))?
        }
        None => train_preset(g.scale.into()),
    };
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

pub fn model_config(g: &GlobalArgs, seed: u64) -> ModelConfig {
    ModelConfig { init_seed: seed, ..ModelConfig::for_scale(g.scale.into()) }
}
