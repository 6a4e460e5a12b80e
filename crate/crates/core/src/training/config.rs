use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::augment::AugmentationConfig;
use crate::data::normalize::NormalizeConfig;
use crate::error::{Error, Result};

/// Training hyperparameters; serialized as a flat TOML table.
///
/// ```toml
/// epochs = 160
/// batch_size = 8
/// lr_start = 1e-5
/// lr_peak = 4.8e-4
/// lr_final = 1.52e-4
/// warmup_fraction = 0.1
/// beta1 = 0.9
/// beta2 = 0.999
/// adam_eps = 1e-8
/// w_bce = 1.0
/// w_dice = 1.0
/// seed = 0
/// supervise_mask1 = true
/// augment = true
/// p_set1 = 0.6
/// op_prob = 0.5
/// literal_scale_range = false
/// threshold = 0.5
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_start: f64,
    pub lr_peak: f64,
    pub lr_final: f64,
    pub warmup_fraction: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub w_bce: f64,
    pub w_dice: f64,
    pub seed: u64,
    /// Adds an equal-weight loss term on the first network's mask.
    pub supervise_mask1: bool,
    pub augment: bool,
    pub p_set1: f64,
    pub op_prob: f64,
    pub literal_scale_range: bool,
    /// Binarization threshold for the recorded F1.
    pub threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 160,
            batch_size: 8,
            lr_start: 1e-5,
            lr_peak: 4.8e-4,
            lr_final: 1.52e-4,
            warmup_fraction: 0.1,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            w_bce: 1.0,
            w_dice: 1.0,
            seed: 0,
            supervise_mask1: true,
            augment: true,
            p_set1: 0.6,
            op_prob: 0.5,
            literal_scale_range: false,
            threshold: 0.5,
        }
    }
}

/// Fields whose change would alter the schedule or the random streams of a
/// resumed run.
const SCHEDULE_FIELDS: &[&str] =
    &["epochs", "batch_size", "lr_start", "lr_peak", "lr_final", "warmup_fraction", "seed"];

impl TrainConfig {
    /// Epoch at which the warmup reaches the peak rate.
    pub fn warmup_end(&self) -> usize {
        (self.warmup_fraction * self.epochs as f64).ceil() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if ![self.lr_start, self.lr_peak, self.lr_final].iter().all(|v| v.is_finite() && *v > 0.0) {
            return bad("learning rates must be positive".into());
        }
        if !(self.lr_start < self.lr_peak && self.lr_final < self.lr_peak) {
            return bad(format!(
                "lr_peak ({}) must exceed lr_start ({}) and lr_final ({})",
                self.lr_peak, self.lr_start, self.lr_final
            ));
        }
        if !(self.warmup_fraction > 0.0 && self.warmup_fraction < 1.0) {
            return bad(format!("warmup_fraction must lie in (0, 1), got {}", self.warmup_fraction));
        }
        // Warmup end, decay and final anchor need distinct epochs.
        if self.epochs < 3 || self.warmup_end() + 1 > self.epochs - 1 {
            return bad(format!(
                "{} epochs leave no decay phase after warmup ending at epoch {}",
                self.epochs,
                self.warmup_end()
            ));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.adam_eps <= 0.0 {
            return bad("adam betas must lie in [0, 1) and eps must be positive".into());
        }
        if self.w_bce < 0.0 || self.w_dice < 0.0 {
            return bad("loss weights must be non-negative".into());
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad(format!("threshold must lie in (0, 1), got {}", self.threshold));
        }
        self.augmentation().validate()
    }

    pub fn augmentation(&self) -> AugmentationConfig {
        AugmentationConfig { p_set1: self.p_set1, op_prob: self.op_prob, seed: self.seed }
    }

    pub fn normalization(&self) -> NormalizeConfig {
        NormalizeConfig { literal_scale_range: self.literal_scale_range }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config serializes")
    }

    /// Names of schedule-relevant fields that differ from `other`.
    pub fn schedule_diff(&self, other: &Self) -> Vec<String> {
        let (a, b) = (serde_json::to_value(self).unwrap(), serde_json::to_value(other).unwrap());
        SCHEDULE_FIELDS.iter().filter(|f| a[**f] != b[**f]).map(|f| f.to_string()).collect()
    }
}
