use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::autograd::Var;
use crate::data::augment::augment;
use crate::data::normalize::{normalize_intensity, NormalizeMode};
use crate::data::rng::{sample_rng, stream_rng};
use crate::data::slices::SliceSample;
use crate::error::{Error, Result};
use crate::eval::metrics::{confusion_counts, metrics_from_counts, ConfusionCounts};
use crate::network::Model;
use crate::nn::{ParamStore, Session};
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::training::config::TrainConfig;
use crate::training::loss::{bce_dice_loss, LossWeights};
use crate::training::optim::{Adam, AdamConfig};
use crate::training::schedule::lr_at;

pub const HISTORY_HEADER: &str = "epoch,lr,train_loss,train_f1,valid_loss,valid_f1,wall_time";

/// Slices with raw intensities; normalization and augmentation happen per
/// draw.
#[derive(Clone, Debug, Default)]
pub struct TrainData<T> {
    pub train: Vec<SliceSample<T>>,
    pub valid: Vec<SliceSample<T>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub train_f1: f64,
    /// NaN when there is no validation data.
    #[serde(with = "nan_as_null")]
    pub valid_loss: f64,
    #[serde(with = "nan_as_null")]
    pub valid_f1: f64,
    /// Seconds since the run started, carried across resumes.
    pub wall_time: f64,
}

mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_nan() {
            s.serialize_none()
        } else {
            s.serialize_some(v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
}

fn fmt_num(out: &mut String, v: f64) {
    if v.is_nan() {
        out.push_str("nan");
    } else {
        write!(out, "{v}").unwrap();
    }
}

impl TrainHistory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(HISTORY_HEADER);
        s.push('\n');
        for r in &self.records {
            write!(s, "{},", r.epoch).unwrap();
            for (i, v) in [r.lr, r.train_loss, r.train_f1, r.valid_loss, r.valid_f1, r.wall_time].into_iter().enumerate() {
                if i > 0 {
                    s.push(',');
                }
                fmt_num(&mut s, v);
            }
            s.push('\n');
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        if let Some(d) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(d)?;
        }
        fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Everything a finished run hands back.
#[derive(Clone, Debug)]
pub struct TrainOutcome<T: Scalar> {
    /// Weights after the last epoch.
    pub model: Model<T>,
    /// Weights of the epoch with the best selection score.
    pub best: Model<T>,
    pub best_epoch: usize,
    pub history: TrainHistory,
}

#[derive(Clone, Debug)]
struct Best<T> {
    epoch: usize,
    score: f64,
    store: ParamStore<T>,
}

/// Image and mask batches, `N×C×H×W` and `N×1×H×W`; the single image
/// channel is repeated `channels` times.
pub fn stack_batch<T: Scalar>(items: &[(Tensor<T>, Tensor<T>)], channels: usize) -> Result<(Tensor<T>, Tensor<T>)> {
    let (h, w) = (items[0].0.shape()[0], items[0].0.shape()[1]);
    let mut img = Vec::with_capacity(items.len() * channels * h * w);
    let mut mask = Vec::with_capacity(items.len() * h * w);
    for (i, m) in items {
        if i.shape() != [h, w] || m.shape() != [h, w] {
            return Err(Error::Shape(format!("batch mixes slice sizes {:?} and {:?}", [h, w], i.shape())));
        }
        for _ in 0..channels {
            img.extend_from_slice(i.data());
        }
        mask.extend_from_slice(m.data());
    }
    let n = items.len();
    Ok((Tensor::new(&[n, channels, h, w], img)?, Tensor::new(&[n, 1, h, w], mask)?))
}

/// One training-mode draw of a sample for `epoch`: random intensity
/// shift/scale, then augmentation when enabled, both from the sample's own
/// stream.
pub fn training_view<T: Scalar>(s: &SliceSample<T>, cfg: &TrainConfig, epoch: usize) -> (Tensor<T>, Tensor<T>) {
    let mut rng = sample_rng(cfg.seed, &s.volume_id, s.slice_index, epoch);
    let mut norm = s.clone();
    normalize_intensity(norm.image.data_mut(), NormalizeMode::Train, &cfg.normalization(), &mut rng);
    if cfg.augment {
        let (out, _) = augment(&norm, &cfg.augmentation(), &mut rng);
        (out.image, out.mask)
    } else {
        (norm.image, norm.mask)
    }
}

/// Deterministic evaluation view: fixed normalization, no augmentation.
pub fn eval_view<T: Scalar>(s: &SliceSample<T>) -> (Tensor<T>, Tensor<T>) {
    let mut img = s.image.clone();
    let mut unused = stream_rng(0, "eval");
    normalize_intensity(img.data_mut(), NormalizeMode::Eval, &Default::default(), &mut unused);
    (img, s.mask.clone())
}

/// Stateful optimisation loop over one model.
pub struct Trainer<T: Scalar> {
    model: Model<T>,
    cfg: TrainConfig,
    adam: Adam<T>,
    history: TrainHistory,
    best: Option<Best<T>>,
    next_epoch: usize,
    global_step: usize,
    elapsed_before: f64,
}

#[derive(Serialize, Deserialize)]
struct CheckpointState {
    train_config: TrainConfig,
    dtype: String,
    next_epoch: usize,
    global_step: usize,
    elapsed: f64,
    best_epoch: Option<usize>,
    best_score: Option<f64>,
    history: TrainHistory,
}

pub const STATE_FILE: &str = "state.json";
pub const MODEL_FILE: &str = "model.vsw";
pub const BEST_FILE: &str = "best.vsw";
pub const OPTIM_FILE: &str = "optimizer.bin";

impl<T: Scalar> Trainer<T> {
    pub fn new(model: Model<T>, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let adam = Adam::new(Self::adam_cfg(&cfg), model.store());
        Ok(Trainer {
            model,
            cfg,
            adam,
            history: TrainHistory::default(),
            best: None,
            next_epoch: 0,
            global_step: 0,
            elapsed_before: 0.0,
        })
    }

    fn adam_cfg(cfg: &TrainConfig) -> AdamConfig {
        AdamConfig { beta1: cfg.beta1, beta2: cfg.beta2, eps: cfg.adam_eps }
    }

    pub fn model(&self) -> &Model<T> {
        &self.model
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn history(&self) -> &TrainHistory {
        &self.history
    }

    pub fn next_epoch(&self) -> usize {
        self.next_epoch
    }

    pub fn is_finished(&self) -> bool {
        self.next_epoch >= self.cfg.epochs
    }

    fn weights(&self) -> LossWeights {
        LossWeights { bce: self.cfg.w_bce, dice: self.cfg.w_dice }
    }

    /// Loss of both heads (the first only when supervised) and the second
    /// head's probabilities.
    fn batch_loss(&self, s: &Session<'_, T>, x: &Tensor<T>, y: &Tensor<T>) -> Result<(Var<T>, Var<T>)> {
        let out = self.model.forward_graph(s, &Var::constant(x.clone()))?;
        let mut loss = bce_dice_loss(&out.mask2, y, self.weights())?;
        if self.cfg.supervise_mask1 {
            loss = loss.add(&bce_dice_loss(&out.mask1, y, self.weights())?);
        }
        Ok((loss, out.mask2))
    }

    /// One optimizer step; returns the loss value and the batch counts.
    pub fn train_step(&mut self, x: &Tensor<T>, y: &Tensor<T>, lr: f64, epoch: usize) -> Result<(f64, ConfusionCounts)> {
        let (grads, updates, loss, counts) = {
            let s = Session::train(self.model.store())
                .with_resample_rng(stream_rng(self.cfg.seed, &format!("rf-step-{}", self.global_step)));
            let (loss, mask2) = self.batch_loss(&s, x, y)?;
            let value = loss.value().data()[0].as_f64();
            if !value.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, step: self.global_step });
            }
            let counts = confusion_counts(mask2.value().data(), y.data(), self.cfg.threshold)?;
            let g = loss.backward();
            (s.gradients(&g), s.take_updates(), value, counts)
        };
        self.adam.step(self.model.store_mut(), &grads, lr)?;
        for (id, v) in updates {
            *self.model.store_mut().get_mut(id) = v;
        }
        self.global_step += 1;
        Ok((loss, counts))
    }

    /// Mean loss and pooled counts over `samples` in evaluation mode.
    pub fn evaluate(&self, samples: &[SliceSample<T>]) -> Result<(f64, ConfusionCounts)> {
        let channels = self.model.config().in_channels;
        let (mut total, mut counts) = (0.0, ConfusionCounts::default());
        for chunk in samples.chunks(self.cfg.batch_size) {
            let views: Vec<_> = chunk.iter().map(eval_view).collect();
            let (x, y) = stack_batch(&views, channels)?;
            let s = Session::eval(self.model.store());
            let (loss, mask2) = self.batch_loss(&s, &x, &y)?;
            total += loss.value().data()[0].as_f64() * chunk.len() as f64;
            counts += confusion_counts(mask2.value().data(), y.data(), self.cfg.threshold)?;
        }
        Ok((total / samples.len().max(1) as f64, counts))
    }

    pub fn run_epoch(&mut self, data: &TrainData<T>) -> Result<EpochRecord> {
        if data.train.is_empty() {
            return Err(Error::EmptyDataset("no training slices".into()));
        }
        if self.is_finished() {
            return Err(Error::InvalidInput(format!("all {} epochs are complete", self.cfg.epochs)));
        }
        let start = Instant::now();
        let epoch = self.next_epoch;
        let lr = lr_at(epoch, &self.cfg)?;
        let mut order: Vec<usize> = (0..data.train.len()).collect();
        order.shuffle(&mut stream_rng(self.cfg.seed, &format!("order-epoch-{epoch}")));
        let channels = self.model.config().in_channels;
        let (mut total, mut counts) = (0.0, ConfusionCounts::default());
        for batch in order.chunks(self.cfg.batch_size) {
            let views: Vec<_> = batch.iter().map(|&i| training_view(&data.train[i], &self.cfg, epoch)).collect();
            let (x, y) = stack_batch(&views, channels)?;
            let (loss, c) = self.train_step(&x, &y, lr, epoch)?;
            total += loss * batch.len() as f64;
            counts += c;
        }
        let train_loss = total / data.train.len() as f64;
        let train_f1 = metrics_from_counts(&counts).f1;
        let (valid_loss, valid_f1) = if data.valid.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            let (l, c) = self.evaluate(&data.valid)?;
            (l, metrics_from_counts(&c).f1)
        };
        self.elapsed_before += start.elapsed().as_secs_f64();
        let rec = EpochRecord { epoch, lr, train_loss, train_f1, valid_loss, valid_f1, wall_time: self.elapsed_before };
        let score = if valid_f1.is_nan() { train_f1 } else { valid_f1 };
        if self.best.as_ref().is_none_or(|b| score > b.score) {
            self.best = Some(Best { epoch, score, store: self.model.store().clone() });
        }
        log::info!(
            "epoch {epoch}: lr {lr:.3e} train loss {train_loss:.4} f1 {train_f1:.4} valid loss {valid_loss:.4} f1 {valid_f1:.4}"
        );
        self.history.records.push(rec);
        self.next_epoch += 1;
        Ok(rec)
    }

    /// Runs epochs until `end` (exclusive, capped at the configured count).
    pub fn run_until(&mut self, data: &TrainData<T>, end: usize) -> Result<()> {
        if data.train.is_empty() {
            return Err(Error::EmptyDataset("no training slices".into()));
        }
        while self.next_epoch < end.min(self.cfg.epochs) {
            self.run_epoch(data)?;
        }
        Ok(())
    }

    pub fn run(&mut self, data: &TrainData<T>) -> Result<()> {
        self.run_until(data, self.cfg.epochs)
    }

    pub fn best_model(&self) -> Model<T> {
        let mut m = self.model.clone();
        if let Some(b) = &self.best {
            *m.store_mut() = b.store.clone();
        }
        m
    }

    pub fn best_epoch(&self) -> Option<usize> {
        self.best.as_ref().map(|b| b.epoch)
    }

    pub fn finish(self) -> TrainOutcome<T> {
        let best = self.best_model();
        TrainOutcome {
            best_epoch: self.best_epoch().unwrap_or(0),
            model: self.model,
            best,
            history: self.history,
        }
    }

    /// Writes weights, best weights, optimizer moments and loop state into `dir`.
    pub fn save_checkpoint(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        self.model.save_weights(&dir.join(MODEL_FILE))?;
        self.best_model().save_weights(&dir.join(BEST_FILE))?;
        fs::write(dir.join(OPTIM_FILE), self.adam.to_bytes())?;
        let state = CheckpointState {
            train_config: self.cfg.clone(),
            dtype: T::DTYPE.to_string(),
            next_epoch: self.next_epoch,
            global_step: self.global_step,
            elapsed: self.elapsed_before,
            best_epoch: self.best.as_ref().map(|b| b.epoch),
            best_score: self.best.as_ref().map(|b| b.score),
            history: self.history.clone(),
        };
        fs::write(dir.join(STATE_FILE), serde_json::to_vec_pretty(&state)?)?;
        Ok(())
    }

    /// Restores a run saved by [`Trainer::save_checkpoint`]. `cfg` must agree
    /// with the saved config on every schedule-relevant field.
    pub fn resume(dir: &Path, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let state_path = dir.join(STATE_FILE);
        if !state_path.exists() {
            return Err(Error::MissingFile(state_path));
        }
        let state: CheckpointState = serde_json::from_slice(&fs::read(&state_path)?)
            .map_err(|e| Error::Checkpoint(format!("{}: {e}", state_path.display())))?;
        if state.dtype != T::DTYPE {
            return Err(Error::Checkpoint(format!("checkpoint holds {} weights, expected {}", state.dtype, T::DTYPE)));
        }
        let diff = state.train_config.schedule_diff(&cfg);
        if !diff.is_empty() {
            return Err(Error::Checkpoint(format!(
                "schedule fields differ from the checkpoint: {}",
                diff.join(", ")
            )));
        }
        if state.history.len() != state.next_epoch {
            return Err(Error::Checkpoint("history length disagrees with the next epoch".into()));
        }
        let model = Model::load(&dir.join(MODEL_FILE))?;
        let optim_path = dir.join(OPTIM_FILE);
        if !optim_path.exists() {
            return Err(Error::MissingFile(optim_path));
        }
        let adam = Adam::from_bytes(Self::adam_cfg(&cfg), model.store(), &fs::read(optim_path)?)?;
        let best = match (state.best_epoch, state.best_score) {
            (Some(epoch), Some(score)) => {
                let best = Model::<T>::load(&dir.join(BEST_FILE))?;
                Some(Best { epoch, score, store: best.store().clone() })
            }
            _ => None,
        };
        Ok(Trainer {
            model,
            cfg,
            adam,
            history: state.history,
            best,
            next_epoch: state.next_epoch,
            global_step: state.global_step,
            elapsed_before: state.elapsed,
        })
    }
}

/// Trains `model` for `cfg.epochs` epochs.
pub fn train<T: Scalar>(model: Model<T>, data: &TrainData<T>, cfg: TrainConfig) -> Result<TrainOutcome<T>> {
    let mut t = Trainer::new(model, cfg)?;
    t.run(data)?;
    Ok(t.finish())
}
