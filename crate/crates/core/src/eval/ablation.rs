//! Augmentation on/off comparison for both architectures.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::data::slices::{Phase, SliceSample};
use crate::data::volume::Plane;
use crate::error::{Error, Result};
use crate::eval::evaluate::{evaluate, Averaging, Evaluation};
use crate::network::{Architecture, Model, ModelConfig};
use crate::scalar::Scalar;
use crate::training::config::TrainConfig;
use crate::training::trainer::{train, TrainData, TrainHistory};

pub const ABLATION_HEADER: &str = "model,augmentation,plane,phase,precision,recall,f1,tp,fp,tn,fn,flags";
pub const BARS_HEADER: &str = "model,plane,phase,f1_aug_on,f1_aug_off,delta";
/// Full-scale improvement expected from augmentation, in percentage points.
pub const EXPECTED_GAIN_POINTS: f64 = 2.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub threshold: f64,
    pub averaging: Averaging,
}

/// Slices of every plane, split by phase.
#[derive(Clone, Debug, Default)]
pub struct AblationData<T> {
    pub train: Vec<SliceSample<T>>,
    pub valid: Vec<SliceSample<T>>,
    pub test: Vec<SliceSample<T>>,
}

impl<T: Scalar> AblationData<T> {
    fn phase(&self, phase: Phase) -> &[SliceSample<T>] {
        match phase {
            Phase::Train => &self.train,
            Phase::Valid => &self.valid,
            Phase::Test => &self.test,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub model: String,
    pub augmentation: bool,
    pub plane: Plane,
    pub phase: Phase,
    pub evaluation: Evaluation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRun {
    pub model: String,
    pub augmentation: bool,
    pub best_epoch: usize,
    pub history: TrainHistory,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationResult {
    pub rows: Vec<AblationRow>,
    pub runs: Vec<AblationRun>,
}

fn on_off(b: bool) -> &'static str {
    if b {
        "on"
    } else {
        "off"
    }
}

/// Trains baseline and plusplus with and without augmentation under the
/// same seeds and split, then scores each on valid and test per plane.
pub fn run_ablation<T: Scalar>(cfg: &AblationConfig, data: &AblationData<T>) -> Result<AblationResult> {
    if data.train.is_empty() {
        return Err(Error::EmptyDataset("ablation needs training slices".into()));
    }
    let mut planes: Vec<Plane> = data.train.iter().map(|s| s.plane).collect();
    planes.sort();
    planes.dedup();
    let train_data = TrainData { train: data.train.clone(), valid: data.valid.clone() };
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    for arch in [Architecture::Baseline, Architecture::PlusPlus] {
        for aug in [true, false] {
            log::info!("ablation run: {} augmentation {}", arch.label(), on_off(aug));
            let model = Model::<T>::new(arch, cfg.model.clone())?;
            let out = train(model, &train_data, TrainConfig { augment: aug, ..cfg.train.clone() })?;
            for &plane in &planes {
                for phase in [Phase::Valid, Phase::Test] {
                    let sel: Vec<SliceSample<T>> =
                        data.phase(phase).iter().filter(|s| s.plane == plane).cloned().collect();
                    if sel.is_empty() {
                        log::warn!("no {phase} slices for the {plane} plane; row skipped");
                        continue;
                    }
                    let evaluation = evaluate(&out.best, &sel, cfg.threshold, cfg.averaging)?;
                    rows.push(AblationRow { model: arch.label().into(), augmentation: aug, plane, phase, evaluation });
                }
            }
            runs.push(AblationRun {
                model: arch.label().into(),
                augmentation: aug,
                best_epoch: out.best_epoch,
                history: out.history,
            });
        }
    }
    Ok(AblationResult { rows, runs })
}

impl AblationResult {
    pub fn to_csv(&self) -> String {
        let mut s = format!("{ABLATION_HEADER}\n");
        for r in &self.rows {
            let (m, c) = (&r.evaluation.metrics, &r.evaluation.counts);
            writeln!(
                s,
                "{},{},{},{},{:.6},{:.6},{:.6},{},{},{},{},{}",
                r.model,
                on_off(r.augmentation),
                r.plane,
                r.phase,
                100.0 * m.precision,
                100.0 * m.recall,
                100.0 * m.f1,
                c.tp,
                c.fp,
                c.tn,
                c.fn_,
                m.flags.describe()
            )
            .unwrap();
        }
        s
    }

    fn find(&self, model: &str, aug: bool, plane: Plane, phase: Phase) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.model == model && r.augmentation == aug && r.plane == plane && r.phase == phase)
    }

    /// `(model, plane, phase, f1 on, f1 off)` for every paired row.
    pub fn pairs(&self) -> Vec<(String, Plane, Phase, f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.augmentation)
            .filter_map(|on| {
                let off = self.find(&on.model, false, on.plane, on.phase)?;
                Some((on.model.clone(), on.plane, on.phase, on.evaluation.metrics.f1, off.evaluation.metrics.f1))
            })
            .collect()
    }

    /// Mean F1 over planes for one model, augmentation setting and phase.
    pub fn mean_f1(&self, model: &str, aug: bool, phase: Phase) -> Option<f64> {
        let v: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.model == model && r.augmentation == aug && r.phase == phase)
            .map(|r| r.evaluation.metrics.f1)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn bars_csv(&self) -> String {
        let mut s = format!("{BARS_HEADER}\n");
        for (m, plane, phase, on, off) in self.pairs() {
            writeln!(s, "{m},{plane},{phase},{:.6},{:.6},{:.6}", 100.0 * on, 100.0 * off, 100.0 * (on - off)).unwrap();
        }
        s
    }

    /// Summary with per-pair deltas against the expected full-scale gain.
    pub fn to_markdown(&self) -> String {
        let mut s = String::from("| Model | Plane | Phase | F1 aug on | F1 aug off | Delta |\n|---|---|---|---|---|---|\n");
        for (m, plane, phase, on, off) in self.pairs() {
            writeln!(s, "| {m} | {plane} | {phase} | {:.2} | {:.2} | {:+.2} |", 100.0 * on, 100.0 * off, 100.0 * (on - off))
                .unwrap();
        }
        writeln!(
            s,
            "\nReference expectation at full scale: augmentation raises every metric by at least {EXPECTED_GAIN_POINTS} points. \
             Desk-scale runs only check the direction (F1 with augmentation >= without)."
        )
        .unwrap();
        s
    }

    /// Grouped bar chart of F1: one group per (model, plane, phase), dark
    /// bar with augmentation, light bar without.
    pub fn render_bars(&self) -> RgbImage {
        const BAR: u32 = 14;
        const GAP: u32 = 10;
        const HEIGHT: u32 = 200;
        const MARGIN: u32 = 10;
        let pairs = self.pairs();
        let width = 2 * MARGIN + pairs.len().max(1) as u32 * (2 * BAR + GAP);
        let mut img = RgbImage::from_pixel(width, HEIGHT + 2 * MARGIN, Rgb([255, 255, 255]));
        for y in (0..=4).map(|k| MARGIN + k * HEIGHT / 4) {
            for x in MARGIN..width - MARGIN {
                img.put_pixel(x, y, Rgb([220, 220, 220]));
            }
        }
        for (i, (model, .., on, off)) in pairs.iter().enumerate() {
            let x0 = MARGIN + i as u32 * (2 * BAR + GAP);
            let (dark, light) = if model == "baseline" {
                (Rgb([31, 119, 180]), Rgb([158, 202, 225]))
            } else {
                (Rgb([214, 39, 40]), Rgb([252, 174, 145]))
            };
            for (k, (v, colour)) in [(*on, dark), (*off, light)].into_iter().enumerate() {
                let h = (v.clamp(0.0, 1.0) * HEIGHT as f64).round() as u32;
                for x in x0 + k as u32 * BAR..x0 + (k as u32 + 1) * BAR - 1 {
                    for y in MARGIN + HEIGHT - h..MARGIN + HEIGHT {
                        img.put_pixel(x, y, colour);
                    }
                }
            }
        }
        img
    }

    /// Writes `ablation.csv`, `ablation_bars.csv`, `ablation.md`,
    /// `ablation_f1.png` and `ablation.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("ablation.csv"), self.to_csv())?;
        fs::write(dir.join("ablation_bars.csv"), self.bars_csv())?;
        fs::write(dir.join("ablation.md"), self.to_markdown())?;
        fs::write(dir.join("ablation.json"), serde_json::to_vec_pretty(self)?)?;
        self.render_bars()
            .save_with_format(dir.join("ablation_f1.png"), image::ImageFormat::Png)
            .map_err(|e| Error::Image(e.to_string()))
    }
}
