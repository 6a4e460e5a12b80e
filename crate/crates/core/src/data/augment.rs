use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::slices::{binarize, SliceSample};
use crate::ops::{resize_bilinear_plane, resize_nearest_plane};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const ROTATION_DEG: f64 = 15.0;
pub const SHEAR_DEG: f64 = 10.0;
pub const ZOOM_RANGE: (f64, f64) = (0.85, 1.15);
/// Fraction of the extent.
pub const SHIFT_FRACTION: f64 = 0.1;
pub const CONTRAST_RANGE: (f64, f64) = (0.8, 1.2);
pub const BRIGHTNESS_DELTA: f64 = 0.1;
/// Smallest area fraction a crop may keep.
pub const MIN_CROP_AREA: f64 = 0.8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentationConfig {
    /// Probability of drawing from the first (flip/crop/photometric) set.
    pub p_set1: f64,
    /// Independent probability of each op inside the chosen set.
    pub op_prob: f64,
    pub seed: u64,
}

impl Default for AugmentationConfig {
    fn default() -> Self {
        AugmentationConfig { p_set1: 0.6, op_prob: 0.5, seed: 0 }
    }
}

impl AugmentationConfig {
    pub fn validate(&self) -> crate::Result<()> {
        for (name, p) in [("p_set1", self.p_set1), ("op_prob", self.op_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(crate::Error::Config(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AugSet {
    First,
    Second,
}

/// Affine parameters of the second set; `None` means the op did not fire.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AffineParams {
    pub rotation_deg: Option<f64>,
    pub shear_deg: Option<f64>,
    pub zoom: Option<f64>,
    /// `(rows, cols)` as fractions of the extent.
    pub shift: Option<(f64, f64)>,
}

impl AffineParams {
    pub fn is_identity(&self) -> bool {
        *self == AffineParams::default()
    }

    /// Forward linear part `R · Sh · Z` acting on `(row, col)`.
    fn matrix(&self) -> [[f64; 2]; 2] {
        let t = self.rotation_deg.unwrap_or(0.0).to_radians();
        let sh = self.shear_deg.unwrap_or(0.0).to_radians().tan();
        let z = self.zoom.unwrap_or(1.0);
        let (c, s) = (t.cos(), t.sin());
        let rot = [[c, -s], [s, c]];
        let shear = [[1.0, 0.0], [sh, 1.0]];
        let m = mul2(rot, shear);
        [[m[0][0] * z, m[0][1] * z], [m[1][0] * z, m[1][1] * z]]
    }
}

fn mul2(a: [[f64; 2]; 2], b: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let mut m = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            m[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    m
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum AugOp {
    FlipLr,
    FlipUd,
    /// Side fraction of a centred crop.
    CentralCrop { fraction: f64 },
    /// Crop window as fractions of the extent.
    RandomCrop { top: f64, left: f64, height: f64, width: f64 },
    Contrast { factor: f64 },
    Brightness { delta: f64 },
    Transpose,
    Affine(AffineParams),
}

impl AugOp {
    pub fn is_geometric(&self) -> bool {
        !matches!(self, AugOp::Contrast { .. } | AugOp::Brightness { .. })
    }
}

/// Everything drawn for one sample, sufficient to replay it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentRecord {
    pub set: AugSet,
    pub ops: Vec<AugOp>,
}

fn crop_side<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.gen_range(MIN_CROP_AREA.sqrt()..=1.0)
}

/// Draws the set and the firing ops with their parameters.
pub fn draw_record<R: Rng + ?Sized>(cfg: &AugmentationConfig, rng: &mut R) -> AugmentRecord {
    let set = if rng.gen_bool(cfg.p_set1.clamp(0.0, 1.0)) { AugSet::First } else { AugSet::Second };
    let p = cfg.op_prob.clamp(0.0, 1.0);
    let mut ops = Vec::new();
    match set {
        AugSet::First => {
            if rng.gen_bool(p) {
                ops.push(AugOp::FlipLr);
            }
            if rng.gen_bool(p) {
                ops.push(AugOp::FlipUd);
            }
            if rng.gen_bool(p) {
                ops.push(AugOp::CentralCrop { fraction: crop_side(rng) });
            }
            if rng.gen_bool(p) {
                let (height, width) = (crop_side(rng), crop_side(rng));
                let top = rng.gen_range(0.0..=1.0 - height);
                let left = rng.gen_range(0.0..=1.0 - width);
                ops.push(AugOp::RandomCrop { top, left, height, width });
            }
            if rng.gen_bool(p) {
                ops.push(AugOp::Contrast { factor: rng.gen_range(CONTRAST_RANGE.0..=CONTRAST_RANGE.1) });
            }
            if rng.gen_bool(p) {
                ops.push(AugOp::Brightness { delta: rng.gen_range(-BRIGHTNESS_DELTA..=BRIGHTNESS_DELTA) });
            }
            if rng.gen_bool(p) {
                ops.push(AugOp::Transpose);
            }
        }
        AugSet::Second => {
            let mut a = AffineParams::default();
            if rng.gen_bool(p) {
                a.rotation_deg = Some(rng.gen_range(-ROTATION_DEG..=ROTATION_DEG));
            }
            if rng.gen_bool(p) {
                a.shear_deg = Some(rng.gen_range(-SHEAR_DEG..=SHEAR_DEG));
            }
            if rng.gen_bool(p) {
                a.zoom = Some(rng.gen_range(ZOOM_RANGE.0..=ZOOM_RANGE.1));
            }
            if rng.gen_bool(p) {
                a.shift = Some((
                    rng.gen_range(-SHIFT_FRACTION..=SHIFT_FRACTION),
                    rng.gen_range(-SHIFT_FRACTION..=SHIFT_FRACTION),
                ));
            }
            if !a.is_identity() {
                ops.push(AugOp::Affine(a));
            }
        }
    }
    AugmentRecord { set, ops }
}

#[derive(Clone, Copy)]
enum Interp {
    Linear,
    Nearest,
}

/// Row-major `h×w` plane.
#[derive(Clone)]
struct Plane2<T> {
    data: Vec<T>,
    h: usize,
    w: usize,
}

impl<T: Scalar> Plane2<T> {
    fn flip_lr(self) -> Self {
        let mut data = self.data;
        for row in data.chunks_mut(self.w) {
            row.reverse();
        }
        Plane2 { data, ..self }
    }

    fn flip_ud(self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for row in self.data.chunks(self.w).rev() {
            data.extend_from_slice(row);
        }
        Plane2 { data, ..self }
    }

    fn transpose(self) -> Self {
        let (h, w) = (self.h, self.w);
        let data = (0..w * h).map(|i| self.data[(i % h) * w + i / h]).collect();
        Plane2 { data, h: w, w: h }
    }

    fn resize(self, oh: usize, ow: usize, interp: Interp) -> Self {
        if (oh, ow) == (self.h, self.w) {
            return self;
        }
        let data = match interp {
            Interp::Linear => resize_bilinear_plane(&self.data, self.h, self.w, oh, ow),
            Interp::Nearest => resize_nearest_plane(&self.data, self.h, self.w, oh, ow),
        };
        Plane2 { data, h: oh, w: ow }
    }

    /// Keeps the window and resizes it back to the current size.
    fn crop(self, top: f64, left: f64, height: f64, width: f64, interp: Interp) -> Self {
        let (h, w) = (self.h, self.w);
        let ch = ((h as f64 * height).round() as usize).clamp(1, h);
        let cw = ((w as f64 * width).round() as usize).clamp(1, w);
        let r0 = ((h as f64 * top).round() as usize).min(h - ch);
        let c0 = ((w as f64 * left).round() as usize).min(w - cw);
        let mut data = Vec::with_capacity(ch * cw);
        for r in r0..r0 + ch {
            data.extend_from_slice(&self.data[r * w + c0..r * w + c0 + cw]);
        }
        Plane2 { data, h: ch, w: cw }.resize(h, w, interp)
    }

    /// Inverse-mapped affine about the centre with edge clamping.
    fn affine(self, a: &AffineParams, interp: Interp) -> Self {
        let (h, w) = (self.h, self.w);
        let m = a.matrix();
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let inv = [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]];
        let (sr, sc) = a.shift.unwrap_or((0.0, 0.0));
        let (tr, tc) = (sr * h as f64, sc * w as f64);
        let (cr, cc) = ((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0);
        let at = |r: isize, c: isize| -> T {
            let r = r.clamp(0, h as isize - 1) as usize;
            let c = c.clamp(0, w as isize - 1) as usize;
            self.data[r * w + c]
        };
        let mut data = Vec::with_capacity(h * w);
        for r in 0..h {
            for c in 0..w {
                let (dr, dc) = (r as f64 - cr - tr, c as f64 - cc - tc);
                let yr = inv[0][0] * dr + inv[0][1] * dc + cr;
                let yc = inv[1][0] * dr + inv[1][1] * dc + cc;
                data.push(match interp {
                    Interp::Nearest => at(yr.round() as isize, yc.round() as isize),
                    Interp::Linear => {
                        let (r0, c0) = (yr.floor(), yc.floor());
                        let (fr, fc) = (T::lit(yr - r0), T::lit(yc - c0));
                        let (r0, c0) = (r0 as isize, c0 as isize);
                        let top = at(r0, c0) + (at(r0, c0 + 1) - at(r0, c0)) * fc;
                        let bot = at(r0 + 1, c0) + (at(r0 + 1, c0 + 1) - at(r0 + 1, c0)) * fc;
                        top + (bot - top) * fr
                    }
                });
            }
        }
        Plane2 { data, h, w }
    }

    fn geometric(self, op: &AugOp, interp: Interp) -> Self {
        match *op {
            AugOp::FlipLr => self.flip_lr(),
            AugOp::FlipUd => self.flip_ud(),
            AugOp::Transpose => self.transpose(),
            AugOp::CentralCrop { fraction } => {
                let off = (1.0 - fraction) / 2.0;
                self.crop(off, off, fraction, fraction, interp)
            }
            AugOp::RandomCrop { top, left, height, width } => self.crop(top, left, height, width, interp),
            AugOp::Affine(ref a) => self.affine(a, interp),
            AugOp::Contrast { .. } | AugOp::Brightness { .. } => self,
        }
    }
}

fn photometric<T: Scalar>(img: &mut [T], op: &AugOp) {
    match *op {
        AugOp::Contrast { factor } => {
            let n = T::lit(img.len().max(1) as f64);
            let mean = img.iter().fold(T::zero(), |a, &b| a + b) / n;
            let f = T::lit(factor);
            for v in img.iter_mut() {
                *v = (*v - mean) * f + mean;
            }
        }
        AugOp::Brightness { delta } => {
            let d = T::lit(delta);
            for v in img.iter_mut() {
                *v = *v + d;
            }
        }
        _ => {}
    }
}

/// Applies the geometric part of `record` to a mask; binary in, binary out.
pub fn replay_on_mask<T: Scalar>(mask: &Tensor<T>, record: &AugmentRecord) -> Tensor<T> {
    let (h, w) = (mask.shape()[0], mask.shape()[1]);
    let mut p = Plane2 { data: mask.data().to_vec(), h, w };
    for op in record.ops.iter().filter(|o| o.is_geometric()) {
        p = p.geometric(op, Interp::Nearest);
    }
    let p = p.resize(h, w, Interp::Nearest);
    Tensor::new(&[h, w], p.data.into_iter().map(binarize).collect()).expect("mask plane")
}

/// Applies `record` to an image/mask pair. Output keeps the input size,
/// the image is clipped to [-1, 1] and the mask re-binarized.
pub fn apply_record<T: Scalar>(sample: &SliceSample<T>, record: &AugmentRecord) -> SliceSample<T> {
    let (h, w) = (sample.image.shape()[0], sample.image.shape()[1]);
    let mut img = Plane2 { data: sample.image.data().to_vec(), h, w };
    for op in &record.ops {
        if op.is_geometric() {
            img = img.geometric(op, Interp::Linear);
        } else {
            photometric(&mut img.data, op);
        }
    }
    let img = img.resize(h, w, Interp::Linear);
    let (lo, hi) = (-T::one(), T::one());
    let image = Tensor::new(&[h, w], img.data.into_iter().map(|v| v.max(lo).min(hi)).collect()).expect("image plane");
    SliceSample { image, mask: replay_on_mask(&sample.mask, record), ..sample.clone() }
}

/// Draws and applies one augmentation.
pub fn augment<T: Scalar, R: Rng + ?Sized>(
    sample: &SliceSample<T>,
    cfg: &AugmentationConfig,
    rng: &mut R,
) -> (SliceSample<T>, AugmentRecord) {
    let record = draw_record(cfg, rng);
    (apply_record(sample, &record), record)
}
