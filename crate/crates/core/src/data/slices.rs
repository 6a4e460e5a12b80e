use serde::{Deserialize, Serialize};

use crate::data::volume::{Plane, Volume};
use crate::error::{Error, Result};
use crate::ops::{resize_bilinear_plane, resize_nearest_plane};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Train,
    Valid,
    Test,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::Train, Phase::Valid, Phase::Test];

    pub fn name(self) -> &'static str {
        match self {
            Phase::Train => "train",
            Phase::Valid => "valid",
            Phase::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == s)
    }
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One 2D image/mask pair cut from a volume.
#[derive(Clone, Debug, PartialEq)]
pub struct SliceSample<T> {
    /// `H×W` intensities.
    pub image: Tensor<T>,
    /// `H×W`, entries 0 or 1.
    pub mask: Tensor<T>,
    pub plane: Plane,
    pub volume_id: String,
    pub slice_index: usize,
    pub phase: Phase,
}

impl<T: Scalar> SliceSample<T> {
    /// The same sample at `(h, w)`: bilinear image, nearest-neighbour mask.
    pub fn resized(&self, (h, w): (usize, usize)) -> Result<Self> {
        let (sh, sw) = (self.image.shape()[0], self.image.shape()[1]);
        if (sh, sw) == (h, w) {
            return Ok(self.clone());
        }
        Ok(SliceSample {
            image: Tensor::new(&[h, w], resize_bilinear_plane(self.image.data(), sh, sw, h, w))?,
            mask: Tensor::new(&[h, w], resize_nearest_plane(self.mask.data(), sh, sw, h, w))?,
            ..self.clone()
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SliceOptions {
    /// Output `(H, W)`; `None` keeps the native slice size.
    pub size: Option<(usize, usize)>,
    /// Keep slices whose mask is entirely background.
    pub keep_empty: bool,
}

impl Default for SliceOptions {
    fn default() -> Self {
        SliceOptions { size: Some((256, 256)), keep_empty: false }
    }
}

/// In-plane array axes for slices normal to `normal`, in increasing order.
fn in_plane_axes(normal: usize) -> (usize, usize) {
    match normal {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}

fn cut<T: Scalar>(v: &Volume<T>, normal: usize, index: usize) -> (Vec<T>, usize, usize) {
    let dims = v.dims();
    let (ra, ca) = in_plane_axes(normal);
    let (h, w) = (dims[ra], dims[ca]);
    let mut out = Vec::with_capacity(h * w);
    let mut idx = [0usize; 3];
    idx[normal] = index;
    for r in 0..h {
        idx[ra] = r;
        for c in 0..w {
            idx[ca] = c;
            out.push(v.at(idx[0], idx[1], idx[2]));
        }
    }
    (out, h, w)
}

/// Any nonzero label becomes foreground.
pub fn binarize<T: Scalar>(x: T) -> T {
    if x != T::zero() {
        T::one()
    } else {
        T::zero()
    }
}

/// One sample per index along the plane's normal axis.
pub fn extract_slices<T: Scalar>(
    image: &Volume<T>,
    mask: &Volume<T>,
    plane: Plane,
    volume_id: &str,
    phase: Phase,
    opts: &SliceOptions,
) -> Result<Vec<SliceSample<T>>> {
    if !image.same_grid(mask) {
        return Err(Error::Shape(format!(
            "image {:?} and mask {:?} volumes do not share a grid",
            image.dims(),
            mask.dims()
        )));
    }
    let normal = image.axis_of(plane);
    let mut out = Vec::new();
    for index in 0..image.dims()[normal] {
        let (m, h, w) = cut(mask, normal, index);
        let m: Vec<T> = m.into_iter().map(binarize).collect();
        if !opts.keep_empty && m.iter().all(|&v| v == T::zero()) {
            continue;
        }
        let (img, _, _) = cut(image, normal, index);
        let (oh, ow) = opts.size.unwrap_or((h, w));
        let img = resize_bilinear_plane(&img, h, w, oh, ow);
        let m = resize_nearest_plane(&m, h, w, oh, ow);
        out.push(SliceSample {
            image: Tensor::new(&[oh, ow], img)?,
            mask: Tensor::new(&[oh, ow], m)?,
            plane,
            volume_id: volume_id.to_string(),
            slice_index: index,
            phase,
        });
    }
    Ok(out)
}

/// Inverse of native-size extraction with `keep_empty`: rebuilds the volume
/// grid from slices ordered by index.
pub fn stack_slices<T: Scalar>(slices: &[Tensor<T>], dims: [usize; 3], normal: usize) -> Result<Tensor<T>> {
    if slices.len() != dims[normal] {
        return Err(Error::Shape(format!("{} slices for an axis of {}", slices.len(), dims[normal])));
    }
    let (ra, ca) = in_plane_axes(normal);
    let mut out = Tensor::zeros(&dims);
    for (index, s) in slices.iter().enumerate() {
        if s.shape() != [dims[ra], dims[ca]] {
            return Err(Error::Shape(format!("slice {index} has shape {:?}", s.shape())));
        }
        let mut idx = [0usize; 3];
        idx[normal] = index;
        for r in 0..dims[ra] {
            idx[ra] = r;
            for c in 0..dims[ca] {
                idx[ca] = c;
                out.set(&idx, s.data()[r * dims[ca] + c]);
            }
        }
    }
    Ok(out)
}
