//! Side-by-side mask grids: both networks of both models next to the
//! ground truth.

use std::path::Path;

use image::GrayImage;

use crate::data::slices::SliceSample;
use crate::error::{Error, Result};
use crate::network::{Architecture, Model};
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::training::trainer::{eval_view, stack_batch};

pub const GRID_COLUMNS: usize = 5;
/// Pixels between tiles.
pub const GRID_GAP: u32 = 2;
const GAP_VALUE: u8 = 128;

/// Binary `H×W` masks of one sample: baseline mask1, baseline mask2,
/// plusplus mask1, plusplus mask2, ground truth.
pub fn qualitative_row<T: Scalar>(
    baseline: &Model<T>,
    plusplus: &Model<T>,
    sample: &SliceSample<T>,
    threshold: f64,
) -> Result<[Tensor<T>; GRID_COLUMNS]> {
    let (h, w) = (sample.mask.shape()[0], sample.mask.shape()[1]);
    let t = T::lit(threshold);
    let bin = |m: Tensor<T>| -> Result<Tensor<T>> {
        m.map(|v| if v >= t { T::one() } else { T::zero() }).reshape(&[h, w])
    };
    let view = eval_view(sample);
    let run = |model: &Model<T>| -> Result<(Tensor<T>, Tensor<T>)> {
        let (x, _) = stack_batch(std::slice::from_ref(&view), model.config().in_channels)?;
        let (a, b) = model.predict_batch(&x)?;
        Ok((bin(a)?, bin(b)?))
    };
    let (b1, b2) = run(baseline)?;
    let (p1, p2) = run(plusplus)?;
    Ok([b1, b2, p1, p2, sample.mask.clone()])
}

/// Grayscale grid, one row per sample; foreground is 255.
pub fn qualitative_grid<T: Scalar>(rows: &[[Tensor<T>; GRID_COLUMNS]]) -> Result<GrayImage> {
    let first = rows.first().ok_or_else(|| Error::EmptyDataset("qualitative export needs a sample".into()))?;
    let (h, w) = (first[0].shape()[0] as u32, first[0].shape()[1] as u32);
    let width = GRID_COLUMNS as u32 * w + (GRID_COLUMNS as u32 - 1) * GRID_GAP;
    let height = rows.len() as u32 * h + (rows.len() as u32 - 1) * GRID_GAP;
    let mut img = GrayImage::from_pixel(width, height, image::Luma([GAP_VALUE]));
    for (r, row) in rows.iter().enumerate() {
        for (c, tile) in row.iter().enumerate() {
            if tile.shape() != [h as usize, w as usize] {
                return Err(Error::Shape(format!("tile {:?} in a {h}×{w} grid", tile.shape())));
            }
            let (x0, y0) = (c as u32 * (w + GRID_GAP), r as u32 * (h + GRID_GAP));
            for y in 0..h {
                for x in 0..w {
                    let v = tile.data()[(y * w + x) as usize];
                    let px = if v != T::zero() { 255 } else { 0 };
                    img.put_pixel(x0 + x, y0 + y, image::Luma([px]));
                }
            }
        }
    }
    Ok(img)
}

/// Writes the grid for `samples` as a PNG at `path`.
pub fn export_qualitative<T: Scalar>(
    baseline: &Model<T>,
    plusplus: &Model<T>,
    samples: &[SliceSample<T>],
    threshold: f64,
    path: &Path,
) -> Result<GrayImage> {
    if baseline.architecture() != Architecture::Baseline || plusplus.architecture() != Architecture::PlusPlus {
        return Err(Error::InvalidInput("qualitative export expects (baseline, plusplus) models".into()));
    }
    let rows = samples.iter().map(|s| qualitative_row(baseline, plusplus, s, threshold)).collect::<Result<Vec<_>>>()?;
    let img = qualitative_grid(&rows)?;
    if let Some(d) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(d)?;
    }
    img.save_with_format(path, image::ImageFormat::Png).map_err(|e| Error::Image(e.to_string()))?;
    Ok(img)
}
