//! Volume files: NIfTI-1 (`.nii`, `.nii.gz`) and a small raw format (`.vol`).

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::{Array3, ShapeBuilder};
use nifti::writer::WriterOptions;
use nifti::{IntoNdArray, NiftiHeader, NiftiObject, ReaderOptions};

use crate::data::volume::{Plane, Volume};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

const RAW_MAGIC: &[u8; 8] = b"VSEGVOL1";
/// Off-axis components below this fraction of a column's length count as zero.
const AXIS_TOLERANCE: f64 = 1e-4;

pub fn load_volume<T: Scalar>(path: &Path) -> Result<Volume<T>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let name = path.to_string_lossy();
    if name.ends_with(".nii") || name.ends_with(".nii.gz") {
        load_nifti(path)
    } else if name.ends_with(".vol") {
        load_raw(path)
    } else {
        Err(Error::InvalidInput(format!("unsupported volume format: {}", path.display())))
    }
}

pub fn save_volume<T: Scalar>(volume: &Volume<T>, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let name = path.to_string_lossy();
    if name.ends_with(".nii") || name.ends_with(".nii.gz") {
        save_nifti(volume, path)
    } else if name.ends_with(".vol") {
        save_raw(volume, path)
    } else {
        Err(Error::InvalidInput(format!("unsupported volume format: {}", path.display())))
    }
}

/// Voxel-to-world columns of the header affine, one per array axis.
fn affine_columns(h: &NiftiHeader) -> Result<[[f64; 3]; 3]> {
    let p = |i: usize| h.pixdim[i] as f64;
    if h.sform_code > 0 {
        let rows = [h.srow_x, h.srow_y, h.srow_z];
        return Ok([0, 1, 2].map(|j| [0, 1, 2].map(|i| rows[i][j] as f64)));
    }
    if p(1) <= 0.0 || p(2) <= 0.0 || p(3) <= 0.0 {
        return Err(Error::InvalidInput(format!("voxel spacing must be positive, got {:?}", &h.pixdim[1..4])));
    }
    if h.qform_code > 0 {
        let (b, c, d) = (h.quatern_b as f64, h.quatern_c as f64, h.quatern_d as f64);
        let a = (1.0 - (b * b + c * c + d * d)).max(0.0).sqrt();
        let r = [
            [a * a + b * b - c * c - d * d, 2.0 * (b * c - a * d), 2.0 * (b * d + a * c)],
            [2.0 * (b * c + a * d), a * a + c * c - b * b - d * d, 2.0 * (c * d - a * b)],
            [2.0 * (b * d - a * c), 2.0 * (c * d + a * b), a * a + d * d - c * c - b * b],
        ];
        let qfac = if p(0) < 0.0 { -1.0 } else { 1.0 };
        let scale = [p(1), p(2), qfac * p(3)];
        return Ok([0, 1, 2].map(|j| [0, 1, 2].map(|i| r[i][j] * scale[j])));
    }
    Ok([[p(1), 0.0, 0.0], [0.0, p(2), 0.0], [0.0, 0.0, p(3)]])
}

/// Reduces an affine to spacing plus an axis permutation, rejecting
/// anything that is not axis-aligned.
pub fn orientation_from_columns(cols: [[f64; 3]; 3]) -> Result<([f64; 3], [Plane; 3])> {
    let mut spacing = [0.0; 3];
    let mut axes = [Plane::Sagittal; 3];
    let mut used = [false; 3];
    for (j, col) in cols.iter().enumerate() {
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::InvalidInput(format!("voxel spacing must be positive along array axis {j}")));
        }
        let w = (0..3).max_by(|&a, &b| col[a].abs().total_cmp(&col[b].abs())).unwrap();
        if (0..3).any(|i| i != w && col[i].abs() > AXIS_TOLERANCE * norm) {
            return Err(Error::Orientation(format!(
                "oblique affine: array axis {j} direction {col:?} is not aligned with a world axis"
            )));
        }
        if used[w] {
            return Err(Error::Orientation(format!("affine maps two array axes onto world axis {w}")));
        }
        used[w] = true;
        spacing[j] = norm;
        axes[j] = Plane::from_world_axis(w).unwrap();
    }
    Ok((spacing, axes))
}

fn load_nifti<T: Scalar>(path: &Path) -> Result<Volume<T>> {
    let obj = ReaderOptions::new().read_file(path).map_err(|e| Error::Nifti(format!("{}: {e}", path.display())))?;
    let header = obj.header().clone();
    let (spacing, axes) = orientation_from_columns(affine_columns(&header)?)?;
    let arr = obj
        .into_volume()
        .into_ndarray::<f32>()
        .map_err(|e| Error::Nifti(format!("{}: {e}", path.display())))?;
    let shape = arr.shape().to_vec();
    if shape.len() < 3 || shape[3..].iter().any(|&d| d != 1) {
        return Err(Error::Shape(format!("expected a 3D volume, got dims {shape:?}")));
    }
    let data: Vec<T> = arr
        .as_standard_layout()
        .iter()
        .map(|&v| T::lit(v as f64))
        .collect();
    Volume::new(Tensor::new(&shape[..3], data)?, spacing, axes)
}

fn save_nifti<T: Scalar>(volume: &Volume<T>, path: &Path) -> Result<()> {
    let [n0, n1, n2] = volume.dims();
    let spacing = volume.spacing();
    let mut header = NiftiHeader { sform_code: 1, qform_code: 0, xyzt_units: 2, ..NiftiHeader::default() };
    header.pixdim = [1.0, spacing[0] as f32, spacing[1] as f32, spacing[2] as f32, 1.0, 1.0, 1.0, 1.0];
    let mut rows = [[0f32; 4]; 3];
    for (j, plane) in volume.axes().iter().enumerate() {
        rows[plane.world_axis()][j] = spacing[j] as f32;
    }
    header.srow_x = rows[0];
    header.srow_y = rows[1];
    header.srow_z = rows[2];
    let data: Vec<f32> = volume.data().data().iter().map(|v| v.as_f64() as f32).collect();
    let arr = Array3::from_shape_vec((n0, n1, n2).strides((n1 * n2, n2, 1)), data)
        .map_err(|e| Error::Shape(e.to_string()))?;
    WriterOptions::new(path)
        .reference_header(&header)
        .compress(path.to_string_lossy().ends_with(".gz"))
        .write_nifti(&arr)
        .map_err(|e| Error::Nifti(format!("{}: {e}", path.display())))
}

fn save_raw<T: Scalar>(volume: &Volume<T>, path: &Path) -> Result<()> {
    let mut out = Vec::with_capacity(64 + volume.data().numel() * 4);
    out.extend_from_slice(RAW_MAGIC);
    for d in volume.dims() {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for s in volume.spacing() {
        out.extend_from_slice(&s.to_le_bytes());
    }
    out.extend(volume.axes().iter().map(|p| p.world_axis() as u8));
    for &v in volume.data().data() {
        (v.as_f64() as f32).write_le(&mut out);
    }
    fs::File::create(path)?.write_all(&out)?;
    Ok(())
}

fn load_raw<T: Scalar>(path: &Path) -> Result<Volume<T>> {
    let bytes = fs::read(path)?;
    let bad = || Error::InvalidInput(format!("{}: not a raw volume file", path.display()));
    if bytes.len() < 8 + 24 + 24 + 3 || &bytes[..8] != RAW_MAGIC {
        return Err(bad());
    }
    let u = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap()) as usize;
    let f = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let dims = [u(8), u(16), u(24)];
    let spacing = [f(32), f(40), f(48)];
    let mut axes = [Plane::Sagittal; 3];
    for (j, a) in axes.iter_mut().enumerate() {
        *a = Plane::from_world_axis(bytes[56 + j] as usize).ok_or_else(bad)?;
    }
    let n: usize = dims.iter().product();
    let body = bytes.get(59..59 + 4 * n).ok_or_else(bad)?;
    let data = body.chunks_exact(4).map(|c| T::lit(f32::read_le(c) as f64)).collect();
    Volume::new(Tensor::new(&dims, data)?, spacing, axes)
}
