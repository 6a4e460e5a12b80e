use crate::data::volume::Volume;
use crate::error::Result;
use crate::ops::nearest_index;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Interpolation {
    /// Trilinear, for intensities.
    Linear,
    /// Nearest neighbour, for label masks.
    Nearest,
}

/// Extent of an axis of `n` voxels at `spacing` mm on a 1 mm grid.
pub fn unit_extent(n: usize, spacing: f64) -> usize {
    ((n as f64 * spacing).round() as usize).max(1)
}

/// Resamples one axis of a row-major 3D array from `dims[axis]` to `out`.
fn resample_axis<T: Scalar>(data: &[T], dims: [usize; 3], axis: usize, out: usize, interp: Interpolation) -> Vec<T> {
    let n = dims[axis];
    let outer: usize = dims[..axis].iter().product();
    let inner: usize = dims[axis + 1..].iter().product();
    let taps: Vec<(usize, usize, T, T)> = (0..out)
        .map(|o| match interp {
            Interpolation::Nearest => {
                let i = nearest_index(o, n, out);
                (i, i, T::one(), T::zero())
            }
            Interpolation::Linear => {
                let src = ((o as f64 + 0.5) * n as f64 / out as f64 - 0.5).clamp(0.0, (n - 1) as f64);
                let i0 = src.floor() as usize;
                let f = src - i0 as f64;
                (i0, (i0 + 1).min(n - 1), T::lit(1.0 - f), T::lit(f))
            }
        })
        .collect();
    let mut res = Vec::with_capacity(outer * out * inner);
    for a in 0..outer {
        for &(i0, i1, w0, w1) in &taps {
            let r0 = &data[(a * n + i0) * inner..(a * n + i0 + 1) * inner];
            if w1 == T::zero() {
                res.extend_from_slice(r0);
            } else {
                let r1 = &data[(a * n + i1) * inner..(a * n + i1 + 1) * inner];
                res.extend(r0.iter().zip(r1).map(|(&x0, &x1)| w0 * x0 + w1 * x1));
            }
        }
    }
    res
}

/// Resamples a volume onto `dims` voxels covering the same extent.
pub fn resample_to_dims<T: Scalar>(v: &Volume<T>, dims: [usize; 3], interp: Interpolation) -> Result<Volume<T>> {
    let mut cur = v.dims();
    let mut data = v.data().data().to_vec();
    let mut spacing = v.spacing();
    for axis in 0..3 {
        if dims[axis] == 0 {
            return Err(crate::Error::Shape(format!("target extent {dims:?} has a zero axis")));
        }
        if dims[axis] != cur[axis] {
            data = resample_axis(&data, cur, axis, dims[axis], interp);
            spacing[axis] *= cur[axis] as f64 / dims[axis] as f64;
            cur[axis] = dims[axis];
        }
    }
    v.with_data(Tensor::new(&dims, data)?, spacing)
}

/// Resamples onto a 1 mm isotropic grid; each extent becomes
/// `max(1, round(n · spacing))`.
pub fn resample_to_unit_spacing<T: Scalar>(v: &Volume<T>, interp: Interpolation) -> Result<Volume<T>> {
    let mut dims = v.dims();
    let spacing = v.spacing();
    let mut data = v.data().data().to_vec();
    for axis in 0..3 {
        let out = unit_extent(dims[axis], spacing[axis]);
        if out != dims[axis] {
            data = resample_axis(&data, dims, axis, out, interp);
            dims[axis] = out;
        }
    }
    v.with_data(Tensor::new(&dims, data)?, [1.0; 3])
}
