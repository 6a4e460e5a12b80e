//! Half-pixel-centred bilinear and nearest-neighbour resampling.

use crate::autograd::Var;
use crate::ops::shape::dims4;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Interpolation taps `(i0, i1, w0, w1)` for each output coordinate.
fn bilinear_taps<T: Scalar>(input: usize, output: usize) -> Vec<(usize, usize, T, T)> {
    let scale = input as f64 / output as f64;
    (0..output)
        .map(|o| {
            let src = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, (input - 1) as f64);
            let i0 = src.floor() as usize;
            let i1 = (i0 + 1).min(input - 1);
            let f = src - i0 as f64;
            (i0, i1, T::lit(1.0 - f), T::lit(f))
        })
        .collect()
}

/// Source index for nearest-neighbour resampling.
pub fn nearest_index(o: usize, input: usize, output: usize) -> usize {
    (((o as f64 + 0.5) * input as f64 / output as f64).floor() as usize).min(input - 1)
}

/// Bilinear resize of one `h×w` plane to `oh×ow`.
pub fn resize_bilinear_plane<T: Scalar>(x: &[T], h: usize, w: usize, oh: usize, ow: usize) -> Vec<T> {
    assert_eq!(x.len(), h * w, "plane size");
    if (h, w) == (oh, ow) {
        return x.to_vec();
    }
    let rows = bilinear_taps::<T>(h, oh);
    let cols = bilinear_taps::<T>(w, ow);
    let mut tmp = vec![T::zero(); oh * w];
    for (oy, &(i0, i1, w0, w1)) in rows.iter().enumerate() {
        for x_ in 0..w {
            tmp[oy * w + x_] = w0 * x[i0 * w + x_] + w1 * x[i1 * w + x_];
        }
    }
    let mut out = vec![T::zero(); oh * ow];
    for oy in 0..oh {
        for (ox, &(j0, j1, w0, w1)) in cols.iter().enumerate() {
            out[oy * ow + ox] = w0 * tmp[oy * w + j0] + w1 * tmp[oy * w + j1];
        }
    }
    out
}

/// Adjoint of [`resize_bilinear_plane`]: scatters an `oh×ow` gradient back.
fn resize_bilinear_plane_adjoint<T: Scalar>(g: &[T], h: usize, w: usize, oh: usize, ow: usize, out: &mut [T]) {
    let rows = bilinear_taps::<T>(h, oh);
    let cols = bilinear_taps::<T>(w, ow);
    let mut tmp = vec![T::zero(); oh * w];
    for oy in 0..oh {
        for (ox, &(j0, j1, w0, w1)) in cols.iter().enumerate() {
            let v = g[oy * ow + ox];
            tmp[oy * w + j0] += w0 * v;
            tmp[oy * w + j1] += w1 * v;
        }
    }
    for (oy, &(i0, i1, w0, w1)) in rows.iter().enumerate() {
        for x_ in 0..w {
            let v = tmp[oy * w + x_];
            out[i0 * w + x_] += w0 * v;
            out[i1 * w + x_] += w1 * v;
        }
    }
}

/// Nearest-neighbour resize of one plane.
pub fn resize_nearest_plane<T: Copy>(x: &[T], h: usize, w: usize, oh: usize, ow: usize) -> Vec<T> {
    assert_eq!(x.len(), h * w, "plane size");
    let cols: Vec<usize> = (0..ow).map(|o| nearest_index(o, w, ow)).collect();
    let mut out = Vec::with_capacity(oh * ow);
    for oy in 0..oh {
        let iy = nearest_index(oy, h, oh);
        out.extend(cols.iter().map(|&ix| x[iy * w + ix]));
    }
    out
}

impl<T: Scalar> Var<T> {
    /// Bilinear resize of an `N×C×H×W` tensor to `N×C×oh×ow`.
    pub fn upsample_bilinear(&self, oh: usize, ow: usize) -> Var<T> {
        let [n, c, h, w] = dims4(self.shape());
        let x = self.value().data();
        let mut out = Vec::with_capacity(n * c * oh * ow);
        for plane in 0..n * c {
            out.extend(resize_bilinear_plane(&x[plane * h * w..(plane + 1) * h * w], h, w, oh, ow));
        }
        let out = Tensor::new(&[n, c, oh, ow], out).unwrap();
        Var::from_op(
            out,
            vec![self.clone()],
            Box::new(move |g, p, _| {
                let mut dx = Tensor::zeros(p[0].shape());
                let d = dx.data_mut();
                for plane in 0..n * c {
                    resize_bilinear_plane_adjoint(
                        &g.data()[plane * oh * ow..(plane + 1) * oh * ow],
                        h,
                        w,
                        oh,
                        ow,
                        &mut d[plane * h * w..(plane + 1) * h * w],
                    );
                }
                vec![Some(dx)]
            }),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bilinear_preserves_constants() {
        let x = vec![3.25f64; 5 * 7];
        for &(oh, ow) in &[(10, 14), (3, 2), (64, 64)] {
            assert!(resize_bilinear_plane(&x, 5, 7, oh, ow).iter().all(|&v| (v - 3.25).abs() < 1e-12));
        }
    }

    #[test]
    fn nearest_doubling_repeats_pixels() {
        let x = [1u8, 2, 3, 4];
        assert_eq!(resize_nearest_plane(&x, 2, 2, 4, 4), vec![1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4]);
    }

    #[test]
    fn adjoint_identity_holds() {
        let (h, w, oh, ow) = (3, 5, 6, 10);
        let x: Vec<f64> = (0..h * w).map(|i| (i as f64 * 0.31).sin()).collect();
        let g: Vec<f64> = (0..oh * ow).map(|i| (i as f64 * 0.17).cos()).collect();
        let y = resize_bilinear_plane(&x, h, w, oh, ow);
        let mut gx = vec![0.0; h * w];
        resize_bilinear_plane_adjoint(&g, h, w, oh, ow, &mut gx);
        let lhs: f64 = y.iter().zip(&g).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&gx).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
