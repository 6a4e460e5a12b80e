//! Stride-1 2D convolution with zero padding and dilation, via chunked
//! im2col and GEMM.

use crate::autograd::Var;
use crate::ops::shape::dims4;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Upper bound on im2col buffer elements; output rows are processed in
/// chunks that fit.
const COL_BUDGET: usize = 1 << 21;

#[derive(Clone, Copy, Debug)]
struct Geom {
    n: usize,
    cin: usize,
    h: usize,
    w: usize,
    cout: usize,
    kh: usize,
    kw: usize,
    pad: usize,
    dil: usize,
    oh: usize,
    ow: usize,
}

impl Geom {
    fn k(&self) -> usize {
        self.cin * self.kh * self.kw
    }

    fn pointwise(&self) -> bool {
        self.kh == 1 && self.kw == 1 && self.pad == 0
    }

    fn rows_per_chunk(&self) -> usize {
        (COL_BUDGET / (self.k() * self.ow).max(1)).clamp(1, self.oh)
    }
}

/// Output extent of a stride-1 convolution.
pub fn conv_out_extent(input: usize, kernel: usize, pad: usize, dilation: usize) -> Option<usize> {
    let span = dilation * (kernel - 1);
    (input + 2 * pad).checked_sub(span)
}

/// Fills `col` (K × rows·ow) for output rows `r0..r1` of one sample.
fn im2col<T: Scalar>(x: &[T], g: &Geom, r0: usize, r1: usize, col: &mut [T]) {
    let cols = (r1 - r0) * g.ow;
    let mut row = 0;
    for ci in 0..g.cin {
        let plane = &x[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let dst = &mut col[row * cols..(row + 1) * cols];
                let xoff = (kj * g.dil) as isize - g.pad as isize;
                let lo = (-xoff).clamp(0, g.ow as isize) as usize;
                let hi = (g.w as isize - xoff).clamp(0, g.ow as isize) as usize;
                for (t, oy) in (r0..r1).enumerate() {
                    let seg = &mut dst[t * g.ow..(t + 1) * g.ow];
                    let iy = (oy + ki * g.dil) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.h as isize || lo >= hi {
                        seg.fill(T::zero());
                        continue;
                    }
                    let src = &plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    seg[..lo].fill(T::zero());
                    let s0 = (lo as isize + xoff) as usize;
                    seg[lo..hi].copy_from_slice(&src[s0..s0 + (hi - lo)]);
                    seg[hi..].fill(T::zero());
                }
                row += 1;
            }
        }
    }
}

/// Scatter-adds `col` back into the input-gradient plane stack `gx`.
fn col2im<T: Scalar>(col: &[T], g: &Geom, r0: usize, r1: usize, gx: &mut [T]) {
    let cols = (r1 - r0) * g.ow;
    let mut row = 0;
    for ci in 0..g.cin {
        let plane = &mut gx[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let src = &col[row * cols..(row + 1) * cols];
                let xoff = (kj * g.dil) as isize - g.pad as isize;
                let lo = (-xoff).clamp(0, g.ow as isize) as usize;
                let hi = (g.w as isize - xoff).clamp(0, g.ow as isize) as usize;
                for (t, oy) in (r0..r1).enumerate() {
                    let iy = (oy + ki * g.dil) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.h as isize || lo >= hi {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    let s0 = (lo as isize + xoff) as usize;
                    for (d, &v) in dst[s0..s0 + (hi - lo)].iter_mut().zip(&src[t * g.ow + lo..t * g.ow + hi]) {
                        *d += v;
                    }
                }
                row += 1;
            }
        }
    }
}

/// `c = op(a)·op(b) (+ c)` with explicit strides.
#[allow(clippy::too_many_arguments)]
fn gemm<T: Scalar>(
    m: usize,
    k: usize,
    n: usize,
    a: &[T],
    (rsa, csa): (usize, usize),
    b: &[T],
    (rsb, csb): (usize, usize),
    accumulate: bool,
    c: &mut [T],
    (rsc, csc): (usize, usize),
) {
    if m == 0 || n == 0 {
        return;
    }
    debug_assert!(a.len() > (m - 1) * rsa + k.saturating_sub(1) * csa || k == 0);
    debug_assert!(c.len() > (m - 1) * rsc + (n - 1) * csc);
    let beta = if accumulate { T::one() } else { T::zero() };
    // SAFETY: extents checked by callers' slicing; `c` is uniquely borrowed.
    unsafe {
        T::gemm(
            m,
            k,
            n,
            T::one(),
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}

fn conv_forward<T: Scalar>(x: &[T], wt: &[T], bias: Option<&[T]>, g: &Geom) -> Vec<T> {
    let (in_sz, out_hw) = (g.cin * g.h * g.w, g.oh * g.ow);
    let k = g.k();
    let mut out = vec![T::zero(); g.n * g.cout * out_hw];
    let chunk = g.rows_per_chunk();
    let mut col = if g.pointwise() { Vec::new() } else { vec![T::zero(); k * chunk * g.ow] };
    for b in 0..g.n {
        let xb = &x[b * in_sz..(b + 1) * in_sz];
        let ob = &mut out[b * g.cout * out_hw..(b + 1) * g.cout * out_hw];
        if g.pointwise() {
            gemm(g.cout, g.cin, out_hw, wt, (k, 1), xb, (out_hw, 1), false, ob, (out_hw, 1));
        } else {
            let mut r0 = 0;
            while r0 < g.oh {
                let r1 = (r0 + chunk).min(g.oh);
                let cols = (r1 - r0) * g.ow;
                im2col(xb, g, r0, r1, &mut col[..k * cols]);
                gemm(g.cout, k, cols, wt, (k, 1), &col[..k * cols], (cols, 1), false, &mut ob[r0 * g.ow..], (out_hw, 1));
                r0 = r1;
            }
        }
        if let Some(bias) = bias {
            for (co, &bv) in bias.iter().enumerate() {
                ob[co * out_hw..(co + 1) * out_hw].iter_mut().for_each(|v| *v += bv);
            }
        }
    }
    out
}

/// Returns (input grad, weight grad, bias grad).
fn conv_backward<T: Scalar>(x: &[T], wt: &[T], go: &[T], g: &Geom) -> (Vec<T>, Vec<T>, Vec<T>) {
    let (in_sz, out_hw) = (g.cin * g.h * g.w, g.oh * g.ow);
    let k = g.k();
    let mut gx = vec![T::zero(); x.len()];
    let mut gw = vec![T::zero(); wt.len()];
    let mut gb = vec![T::zero(); g.cout];
    let chunk = g.rows_per_chunk();
    let (mut col, mut gcol) = if g.pointwise() {
        (Vec::new(), Vec::new())
    } else {
        (vec![T::zero(); k * chunk * g.ow], vec![T::zero(); k * chunk * g.ow])
    };
    for b in 0..g.n {
        let xb = &x[b * in_sz..(b + 1) * in_sz];
        let gob = &go[b * g.cout * out_hw..(b + 1) * g.cout * out_hw];
        let gxb = &mut gx[b * in_sz..(b + 1) * in_sz];
        for (co, acc) in gb.iter_mut().enumerate() {
            *acc += gob[co * out_hw..(co + 1) * out_hw].iter().copied().sum::<T>();
        }
        if g.pointwise() {
            // gw[cout,cin] += go[cout,hw] · x[cin,hw]ᵀ
            gemm(g.cout, out_hw, g.cin, gob, (out_hw, 1), xb, (1, out_hw), true, &mut gw, (k, 1));
            // gx[cin,hw] = wᵀ[cin,cout] · go[cout,hw]
            gemm(g.cin, g.cout, out_hw, wt, (1, k), gob, (out_hw, 1), false, gxb, (out_hw, 1));
            continue;
        }
        let mut r0 = 0;
        while r0 < g.oh {
            let r1 = (r0 + chunk).min(g.oh);
            let cols = (r1 - r0) * g.ow;
            im2col(xb, g, r0, r1, &mut col[..k * cols]);
            let goc = &gob[r0 * g.ow..];
            gemm(g.cout, cols, k, goc, (out_hw, 1), &col[..k * cols], (1, cols), true, &mut gw, (k, 1));
            gemm(k, g.cout, cols, wt, (1, k), goc, (out_hw, 1), false, &mut gcol[..k * cols], (cols, 1));
            col2im(&gcol[..k * cols], g, r0, r1, gxb);
            r0 = r1;
        }
    }
    (gx, gw, gb)
}

impl<T: Scalar> Var<T> {
    /// Stride-1 convolution of `N×Cin×H×W` input with a `Cout×Cin×kh×kw`
    /// kernel, zero padding `pad` on every side and dilation `dilation`.
    pub fn conv2d(&self, weight: &Var<T>, bias: Option<&Var<T>>, pad: usize, dilation: usize) -> Var<T> {
        let [n, cin, h, w] = dims4(self.shape());
        let [cout, wcin, kh, kw] = dims4(weight.shape());
        assert_eq!(cin, wcin, "conv2d input channels {cin} vs kernel {wcin}");
        assert!(dilation >= 1, "dilation must be positive");
        let oh = conv_out_extent(h, kh, pad, dilation).filter(|&e| e > 0).expect("kernel larger than padded input");
        let ow = conv_out_extent(w, kw, pad, dilation).filter(|&e| e > 0).expect("kernel larger than padded input");
        let g = Geom { n, cin, h, w, cout, kh, kw, pad, dil: dilation, oh, ow };
        if let Some(b) = bias {
            assert_eq!(b.shape(), &[cout], "conv2d bias shape");
        }
        let out = conv_forward(self.value().data(), weight.value().data(), bias.map(|b| b.value().data()), &g);
        let out = Tensor::new(&[n, cout, oh, ow], out).unwrap();
        let mut parents = vec![self.clone(), weight.clone()];
        if let Some(b) = bias {
            parents.push(b.clone());
        }
        let has_bias = bias.is_some();
        Var::from_op(
            out,
            parents,
            Box::new(move |go, p, _| {
                let (gx, gw, gb) = conv_backward(p[0].data(), p[1].data(), go.data(), &g);
                let mut grads = vec![
                    Some(Tensor::new(p[0].shape(), gx).unwrap()),
                    Some(Tensor::new(p[1].shape(), gw).unwrap()),
                ];
                if has_bias {
                    grads.push(Some(Tensor::new(&[g.cout], gb).unwrap()));
                }
                grads
            }),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct nested-loop convolution, independent of im2col.
    fn reference_conv(x: &Tensor<f64>, w: &Tensor<f64>, pad: usize, dil: usize) -> Tensor<f64> {
        let [n, cin, h, wd] = dims4(x.shape());
        let [cout, _, kh, kw] = dims4(w.shape());
        let oh = conv_out_extent(h, kh, pad, dil).unwrap();
        let ow = conv_out_extent(wd, kw, pad, dil).unwrap();
        let mut out = Tensor::zeros(&[n, cout, oh, ow]);
        for b in 0..n {
            for co in 0..cout {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut acc = 0.0;
                        for ci in 0..cin {
                            for i in 0..kh {
                                for j in 0..kw {
                                    let iy = (oy + i * dil) as isize - pad as isize;
                                    let ix = (ox + j * dil) as isize - pad as isize;
                                    if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < wd {
                                        acc += x.at(&[b, ci, iy as usize, ix as usize]) * w.at(&[co, ci, i, j]);
                                    }
                                }
                            }
                        }
                        out.set(&[b, co, oy, ox], acc);
                    }
                }
            }
        }
        out
    }

    fn pseudo(shape: &[usize], seed: f64) -> Tensor<f64> {
        Tensor::from_fn(shape, |i| ((i as f64 + seed) * 0.7137).sin())
    }

    #[test]
    fn matches_direct_convolution_across_geometries() {
        for &(cin, cout, h, w, k, pad, dil) in &[
            (3, 4, 7, 5, 3, 1, 1),
            (2, 3, 8, 8, 3, 2, 2),
            (2, 2, 6, 9, 5, 2, 1),
            (3, 2, 5, 5, 1, 0, 1),
            (1, 1, 4, 4, 3, 3, 3),
            (2, 1, 3, 3, 7, 3, 1),
        ] {
            let x = pseudo(&[2, cin, h, w], 1.0);
            let wt = pseudo(&[cout, cin, k, k], 2.0);
            let got = Var::constant(x.clone()).conv2d(&Var::constant(wt.clone()), None, pad, dil);
            let want = reference_conv(&x, &wt, pad, dil);
            assert_eq!(got.shape(), want.shape());
            for (a, b) in got.value().data().iter().zip(want.data()) {
                assert!((a - b).abs() < 1e-10, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn backward_is_adjoint_of_forward() {
        // <conv(x), g> must equal <x, gx> and <w, gw> since conv is bilinear.
        let x = pseudo(&[2, 3, 6, 5], 0.3);
        let wt = pseudo(&[4, 3, 3, 3], 1.9);
        let g = Geom { n: 2, cin: 3, h: 6, w: 5, cout: 4, kh: 3, kw: 3, pad: 2, dil: 2, oh: 6, ow: 5 };
        let y = conv_forward(x.data(), wt.data(), None, &g);
        let go: Vec<f64> = (0..y.len()).map(|i| ((i as f64) * 0.123).cos()).collect();
        let (gx, gw, _) = conv_backward(x.data(), wt.data(), &go, &g);
        let lhs: f64 = y.iter().zip(&go).map(|(a, b)| a * b).sum();
        let via_x: f64 = x.data().iter().zip(&gx).map(|(a, b)| a * b).sum();
        let via_w: f64 = wt.data().iter().zip(&gw).map(|(a, b)| a * b).sum();
        assert!((lhs - via_x).abs() < 1e-9, "{lhs} vs {via_x}");
        assert!((lhs - via_w).abs() < 1e-9, "{lhs} vs {via_w}");
    }

    #[test]
    fn single_three_by_three_kernel_keeps_odd_extents() {
        assert_eq!(conv_out_extent(7, 3, 1, 1), Some(7));
        assert_eq!(conv_out_extent(5, 3, 1, 1), Some(5));
        assert_eq!(conv_out_extent(8, 3, 6, 6), Some(8));
    }
}
