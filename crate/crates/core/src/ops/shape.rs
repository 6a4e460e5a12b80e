//! Reshaping, concatenation, slicing and axis reductions.

use crate::autograd::Var;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// (outer, axis, inner) extents of `shape` around `axis`.
fn split_at_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    assert!(axis < shape.len(), "axis {axis} out of range for {shape:?}");
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

impl<T: Scalar> Var<T> {
    pub fn reshape(&self, shape: &[usize]) -> Var<T> {
        let out = self.value().clone().reshape(shape).expect("reshape element count");
        Var::from_op(
            out,
            vec![self.clone()],
            Box::new(|g, p, _| vec![Some(g.clone().reshape(p[0].shape()).unwrap())]),
        )
    }

    /// Concatenates along `axis`; all other extents must agree.
    pub fn concat(parts: &[Var<T>], axis: usize) -> Var<T> {
        assert!(!parts.is_empty(), "concat of nothing");
        let first = parts[0].shape().to_vec();
        let (outer, _, inner) = split_at_axis(&first, axis);
        let mut sizes = Vec::with_capacity(parts.len());
        for p in parts {
            let s = p.shape();
            assert_eq!(s.len(), first.len(), "concat rank");
            for d in 0..s.len() {
                assert!(d == axis || s[d] == first[d], "concat extent mismatch {s:?} vs {first:?}");
            }
            sizes.push(s[axis]);
        }
        let total: usize = sizes.iter().sum();
        let mut shape = first.clone();
        shape[axis] = total;
        let mut out = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for (p, &len) in parts.iter().zip(&sizes) {
                let block = len * inner;
                out.extend_from_slice(&p.value().data()[o * block..(o + 1) * block]);
            }
        }
        let out = Tensor::new(&shape, out).unwrap();
        Var::from_op(
            out,
            parts.to_vec(),
            Box::new(move |g, _, _| {
                let gd = g.data();
                let mut grads: Vec<Vec<T>> = sizes.iter().map(|&l| Vec::with_capacity(outer * l * inner)).collect();
                for o in 0..outer {
                    let mut off = o * total * inner;
                    for (gv, &len) in grads.iter_mut().zip(&sizes) {
                        gv.extend_from_slice(&gd[off..off + len * inner]);
                        off += len * inner;
                    }
                }
                grads
                    .into_iter()
                    .zip(&sizes)
                    .map(|(gv, &len)| {
                        let mut s = first.clone();
                        s[axis] = len;
                        Some(Tensor::new(&s, gv).unwrap())
                    })
                    .collect()
            }),
        )
    }

    /// Slice `[start, start + len)` along `axis`.
    pub fn narrow(&self, axis: usize, start: usize, len: usize) -> Var<T> {
        let shape = self.shape().to_vec();
        let (outer, extent, inner) = split_at_axis(&shape, axis);
        assert!(start + len <= extent, "narrow {start}+{len} beyond {extent}");
        let mut out_shape = shape.clone();
        out_shape[axis] = len;
        let src = self.value().data();
        let mut out = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = (o * extent + start) * inner;
            out.extend_from_slice(&src[base..base + len * inner]);
        }
        let out = Tensor::new(&out_shape, out).unwrap();
        Var::from_op(
            out,
            vec![self.clone()],
            Box::new(move |g, _, _| {
                let mut full = Tensor::zeros(&shape);
                let fd = full.data_mut();
                let gd = g.data();
                for o in 0..outer {
                    let base = (o * extent + start) * inner;
                    fd[base..base + len * inner].copy_from_slice(&gd[o * len * inner..(o + 1) * len * inner]);
                }
                vec![Some(full)]
            }),
        )
    }

    /// Softmax along `axis`.
    pub fn softmax(&self, axis: usize) -> Var<T> {
        let shape = self.shape().to_vec();
        let (outer, extent, inner) = split_at_axis(&shape, axis);
        let x = self.value().data();
        let mut y = vec![T::zero(); x.len()];
        for o in 0..outer {
            for i in 0..inner {
                let at = |k: usize| (o * extent + k) * inner + i;
                let m = (0..extent).map(|k| x[at(k)]).fold(T::neg_infinity(), T::max);
                let mut z = T::zero();
                for k in 0..extent {
                    let e = (x[at(k)] - m).exp();
                    y[at(k)] = e;
                    z += e;
                }
                for k in 0..extent {
                    y[at(k)] /= z;
                }
            }
        }
        let out = Tensor::new(&shape, y).unwrap();
        Var::from_op(
            out,
            vec![self.clone()],
            Box::new(move |g, _, y| {
                let (gd, yd) = (g.data(), y.data());
                let mut dx = vec![T::zero(); gd.len()];
                for o in 0..outer {
                    for i in 0..inner {
                        let at = |k: usize| (o * extent + k) * inner + i;
                        let dot: T = (0..extent).map(|k| gd[at(k)] * yd[at(k)]).sum();
                        for k in 0..extent {
                            dx[at(k)] = yd[at(k)] * (gd[at(k)] - dot);
                        }
                    }
                }
                vec![Some(Tensor::new(g.shape(), dx).unwrap())]
            }),
        )
    }

    /// Mean over the spatial axes of an `N×C×H×W` tensor, giving `N×C`.
    pub fn global_avg_pool(&self) -> Var<T> {
        let [n, c, h, w] = dims4(self.shape());
        let hw = h * w;
        let inv = T::one() / T::from_usize(hw).unwrap();
        let x = self.value().data();
        let out: Vec<T> = (0..n * c).map(|i| x[i * hw..(i + 1) * hw].iter().copied().sum::<T>() * inv).collect();
        let out = Tensor::new(&[n, c], out).unwrap();
        Var::from_op(
            out,
            vec![self.clone()],
            Box::new(move |g, _, _| {
                let mut dx = Vec::with_capacity(n * c * hw);
                for &gv in g.data() {
                    dx.extend(std::iter::repeat(gv * inv).take(hw));
                }
                vec![Some(Tensor::new(&[n, c, h, w], dx).unwrap())]
            }),
        )
    }

    /// Mean over channels of `N×C×H×W`, giving `N×1×H×W`.
    pub fn channel_mean(&self) -> Var<T> {
        let [n, c, h, w] = dims4(self.shape());
        let hw = h * w;
        let inv = T::one() / T::from_usize(c).unwrap();
        let x = self.value().data();
        let mut out = vec![T::zero(); n * hw];
        for b in 0..n {
            for ch in 0..c {
                let src = &x[(b * c + ch) * hw..(b * c + ch + 1) * hw];
                for (o, &v) in out[b * hw..(b + 1) * hw].iter_mut().zip(src) {
                    *o += v;
                }
            }
        }
        out.iter_mut().for_each(|v| *v *= inv);
        let out = Tensor::new(&[n, 1, h, w], out).unwrap();
        Var::from_op(
            out,
            vec![self.clone()],
            Box::new(move |g, _, _| {
                let gd = g.data();
                let mut dx = Vec::with_capacity(n * c * hw);
                for b in 0..n {
                    for _ in 0..c {
                        dx.extend(gd[b * hw..(b + 1) * hw].iter().map(|&v| v * inv));
                    }
                }
                vec![Some(Tensor::new(&[n, c, h, w], dx).unwrap())]
            }),
        )
    }

    /// Max over channels of `N×C×H×W`, giving `N×1×H×W`. Ties route the
    /// gradient to the lowest channel index.
    pub fn channel_max(&self) -> Var<T> {
        let [n, c, h, w] = dims4(self.shape());
        let hw = h * w;
        let x = self.value().data();
        let mut out = vec![T::neg_infinity(); n * hw];
        let mut arg = vec![0usize; n * hw];
        for b in 0..n {
            for ch in 0..c {
                let src = &x[(b * c + ch) * hw..(b * c + ch + 1) * hw];
                for (i, &v) in src.iter().enumerate() {
                    if v > out[b * hw + i] {
                        out[b * hw + i] = v;
                        arg[b * hw + i] = ch;
                    }
                }
            }
        }
        let out = Tensor::new(&[n, 1, h, w], out).unwrap();
        Var::from_op(
            out,
            vec![self.clone()],
            Box::new(move |g, _, _| {
                let mut dx = Tensor::zeros(&[n, c, h, w]);
                let d = dx.data_mut();
                for b in 0..n {
                    for i in 0..hw {
                        d[(b * c + arg[b * hw + i]) * hw + i] = g.data()[b * hw + i];
                    }
                }
                vec![Some(dx)]
            }),
        )
    }
}

pub(crate) fn dims4(shape: &[usize]) -> [usize; 4] {
    match shape {
        &[n, c, h, w] => [n, c, h, w],
        _ => panic!("expected an N×C×H×W tensor, got {shape:?}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn concat_then_narrow_recovers_parts() {
        let a = Var::constant(Tensor::<f32>::from_fn(&[2, 1, 3], |i| i as f32));
        let b = Var::constant(Tensor::<f32>::from_fn(&[2, 2, 3], |i| 100.0 + i as f32));
        let c = Var::concat(&[a.clone(), b.clone()], 1);
        assert_eq!(c.shape(), &[2, 3, 3]);
        assert_eq!(c.narrow(1, 0, 1).value(), a.value());
        assert_eq!(c.narrow(1, 1, 2).value(), b.value());
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let x = Var::constant(Tensor::<f64>::from_fn(&[2, 4, 3], |i| (i as f64 * 1.7).sin() * 5.0));
        let y = x.softmax(1);
        for o in 0..2 {
            for i in 0..3 {
                let s: f64 = (0..4).map(|k| y.value().at(&[o, k, i])).sum();
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn channel_max_picks_largest_channel() {
        let x = Tensor::<f32>::new(&[1, 3, 1, 2], vec![1.0, 5.0, 3.0, 2.0, 2.0, 9.0]).unwrap();
        let m = Var::constant(x).channel_max();
        assert_eq!(m.value().data(), &[3.0, 9.0]);
    }
}
