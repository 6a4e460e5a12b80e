//! Broadcasting over equal-rank tensors where each axis either matches or is 1.

use crate::autograd::Var;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

fn contiguous_strides(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![0; shape.len()];
    let mut s = 1;
    for d in (0..shape.len()).rev() {
        strides[d] = s;
        s *= shape[d];
    }
    strides
}

/// Strides of `shape` viewed inside `target`; broadcast axes get stride 0.
fn broadcast_strides(shape: &[usize], target: &[usize]) -> Vec<usize> {
    let base = contiguous_strides(shape);
    shape
        .iter()
        .zip(target)
        .zip(base)
        .map(|((&s, &t), b)| {
            assert!(s == t || s == 1, "cannot broadcast {shape:?} to {target:?}");
            if s == 1 && t != 1 {
                0
            } else {
                b
            }
        })
        .collect()
}

/// Output shape of broadcasting `a` against `b`.
pub fn broadcast_shape(a: &[usize], b: &[usize]) -> Vec<usize> {
    assert_eq!(a.len(), b.len(), "broadcast needs equal ranks: {a:?} vs {b:?}");
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            assert!(x == y || x == 1 || y == 1, "incompatible broadcast {a:?} vs {b:?}");
            x.max(y)
        })
        .collect()
}

/// Visits every output position with the matching offsets into `a` and `b`.
fn for_each_offset(shape: &[usize], sa: &[usize], sb: &[usize], mut f: impl FnMut(usize, usize, usize)) {
    let rank = shape.len();
    if rank == 0 {
        f(0, 0, 0);
        return;
    }
    let inner = shape[rank - 1];
    let (ia, ib) = (sa[rank - 1], sb[rank - 1]);
    let outer: usize = shape[..rank - 1].iter().product();
    let mut idx = vec![0usize; rank - 1];
    let (mut o, mut oa, mut ob) = (0, 0, 0);
    for _ in 0..outer {
        for j in 0..inner {
            f(o + j, oa + j * ia, ob + j * ib);
        }
        o += inner;
        for d in (0..rank - 1).rev() {
            idx[d] += 1;
            oa += sa[d];
            ob += sb[d];
            if idx[d] < shape[d] {
                break;
            }
            oa -= sa[d] * shape[d];
            ob -= sb[d] * shape[d];
            idx[d] = 0;
        }
    }
}

pub(crate) fn broadcast_binary<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, f: impl Fn(T, T) -> T) -> Tensor<T> {
    let shape = broadcast_shape(a.shape(), b.shape());
    let sa = broadcast_strides(a.shape(), &shape);
    let sb = broadcast_strides(b.shape(), &shape);
    let n = shape.iter().product();
    let mut out = vec![T::zero(); n];
    let (ad, bd) = (a.data(), b.data());
    for_each_offset(&shape, &sa, &sb, |o, ia, ib| out[o] = f(ad[ia], bd[ib]));
    Tensor::new(&shape, out).unwrap()
}

/// Sums `g` down to `shape`, undoing a broadcast.
pub(crate) fn reduce_to_shape<T: Scalar>(g: &Tensor<T>, shape: &[usize]) -> Tensor<T> {
    if g.shape() == shape {
        return g.clone();
    }
    let sg = contiguous_strides(g.shape());
    let st = broadcast_strides(shape, g.shape());
    let mut out = Tensor::zeros(shape);
    let gd = g.data();
    let od = out.data_mut();
    for_each_offset(g.shape(), &sg, &st, |_, ig, it| od[it] += gd[ig]);
    out
}

impl<T: Scalar> Var<T> {
    /// Broadcasting element-wise product.
    pub fn mul_bcast(&self, other: &Var<T>) -> Var<T> {
        let out = broadcast_binary(self.value(), other.value(), |a, b| a * b);
        Var::from_op(
            out,
            vec![self.clone(), other.clone()],
            Box::new(|g, p, _| {
                let ga = reduce_to_shape(&broadcast_binary(g, p[1], |g, b| g * b), p[0].shape());
                let gb = reduce_to_shape(&broadcast_binary(g, p[0], |g, a| g * a), p[1].shape());
                vec![Some(ga), Some(gb)]
            }),
        )
    }

    /// Broadcasting element-wise sum.
    pub fn add_bcast(&self, other: &Var<T>) -> Var<T> {
        let out = broadcast_binary(self.value(), other.value(), |a, b| a + b);
        Var::from_op(
            out,
            vec![self.clone(), other.clone()],
            Box::new(|g, p, _| {
                vec![Some(reduce_to_shape(g, p[0].shape())), Some(reduce_to_shape(g, p[1].shape()))]
            }),
        )
    }

    /// Repeats size-1 axes up to `shape`.
    pub fn broadcast_to(&self, shape: &[usize]) -> Var<T> {
        let zeros = Tensor::zeros(shape);
        let out = broadcast_binary(self.value(), &zeros, |a, _| a);
        assert_eq!(out.shape(), shape, "broadcast_to target");
        Var::from_op(
            out,
            vec![self.clone()],
            Box::new(|g, p, _| vec![Some(reduce_to_shape(g, p[0].shape()))]),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn channel_gate_broadcasts_over_space() {
        let x = Tensor::<f64>::from_fn(&[1, 2, 2, 2], |i| i as f64);
        let w = Tensor::<f64>::new(&[1, 2, 1, 1], vec![10.0, 100.0]).unwrap();
        let y = broadcast_binary(&x, &w, |a, b| a * b);
        assert_eq!(y.data(), &[0.0, 10.0, 20.0, 30.0, 400.0, 500.0, 600.0, 700.0]);
    }

    #[test]
    fn reduce_undoes_broadcast_by_summing() {
        let g = Tensor::<f64>::ones(&[2, 3, 4]);
        let r = reduce_to_shape(&g, &[1, 3, 1]);
        assert_eq!(r.shape(), &[1, 3, 1]);
        assert_eq!(r.data(), &[8.0, 8.0, 8.0]);
    }

    #[test]
    fn mul_bcast_gradients_reduce_to_operand_shapes() {
        let x = Var::leaf(Tensor::<f64>::from_fn(&[2, 3, 2, 2], |i| i as f64 * 0.1), true);
        let m = Var::leaf(Tensor::<f64>::from_fn(&[2, 1, 2, 2], |i| 1.0 + i as f64), true);
        let grads = x.mul_bcast(&m).sum().backward();
        let gm = grads.get(&m).unwrap();
        assert_eq!(gm.shape(), &[2, 1, 2, 2]);
        // d/dm[n,0,h,w] = Σ_c x[n,c,h,w]
        let want = (0..3).map(|c| x.value().at(&[1, c, 0, 1])).sum::<f64>();
        assert!((gm.at(&[1, 0, 0, 1]) - want).abs() < 1e-12);
        assert_eq!(grads.get(&x).unwrap().at(&[0, 2, 1, 1]), m.value().at(&[0, 0, 1, 1]));
    }
}
