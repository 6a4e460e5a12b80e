use crate::autograd::Var;
use crate::scalar::{matmul_into, Layout, Scalar};
use crate::tensor::Tensor;

impl<T: Scalar> Var<T> {
    /// Affine map `x·Wᵀ + b` of an `N×in` batch with `W` stored `out×in`.
    pub fn linear(&self, weight: &Var<T>, bias: Option<&Var<T>>) -> Var<T> {
        let (n, din) = match self.shape() {
            &[n, d] => (n, d),
            s => panic!("linear expects N×in input, got {s:?}"),
        };
        let (dout, win) = match weight.shape() {
            &[o, i] => (o, i),
            s => panic!("linear expects out×in weight, got {s:?}"),
        };
        assert_eq!(din, win, "linear input width {din} vs weight {win}");
        let mut out = vec![T::zero(); n * dout];
        matmul_into(self.value().data(), Layout::Normal, weight.value().data(), Layout::Transposed, &mut out, n, din, dout, false);
        if let Some(b) = bias {
            assert_eq!(b.shape(), &[dout], "linear bias shape");
            let bd = b.value().data();
            for row in out.chunks_mut(dout) {
                row.iter_mut().zip(bd).for_each(|(v, &bv)| *v += bv);
            }
        }
        let out = Tensor::new(&[n, dout], out).unwrap();
        let mut parents = vec![self.clone(), weight.clone()];
        if let Some(b) = bias {
            parents.push(b.clone());
        }
        let has_bias = bias.is_some();
        Var::from_op(
            out,
            parents,
            Box::new(move |g, p, _| {
                let gd = g.data();
                let mut gx = vec![T::zero(); n * din];
                matmul_into(gd, Layout::Normal, p[1].data(), Layout::Normal, &mut gx, n, dout, din, false);
                let mut gw = vec![T::zero(); dout * din];
                matmul_into(gd, Layout::Transposed, p[0].data(), Layout::Normal, &mut gw, dout, n, din, false);
                let mut grads = vec![
                    Some(Tensor::new(&[n, din], gx).unwrap()),
                    Some(Tensor::new(&[dout, din], gw).unwrap()),
                ];
                if has_bias {
                    let mut gb = vec![T::zero(); dout];
                    for row in gd.chunks(dout) {
                        gb.iter_mut().zip(row).for_each(|(a, &v)| *a += v);
                    }
                    grads.push(Some(Tensor::new(&[dout], gb).unwrap()));
                }
                grads
            }),
        )
    }
}
