use crate::autograd::Var;
use crate::ops::shape::dims4;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

impl<T: Scalar> Var<T> {
    /// 2×2 max pooling with stride 2. Spatial extents must be even.
    pub fn max_pool2x2(&self) -> Var<T> {
        let [n, c, h, w] = dims4(self.shape());
        assert!(h % 2 == 0 && w % 2 == 0, "max_pool2x2 needs even extents, got {h}×{w}");
        let (oh, ow) = (h / 2, w / 2);
        let x = self.value().data();
        let mut out = Vec::with_capacity(n * c * oh * ow);
        let mut arg = Vec::with_capacity(n * c * oh * ow);
        for plane in 0..n * c {
            let base = plane * h * w;
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = base + 2 * oy * w + 2 * ox;
                    for &(dy, dx) in &[(0, 1), (1, 0), (1, 1)] {
                        let i = base + (2 * oy + dy) * w + 2 * ox + dx;
                        if x[i] > x[best] {
                            best = i;
                        }
                    }
                    out.push(x[best]);
                    arg.push(best);
                }
            }
        }
        let out = Tensor::new(&[n, c, oh, ow], out).unwrap();
        Var::from_op(
            out,
            vec![self.clone()],
            Box::new(move |g, p, _| {
                let mut dx = Tensor::zeros(p[0].shape());
                let d = dx.data_mut();
                for (&i, &gv) in arg.iter().zip(g.data()) {
                    d[i] += gv;
                }
                vec![Some(dx)]
            }),
        )
    }

    /// 2×2 average pooling with stride 2. Spatial extents must be even.
    pub fn avg_pool2x2(&self) -> Var<T> {
        let [n, c, h, w] = dims4(self.shape());
        assert!(h % 2 == 0 && w % 2 == 0, "avg_pool2x2 needs even extents, got {h}×{w}");
        let (oh, ow) = (h / 2, w / 2);
        let quarter = T::lit(0.25);
        let x = self.value().data();
        let mut out = Vec::with_capacity(n * c * oh * ow);
        for plane in 0..n * c {
            let base = plane * h * w;
            for oy in 0..oh {
                for ox in 0..ow {
                    let i = base + 2 * oy * w + 2 * ox;
                    out.push((x[i] + x[i + 1] + x[i + w] + x[i + w + 1]) * quarter);
                }
            }
        }
        let out = Tensor::new(&[n, c, oh, ow], out).unwrap();
        Var::from_op(
            out,
            vec![self.clone()],
            Box::new(move |g, p, _| {
                let mut dx = Tensor::zeros(p[0].shape());
                let d = dx.data_mut();
                let gd = g.data();
                for plane in 0..n * c {
                    let base = plane * h * w;
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let v = gd[(plane * oh + oy) * ow + ox] * quarter;
                            let i = base + 2 * oy * w + 2 * ox;
                            d[i] += v;
                            d[i + 1] += v;
                            d[i + w] += v;
                            d[i + w + 1] += v;
                        }
                    }
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
    fn pools_halve_extent() {
        let x = Var::constant(Tensor::<f32>::from_fn(&[1, 1, 4, 4], |i| i as f32));
        assert_eq!(x.max_pool2x2().value().data(), &[5.0, 7.0, 13.0, 15.0]);
        assert_eq!(x.avg_pool2x2().value().data(), &[2.5, 4.5, 10.5, 12.5]);
    }

    #[test]
    fn max_pool_routes_gradient_to_argmax() {
        let x = Var::leaf(Tensor::<f64>::new(&[1, 1, 2, 2], vec![0.1, 0.9, 0.3, 0.2]).unwrap(), true);
        let grads = x.max_pool2x2().sum().backward();
        assert_eq!(grads.get(&x).unwrap().data(), &[0.0, 1.0, 0.0, 0.0]);
    }
}
