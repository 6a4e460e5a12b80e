use crate::autograd::Var;
use crate::ops::shape::dims4;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Per-channel batch statistics observed by a training-mode batch norm.
#[derive(Clone, Debug)]
pub struct BatchStats<T> {
    pub mean: Tensor<T>,
    /// Unbiased variance, as used for running estimates.
    pub var: Tensor<T>,
}

/// Channel-wise normalisation shared by both modes: returns the output and
/// the normalised input x̂.
fn normalize<T: Scalar>(
    x: &[T],
    [n, c, hw]: [usize; 3],
    mean: &[T],
    inv: &[T],
    gamma: &[T],
    beta: &[T],
) -> (Vec<T>, Vec<T>) {
    let mut y = vec![T::zero(); x.len()];
    let mut xhat = vec![T::zero(); x.len()];
    for b in 0..n {
        for ch in 0..c {
            let off = (b * c + ch) * hw;
            for i in off..off + hw {
                let h = (x[i] - mean[ch]) * inv[ch];
                xhat[i] = h;
                y[i] = gamma[ch] * h + beta[ch];
            }
        }
    }
    (y, xhat)
}

/// Σ dy and Σ dy·x̂ per channel.
fn channel_sums<T: Scalar>(dy: &[T], xhat: &[T], [n, c, hw]: [usize; 3]) -> (Vec<T>, Vec<T>) {
    let mut sdy = vec![T::zero(); c];
    let mut sdyx = vec![T::zero(); c];
    for b in 0..n {
        for ch in 0..c {
            let off = (b * c + ch) * hw;
            for i in off..off + hw {
                sdy[ch] += dy[i];
                sdyx[ch] += dy[i] * xhat[i];
            }
        }
    }
    (sdy, sdyx)
}

impl<T: Scalar> Var<T> {
    /// Batch normalisation over (N, H, W) with batch statistics.
    pub fn batch_norm_train(&self, gamma: &Var<T>, beta: &Var<T>, eps: T) -> (Var<T>, BatchStats<T>) {
        let [n, c, h, w] = dims4(self.shape());
        let hw = h * w;
        let m = n * hw;
        let mf = T::from_usize(m).unwrap();
        let x = self.value().data();
        let mut mean = vec![T::zero(); c];
        let mut var = vec![T::zero(); c];
        for b in 0..n {
            for ch in 0..c {
                let off = (b * c + ch) * hw;
                mean[ch] += x[off..off + hw].iter().copied().sum::<T>();
            }
        }
        mean.iter_mut().for_each(|v| *v /= mf);
        for b in 0..n {
            for ch in 0..c {
                let off = (b * c + ch) * hw;
                var[ch] += x[off..off + hw].iter().map(|&v| (v - mean[ch]) * (v - mean[ch])).sum::<T>();
            }
        }
        let unbiased: Vec<T> = var
            .iter()
            .map(|&s| if m > 1 { s / T::from_usize(m - 1).unwrap() } else { T::zero() })
            .collect();
        let inv: Vec<T> = var.iter().map(|&s| T::one() / (s / mf + eps).sqrt()).collect();
        let dims = [n, c, hw];
        let (y, xhat) = normalize(x, dims, &mean, &inv, gamma.value().data(), beta.value().data());
        let stats = BatchStats {
            mean: Tensor::new(&[c], mean).unwrap(),
            var: Tensor::new(&[c], unbiased).unwrap(),
        };
        let out = Tensor::new(self.shape(), y).unwrap();
        let var = Var::from_op(
            out,
            vec![self.clone(), gamma.clone(), beta.clone()],
            Box::new(move |g, p, _| {
                let dy = g.data();
                let gam = p[1].data();
                let (sdy, sdyx) = channel_sums(dy, &xhat, dims);
                let mut dx = vec![T::zero(); dy.len()];
                for b in 0..n {
                    for ch in 0..c {
                        let k = gam[ch] * inv[ch] / mf;
                        let off = (b * c + ch) * hw;
                        for i in off..off + hw {
                            dx[i] = k * (mf * dy[i] - sdy[ch] - xhat[i] * sdyx[ch]);
                        }
                    }
                }
                vec![
                    Some(Tensor::new(p[0].shape(), dx).unwrap()),
                    Some(Tensor::new(&[c], sdyx).unwrap()),
                    Some(Tensor::new(&[c], sdy).unwrap()),
                ]
            }),
        );
        (var, stats)
    }

    /// Batch normalisation with fixed (running) statistics.
    pub fn batch_norm_eval(&self, gamma: &Var<T>, beta: &Var<T>, mean: &Tensor<T>, var: &Tensor<T>, eps: T) -> Var<T> {
        let [n, c, h, w] = dims4(self.shape());
        let hw = h * w;
        let inv: Vec<T> = var.data().iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
        let dims = [n, c, hw];
        let (y, xhat) = normalize(self.value().data(), dims, mean.data(), &inv, gamma.value().data(), beta.value().data());
        let out = Tensor::new(self.shape(), y).unwrap();
        Var::from_op(
            out,
            vec![self.clone(), gamma.clone(), beta.clone()],
            Box::new(move |g, p, _| {
                let dy = g.data();
                let gam = p[1].data();
                let (sdy, sdyx) = channel_sums(dy, &xhat, dims);
                let mut dx = vec![T::zero(); dy.len()];
                for b in 0..n {
                    for ch in 0..c {
                        let k = gam[ch] * inv[ch];
                        let off = (b * c + ch) * hw;
                        for i in off..off + hw {
                            dx[i] = k * dy[i];
                        }
                    }
                }
                vec![
                    Some(Tensor::new(p[0].shape(), dx).unwrap()),
                    Some(Tensor::new(&[c], sdyx).unwrap()),
                    Some(Tensor::new(&[c], sdy).unwrap()),
                ]
            }),
        )
    }
}
