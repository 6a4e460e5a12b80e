use crate::autograd::Var;
use crate::nn::params::{ParamBuilder, ParamId, ParamKind, Session};
use crate::scalar::Scalar;

/// Stride-1 convolution with size-preserving padding.
#[derive(Clone, Debug)]
pub struct Conv2d {
    weight: ParamId,
    bias: Option<ParamId>,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub dilation: usize,
}

impl Conv2d {
    pub fn new<T: Scalar>(
        b: &mut ParamBuilder<'_, T>,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        dilation: usize,
        bias: bool,
    ) -> Self {
        assert!(kernel % 2 == 1, "kernel size must be odd, got {kernel}");
        let fan_in = in_channels * kernel * kernel;
        let weight = b.he_normal("weight", &[out_channels, in_channels, kernel, kernel], fan_in);
        let bias = bias.then(|| b.constant("bias", &[out_channels], 0.0, ParamKind::Trainable));
        Conv2d { weight, bias, in_channels, out_channels, kernel, dilation: dilation.max(1) }
    }

    pub fn padding(&self) -> usize {
        self.dilation * (self.kernel - 1) / 2
    }

    pub fn forward<T: Scalar>(&self, s: &Session<'_, T>, x: &Var<T>) -> Var<T> {
        let w = s.param(self.weight);
        let b = self.bias.map(|id| s.param(id));
        x.conv2d(&w, b.as_ref(), self.padding(), self.dilation)
    }
}

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

/// Batch normalisation with running statistics kept as buffers.
#[derive(Clone, Debug)]
pub struct BatchNorm2d {
    gamma: ParamId,
    beta: ParamId,
    running_mean: ParamId,
    running_var: ParamId,
}

impl BatchNorm2d {
    pub fn new<T: Scalar>(b: &mut ParamBuilder<'_, T>, channels: usize) -> Self {
        BatchNorm2d {
            gamma: b.constant("gamma", &[channels], 1.0, ParamKind::Trainable),
            beta: b.constant("beta", &[channels], 0.0, ParamKind::Trainable),
            running_mean: b.constant("running_mean", &[channels], 0.0, ParamKind::Buffer),
            running_var: b.constant("running_var", &[channels], 1.0, ParamKind::Buffer),
        }
    }

    pub fn forward<T: Scalar>(&self, s: &Session<'_, T>, x: &Var<T>) -> Var<T> {
        let gamma = s.param(self.gamma);
        let beta = s.param(self.beta);
        let eps = T::lit(BN_EPS);
        if s.is_training() {
            let (y, stats) = x.batch_norm_train(&gamma, &beta, eps);
            let m = T::lit(BN_MOMENTUM);
            let keep = T::one() - m;
            let blend = |id: ParamId, batch: &crate::Tensor<T>| s.store().get(id).zip_map(batch, |r, v| keep * r + m * v);
            s.record_update(self.running_mean, blend(self.running_mean, &stats.mean));
            s.record_update(self.running_var, blend(self.running_var, &stats.var));
            y
        } else {
            let store = s.store();
            x.batch_norm_eval(&gamma, &beta, store.get(self.running_mean), store.get(self.running_var), eps)
        }
    }
}

/// Fully connected layer on `N×in` inputs.
#[derive(Clone, Debug)]
pub struct Linear {
    weight: ParamId,
    bias: ParamId,
    pub in_features: usize,
    pub out_features: usize,
}

impl Linear {
    pub fn new<T: Scalar>(b: &mut ParamBuilder<'_, T>, in_features: usize, out_features: usize) -> Self {
        Linear {
            weight: b.he_normal("weight", &[out_features, in_features], in_features),
            bias: b.constant("bias", &[out_features], 0.0, ParamKind::Trainable),
            in_features,
            out_features,
        }
    }

    pub fn forward<T: Scalar>(&self, s: &Session<'_, T>, x: &Var<T>) -> Var<T> {
        x.linear(&s.param(self.weight), Some(&s.param(self.bias)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::params::ParamStore;
    use crate::tensor::Tensor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn conv_with_bias_counts_weights_plus_bias() {
        let mut store = ParamStore::<f32>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut b = ParamBuilder::new(&mut store, &mut rng);
        Conv2d::new(&mut b, 1, 8, 3, 1, true);
        assert_eq!(store.trainable_count(), 3 * 3 * 1 * 8 + 8);
    }

    #[test]
    fn training_batch_norm_moves_running_stats_by_momentum() {
        let mut store = ParamStore::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let bn = BatchNorm2d::new(&mut ParamBuilder::new(&mut store, &mut rng), 1);
        let s = Session::train(&store);
        let x = Var::constant(Tensor::new(&[1, 1, 1, 2], vec![1.0, 3.0]).unwrap());
        bn.forward(&s, &x);
        let updates = s.take_updates();
        assert_eq!(updates.len(), 2);
        assert!((updates[0].1.data()[0] - 0.2).abs() < 1e-12);
        assert!((updates[1].1.data()[0] - (0.9 + 0.1 * 2.0)).abs() < 1e-12);
    }
}
