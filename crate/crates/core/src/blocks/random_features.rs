use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::autograd::Var;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Frozen random Fourier feature map `v ↦ sqrt(2/D)·cos(Wv + b)` approximating
/// a Gaussian kernel of bandwidth `sigma`.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomFeatureParams<T> {
    /// `D×d`, entries `N(0, 1/σ²)`.
    pub projection: Tensor<T>,
    /// Length `D`, entries uniform on `[0, 2π)`.
    pub phase: Tensor<T>,
    pub seed: u64,
    pub sigma: f64,
}

impl<T: Scalar> RandomFeatureParams<T> {
    pub fn new(input_dim: usize, feature_dim: usize, sigma: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::sample(input_dim, feature_dim, sigma, seed, &mut rng)
    }

    /// Draws fresh parameters of the same shape from `rng`.
    pub fn resampled(&self, rng: &mut ChaCha8Rng) -> Self {
        Self::sample(self.input_dim(), self.feature_dim(), self.sigma, self.seed, rng).unwrap()
    }

    fn sample(input_dim: usize, feature_dim: usize, sigma: f64, seed: u64, rng: &mut ChaCha8Rng) -> Result<Self> {
        if input_dim == 0 || feature_dim == 0 {
            return Err(Error::Config(format!("random features need D, d ≥ 1, got D={feature_dim}, d={input_dim}")));
        }
        if !(sigma > 0.0) {
            return Err(Error::Config(format!("random feature bandwidth must be positive, got {sigma}")));
        }
        let projection = Tensor::from_fn(&[feature_dim, input_dim], |_| {
            let z: f64 = StandardNormal.sample(rng);
            T::lit(z / sigma)
        });
        let phase = Tensor::from_fn(&[feature_dim], |_| T::lit(rng.gen_range(0.0..std::f64::consts::TAU)));
        Ok(RandomFeatureParams { projection, phase, seed, sigma })
    }

    pub fn input_dim(&self) -> usize {
        self.projection.shape()[1]
    }

    pub fn feature_dim(&self) -> usize {
        self.projection.shape()[0]
    }

    /// Applies the map to each row of an `N×d` batch.
    pub fn forward(&self, x: &Var<T>) -> Var<T> {
        let amp = T::lit((2.0 / self.feature_dim() as f64).sqrt());
        let w = Var::constant(self.projection.clone());
        let b = Var::constant(self.phase.clone());
        x.linear(&w, Some(&b)).cos().scale(amp)
    }
}

/// Feature vector of a single input.
pub fn random_feature_map<T: Scalar>(v: &[T], params: &RandomFeatureParams<T>) -> Result<Vec<T>> {
    let d = params.input_dim();
    if v.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: v.len() });
    }
    let dim = params.feature_dim();
    let amp = T::lit((2.0 / dim as f64).sqrt());
    let w = params.projection.data();
    Ok((0..dim)
        .map(|i| {
            let dot: T = w[i * d..(i + 1) * d].iter().zip(v).map(|(&a, &b)| a * b).sum();
            amp * (dot + params.phase.data()[i]).cos()
        })
        .collect())
}
