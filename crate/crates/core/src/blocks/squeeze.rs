use crate::autograd::Var;
use crate::blocks::{apply_eval, FeatureMap, RandomFeatureParams};
use crate::error::{Error, Result};
use crate::nn::{Linear, ParamBuilder, ParamStore, Session};
use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub enum SqueezeKind<T> {
    /// Dense layers act on the pooled descriptor directly.
    Plain,
    /// The pooled descriptor is lifted through random Fourier features first.
    RandomFeatures { params: RandomFeatureParams<T>, resample_per_forward: bool },
}

/// Channel gating: pooled descriptor → dense + ReLU → dense + sigmoid → scale.
#[derive(Clone, Debug)]
pub struct SqueezeExcite<T> {
    kind: SqueezeKind<T>,
    fc1: Linear,
    fc2: Linear,
    pub channels: usize,
}

impl<T: Scalar> SqueezeExcite<T> {
    pub fn new(b: &mut ParamBuilder<'_, T>, channels: usize, reduction: usize, kind: SqueezeKind<T>) -> Result<Self> {
        let hidden = if reduction == 0 { 0 } else { channels / reduction };
        if hidden < 1 {
            return Err(Error::Config(format!(
                "squeeze block with {channels} channels and reduction {reduction} leaves no hidden units"
            )));
        }
        let input = match &kind {
            SqueezeKind::Plain => channels,
            SqueezeKind::RandomFeatures { params, .. } => {
                if params.input_dim() != channels {
                    return Err(Error::DimensionMismatch { expected: channels, got: params.input_dim() });
                }
                params.feature_dim()
            }
        };
        Ok(SqueezeExcite {
            fc1: Linear::new(&mut b.sub("fc1"), input, hidden),
            fc2: Linear::new(&mut b.sub("fc2"), hidden, channels),
            kind,
            channels,
        })
    }

    pub fn kind(&self) -> &SqueezeKind<T> {
        &self.kind
    }

    /// Per-channel weights, `N×C` in (0, 1).
    pub fn weights(&self, s: &Session<'_, T>, x: &Var<T>) -> Var<T> {
        let pooled = x.global_avg_pool();
        let z = match &self.kind {
            SqueezeKind::Plain => pooled,
            SqueezeKind::RandomFeatures { params, resample_per_forward } => {
                let fresh = (*resample_per_forward && s.is_training())
                    .then(|| s.with_resample(|rng| rng.map(|r| params.resampled(r))))
                    .flatten();
                fresh.as_ref().unwrap_or(params).forward(&pooled)
            }
        };
        let h = self.fc1.forward(s, &z).relu();
        self.fc2.forward(s, &h).sigmoid()
    }

    pub fn forward(&self, s: &Session<'_, T>, x: &Var<T>) -> Var<T> {
        let (n, c) = (x.shape()[0], x.shape()[1]);
        x.mul_bcast(&self.weights(s, x).reshape(&[n, c, 1, 1]))
    }

    pub fn apply(&self, store: &ParamStore<T>, x: &FeatureMap<T>) -> Result<FeatureMap<T>> {
        apply_eval(store, x, self.channels, |s, v| self.forward(s, v))
    }
}
