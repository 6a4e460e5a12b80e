use crate::autograd::Var;
use crate::blocks::{apply_eval, BlockConfig, FeatureMap};
use crate::error::{Error, Result};
use crate::nn::{Conv2d, Linear, ParamBuilder, ParamStore, Session};
use crate::scalar::Scalar;

/// Pyramid squeeze attention: channel groups pass through convolutions of
/// increasing kernel size, a shared squeeze-excite unit scores each group's
/// channels, and a softmax across groups decides how much each group keeps.
#[derive(Clone, Debug)]
pub struct Psa {
    convs: Vec<Conv2d>,
    fc1: Linear,
    fc2: Linear,
    pub channels: usize,
    pub groups: usize,
}

impl Psa {
    pub fn new<T: Scalar>(b: &mut ParamBuilder<'_, T>, channels: usize, cfg: &BlockConfig) -> Result<Self> {
        cfg.validate()?;
        let groups = cfg.psa_groups;
        if channels % groups != 0 {
            return Err(Error::Config(format!("{groups} PSA groups do not divide {channels} channels")));
        }
        let width = channels / groups;
        let convs = cfg
            .psa_kernel_sizes
            .iter()
            .enumerate()
            .map(|(i, &k)| Conv2d::new(&mut b.sub(&format!("conv{i}")), width, width, k, 1, true))
            .collect();
        let hidden = (width / cfg.se_reduction).max(1);
        Ok(Psa {
            convs,
            fc1: Linear::new(&mut b.sub("se.fc1"), width, hidden),
            fc2: Linear::new(&mut b.sub("se.fc2"), hidden, width),
            channels,
            groups,
        })
    }

    /// Output and the `N×S×(C/S)` cross-group attention weights.
    pub fn forward_with_weights<T: Scalar>(&self, s: &Session<'_, T>, x: &Var<T>) -> (Var<T>, Var<T>) {
        let n = x.shape()[0];
        let width = self.channels / self.groups;
        let feats: Vec<Var<T>> = self
            .convs
            .iter()
            .enumerate()
            .map(|(i, conv)| conv.forward(s, &x.narrow(1, i * width, width)))
            .collect();
        let scores: Vec<Var<T>> = feats
            .iter()
            .map(|f| {
                let h = self.fc1.forward(s, &f.global_avg_pool()).relu();
                self.fc2.forward(s, &h).sigmoid().reshape(&[n, 1, width])
            })
            .collect();
        let weights = Var::concat(&scores, 1).softmax(1);
        let scaled: Vec<Var<T>> = feats
            .iter()
            .enumerate()
            .map(|(i, f)| f.mul_bcast(&weights.narrow(1, i, 1).reshape(&[n, width, 1, 1])))
            .collect();
        (Var::concat(&scaled, 1), weights)
    }

    pub fn forward<T: Scalar>(&self, s: &Session<'_, T>, x: &Var<T>) -> Var<T> {
        self.forward_with_weights(s, x).0
    }

    /// Output of group `i`'s convolution alone, before attention.
    pub fn group_conv<T: Scalar>(&self, s: &Session<'_, T>, x: &Var<T>, i: usize) -> Var<T> {
        let width = self.channels / self.groups;
        self.convs[i].forward(s, &x.narrow(1, i * width, width))
    }

    pub fn apply<T: Scalar>(&self, store: &ParamStore<T>, x: &FeatureMap<T>) -> Result<FeatureMap<T>> {
        apply_eval(store, x, self.channels, |s, v| self.forward(s, v))
    }
}
