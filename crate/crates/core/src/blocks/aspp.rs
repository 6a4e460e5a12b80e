use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use crate::autograd::Var;
use crate::blocks::{apply_eval, BlockConfig, FeatureMap};
use crate::error::Result;
use crate::nn::{BatchNorm2d, Conv2d, ParamBuilder, ParamStore, Session};
use crate::scalar::Scalar;

/// Clamps every dilation rate to `min(h, w) - 1` (at least 1). Returns the
/// effective rates and whether anything changed.
pub fn clamp_rates(rates: &[usize], h: usize, w: usize) -> (Vec<usize>, bool) {
    let limit = h.min(w).saturating_sub(1).max(1);
    let clamped: Vec<usize> = rates.iter().map(|&r| if r >= h.min(w) { limit } else { r.max(1) }).collect();
    let changed = clamped.as_slice() != rates;
    (clamped, changed)
}

/// Conv → BN → ReLU unit used by every ASPP branch.
#[derive(Clone, Debug)]
struct Branch {
    conv: Conv2d,
    bn: BatchNorm2d,
}

impl Branch {
    fn new<T: Scalar>(b: &mut ParamBuilder<'_, T>, cin: usize, cout: usize, kernel: usize, rate: usize) -> Self {
        Branch {
            conv: Conv2d::new(&mut b.sub("conv"), cin, cout, kernel, rate, false),
            bn: BatchNorm2d::new(&mut b.sub("bn"), cout),
        }
    }

    fn forward<T: Scalar>(&self, s: &Session<'_, T>, x: &Var<T>, dilation: usize) -> Var<T> {
        let mut conv = self.conv.clone();
        conv.dilation = dilation;
        self.bn.forward(s, &conv.forward(s, x)).relu()
    }
}

/// Atrous spatial pyramid pooling: an image-pooling branch, a 1×1 branch and
/// three dilated 3×3 branches, concatenated and projected.
#[derive(Clone, Debug)]
pub struct Aspp {
    pooled: Branch,
    point: Branch,
    dilated: Vec<Branch>,
    project: Branch,
    rates: Vec<usize>,
    pub in_channels: usize,
    pub out_channels: usize,
    warned: Arc<AtomicBool>,
}

impl Aspp {
    pub fn new<T: Scalar>(b: &mut ParamBuilder<'_, T>, in_channels: usize, cfg: &BlockConfig) -> Result<Self> {
        cfg.validate()?;
        let out = cfg.out_channels;
        let dilated = cfg.aspp_rates[1..]
            .iter()
            .enumerate()
            .map(|(i, &r)| Branch::new(&mut b.sub(&format!("dilated{i}")), in_channels, out, 3, r))
            .collect();
        Ok(Aspp {
            pooled: Branch::new(&mut b.sub("pooled"), in_channels, out, 1, 1),
            point: Branch::new(&mut b.sub("point"), in_channels, out, 1, 1),
            dilated,
            project: Branch::new(&mut b.sub("project"), out * BlockConfig::ASPP_BRANCHES, out, 1, 1),
            rates: cfg.aspp_rates.clone(),
            in_channels,
            out_channels: out,
            warned: Arc::new(AtomicBool::new(false)),
        })
    }

    pub fn rates(&self) -> &[usize] {
        &self.rates
    }

    pub fn forward<T: Scalar>(&self, s: &Session<'_, T>, x: &Var<T>) -> Var<T> {
        let shape = x.shape().to_vec();
        let (h, w) = (shape[2], shape[3]);
        let (rates, changed) = clamp_rates(&self.rates[1..], h, w);
        if changed && !self.warned.swap(true, Ordering::Relaxed) {
            log::warn!("ASPP dilation rates {:?} exceed the {h}×{w} input; clamped to {rates:?}", &self.rates[1..]);
        }
        let mut parts = vec![self.pooled_branch(s, x), self.point.forward(s, x, 1)];
        for (branch, &r) in self.dilated.iter().zip(&rates) {
            parts.push(branch.forward(s, x, r));
        }
        self.project.forward(s, &Var::concat(&parts, 1), 1)
    }

    /// Image-pooling branch: global average, 1×1 conv, broadcast back to H×W.
    pub fn pooled_branch<T: Scalar>(&self, s: &Session<'_, T>, x: &Var<T>) -> Var<T> {
        let &[n, c, h, w] = x.shape() else { panic!("ASPP expects N×C×H×W input") };
        let pooled = x.global_avg_pool().reshape(&[n, c, 1, 1]);
        self.pooled.forward(s, &pooled, 1).broadcast_to(&[n, self.out_channels, h, w])
    }

    pub fn apply<T: Scalar>(&self, store: &ParamStore<T>, x: &FeatureMap<T>) -> Result<FeatureMap<T>> {
        apply_eval(store, x, self.in_channels, |s, v| self.forward(s, v))
    }
}
