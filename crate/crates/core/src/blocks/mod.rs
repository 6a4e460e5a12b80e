//! Building blocks shared by both networks: conv blocks, ASPP, spatial
//! attention, pyramid squeeze attention and channel squeeze-excitation with
//! optional random Fourier features.
//!
//! Every block works on batched `N×C×H×W` graph values. [`FeatureMap`] is the
//! single-sample view used by the `apply` helpers.

mod aspp;
mod conv_block;
mod psa;
mod random_features;
mod spatial;
mod squeeze;

pub use aspp::{clamp_rates, Aspp};
pub use conv_block::ConvBlock;
pub use psa::Psa;
pub use random_features::{random_feature_map, RandomFeatureParams};
pub use spatial::{SpatialAttention, SPATIAL_KERNEL};
pub use squeeze::{SqueezeExcite, SqueezeKind};

use serde::{Deserialize, Serialize};

use crate::autograd::Var;
use crate::error::{Error, Result};
use crate::nn::{ParamStore, Session};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Hyperparameters shared by the attention and pyramid blocks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockConfig {
    /// Output width of ASPP (and therefore of the bottleneck attention blocks).
    pub out_channels: usize,
    /// Rates of the 1×1 branch and the three dilated 3×3 branches; the pooled
    /// branch is implicit.
    pub aspp_rates: Vec<usize>,
    pub psa_groups: usize,
    pub psa_kernel_sizes: Vec<usize>,
    pub se_reduction: usize,
    pub rf_dim: usize,
    pub rf_sigma: f64,
    #[serde(default)]
    pub rf_resample_per_forward: bool,
}

impl Default for BlockConfig {
    fn default() -> Self {
        BlockConfig {
            out_channels: 64,
            aspp_rates: vec![1, 6, 12, 18],
            psa_groups: 4,
            psa_kernel_sizes: vec![3, 5, 7, 9],
            se_reduction: 8,
            rf_dim: 64,
            rf_sigma: 1.0,
            rf_resample_per_forward: false,
        }
    }
}

impl BlockConfig {
    /// Number of parallel ASPP branches, the pooled one included.
    pub const ASPP_BRANCHES: usize = 5;

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.out_channels == 0 {
            return bad("out_channels must be positive".into());
        }
        if self.aspp_rates.len() + 1 != Self::ASPP_BRANCHES {
            return bad(format!("aspp_rates needs {} entries, got {}", Self::ASPP_BRANCHES - 1, self.aspp_rates.len()));
        }
        if self.aspp_rates.iter().any(|&r| r == 0) {
            return bad("aspp_rates must be positive".into());
        }
        if self.psa_groups == 0 || self.psa_kernel_sizes.len() != self.psa_groups {
            return bad(format!(
                "psa_kernel_sizes has {} entries for {} groups",
                self.psa_kernel_sizes.len(),
                self.psa_groups
            ));
        }
        if let Some(k) = self.psa_kernel_sizes.iter().find(|&&k| k % 2 == 0) {
            return bad(format!("psa kernel size {k} is even"));
        }
        if self.se_reduction == 0 || self.rf_dim == 0 {
            return bad("se_reduction and rf_dim must be positive".into());
        }
        if !(self.rf_sigma > 0.0) {
            return bad(format!("rf_sigma must be positive, got {}", self.rf_sigma));
        }
        Ok(())
    }
}

/// Activations of one sample, `C×H×W`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap<T> {
    data: Tensor<T>,
}

impl<T: Scalar> FeatureMap<T> {
    pub fn new(data: Tensor<T>) -> Result<Self> {
        match data.shape() {
            [c, h, w] if *c >= 1 && *h >= 1 && *w >= 1 => Ok(FeatureMap { data }),
            s => Err(Error::Shape(format!("feature map must be C×H×W with positive extents, got {s:?}"))),
        }
    }

    pub fn channels(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn height(&self) -> usize {
        self.data.shape()[1]
    }

    pub fn width(&self) -> usize {
        self.data.shape()[2]
    }

    pub fn tensor(&self) -> &Tensor<T> {
        &self.data
    }

    pub fn into_tensor(self) -> Tensor<T> {
        self.data
    }

    /// Batch of one, `1×C×H×W`.
    pub fn to_batch(&self) -> Var<T> {
        let mut shape = vec![1];
        shape.extend_from_slice(self.data.shape());
        Var::constant(self.data.clone().reshape(&shape).unwrap())
    }

    fn from_batch(v: &Var<T>) -> Result<Self> {
        let s = v.shape();
        if s.len() != 4 || s[0] != 1 {
            return Err(Error::Shape(format!("expected a batch of one, got {s:?}")));
        }
        let out = FeatureMap::new(v.value().clone().reshape(&s[1..])?)?;
        if !out.data.all_finite() {
            return Err(Error::InvalidInput("block produced non-finite activations".into()));
        }
        Ok(out)
    }
}

/// Spatial weighting map `1×H×W` with entries in (0, 1).
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialAttentionMap<T> {
    data: Tensor<T>,
}

impl<T: Scalar> SpatialAttentionMap<T> {
    pub fn tensor(&self) -> &Tensor<T> {
        &self.data
    }

    pub fn height(&self) -> usize {
        self.data.shape()[1]
    }

    pub fn width(&self) -> usize {
        self.data.shape()[2]
    }
}

/// Runs `f` on a single sample in evaluation mode.
fn apply_eval<T: Scalar>(
    store: &ParamStore<T>,
    x: &FeatureMap<T>,
    expected_channels: usize,
    f: impl FnOnce(&Session<'_, T>, &Var<T>) -> Var<T>,
) -> Result<FeatureMap<T>> {
    if x.channels() != expected_channels {
        return Err(Error::DimensionMismatch { expected: expected_channels, got: x.channels() });
    }
    let s = Session::eval(store);
    FeatureMap::from_batch(&f(&s, &x.to_batch()))
}
