//! The two-network segmentation model and its baseline.
//!
//! Network 1 encodes the image, refines the bottleneck and decodes a first
//! mask. Network 2 sees the image gated by that mask, has its own encoder and
//! decodes using skips from both encoders.

mod archive;
mod config;
mod decoder;
mod encoders;

pub use archive::{diff_fields, read_archive, restore_store, write_archive, Archive, Manifest, TensorIndex, MAGIC, SCHEMA_VERSION};
pub use config::{Architecture, DenseSpec, ModelConfig, Scale};
pub use decoder::Decoder;
pub use encoders::{DenseEncoder, EncoderOutput, FirstEncoder, PlainEncoder, VggEncoder};

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autograd::Var;
use crate::blocks::{Aspp, Psa, SpatialAttention};
use crate::error::{Error, Result};
use crate::nn::{Conv2d, ParamBuilder, ParamId, ParamStore, Session};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// ASPP followed, in the full model, by spatial attention and PSA.
#[derive(Clone, Debug)]
struct Bottleneck {
    aspp: Aspp,
    attention: Option<SpatialAttention>,
    psa: Option<Psa>,
}

impl Bottleneck {
    fn new<T: Scalar>(b: &mut ParamBuilder<'_, T>, in_channels: usize, cfg: &ModelConfig, arch: Architecture) -> Result<Self> {
        let aspp = Aspp::new(&mut b.sub("aspp"), in_channels, &cfg.block_cfg)?;
        let (attention, psa) = match arch {
            Architecture::PlusPlus => (
                Some(SpatialAttention::new(&mut b.sub("attention"))),
                Some(Psa::new(&mut b.sub("psa"), cfg.block_cfg.out_channels, &cfg.block_cfg)?),
            ),
            Architecture::Baseline => (None, None),
        };
        Ok(Bottleneck { aspp, attention, psa })
    }

    fn forward<T: Scalar>(&self, s: &Session<'_, T>, x: &Var<T>) -> Var<T> {
        let mut y = self.aspp.forward(s, x);
        if let Some(a) = &self.attention {
            y = a.forward(s, &y).0;
        }
        if let Some(p) = &self.psa {
            y = p.forward(s, &y);
        }
        y
    }
}

/// Graph-level outputs of one forward pass over an `N×C×H×W` batch.
pub struct GraphOutput<T: Scalar> {
    pub mask1: Var<T>,
    pub mask2: Var<T>,
    /// The gated image fed to the second encoder.
    pub net2_input: Var<T>,
}

/// Both masks of one image, each `1×H×W` with entries in (0, 1).
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkOutput<T> {
    pub mask1: Tensor<T>,
    pub mask2: Tensor<T>,
}

/// A built network together with its parameters.
#[derive(Clone, Debug)]
pub struct Model<T: Scalar> {
    arch: Architecture,
    config: ModelConfig,
    store: ParamStore<T>,
    encoder1: FirstEncoder,
    bottleneck1: Bottleneck,
    decoder1: Decoder<T>,
    head1: Conv2d,
    encoder2: PlainEncoder,
    bottleneck2: Bottleneck,
    decoder2: Decoder<T>,
    head2: Conv2d,
    first_conv: ParamId,
}

impl<T: Scalar> Model<T> {
    pub fn new(arch: Architecture, config: ModelConfig) -> Result<Self> {
        config.validate(arch)?;
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
        let mut root = ParamBuilder::new(&mut store, &mut rng);
        let cfg = &config;
        let rf = arch == Architecture::PlusPlus;

        let mut n1 = root.sub("net1");
        let encoder1 = match arch {
            Architecture::PlusPlus => FirstEncoder::Dense(DenseEncoder::new(&mut n1.sub("encoder"), cfg.in_channels, &cfg.encoder1)),
            Architecture::Baseline => FirstEncoder::Vgg(VggEncoder::new(
                &mut n1.sub("encoder"),
                cfg.in_channels,
                &cfg.vgg_channels,
                &cfg.vgg_depths,
            )),
        };
        let bottleneck1 = Bottleneck::new(&mut n1.sub("bottleneck"), encoder1.out_channels(), cfg, arch)?;
        let skips1: Vec<usize> = encoder1.skip_channels().iter().rev().copied().collect();
        let width = cfg.block_cfg.out_channels;
        let decoder1 = Decoder::new(&mut n1.sub("decoder"), width, &skips1, cfg, rf, 0)?;
        let head1 = Conv2d::new(&mut n1.sub("head"), cfg.decoder_channels[3], 1, 1, 1, true);

        let mut n2 = root.sub("net2");
        let encoder2 = PlainEncoder::new(&mut n2.sub("encoder"), cfg.in_channels, cfg)?;
        let last2 = *cfg.encoder2_channels.last().unwrap();
        let bottleneck2 = Bottleneck::new(&mut n2.sub("bottleneck"), last2, cfg, arch)?;
        let skips2: Vec<usize> = skips1
            .iter()
            .zip(cfg.encoder2_channels.iter().rev())
            .map(|(a, b)| a + b)
            .collect();
        let decoder2 = Decoder::new(&mut n2.sub("decoder"), width, &skips2, cfg, rf, 1)?;
        let head2 = Conv2d::new(&mut n2.sub("head"), cfg.decoder_channels[3], 1, 1, 1, true);

        let first_conv = store.ids().next().expect("model has parameters");
        Ok(Model {
            arch,
            config,
            store,
            encoder1,
            bottleneck1,
            decoder1,
            head1,
            encoder2,
            bottleneck2,
            decoder2,
            head2,
            first_conv,
        })
    }

    pub fn plusplus(config: ModelConfig) -> Result<Self> {
        Self::new(Architecture::PlusPlus, config)
    }

    pub fn baseline(config: ModelConfig) -> Result<Self> {
        Self::new(Architecture::Baseline, config)
    }

    pub fn architecture(&self) -> Architecture {
        self.arch
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn store(&self) -> &ParamStore<T> {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.store
    }

    /// Weight of the first convolution of encoder 1.
    pub fn first_conv_weight(&self) -> ParamId {
        self.first_conv
    }

    pub fn count_parameters(&self) -> usize {
        self.store.trainable_count()
    }

    fn check_input(&self, shape: &[usize]) -> Result<()> {
        let &[_, c, h, w] = shape else {
            return Err(Error::Shape(format!("expected N×C×H×W input, got {shape:?}")));
        };
        if c != self.config.in_channels {
            return Err(Error::DimensionMismatch { expected: self.config.in_channels, got: c });
        }
        let m = ModelConfig::SPATIAL_MULTIPLE;
        if h == 0 || w == 0 || h % m != 0 || w % m != 0 {
            return Err(Error::Shape(format!("spatial size must be divisible by {m}, got {h}×{w}")));
        }
        Ok(())
    }

    /// Forward pass building a graph in the given session.
    pub fn forward_graph(&self, s: &Session<'_, T>, x: &Var<T>) -> Result<GraphOutput<T>> {
        self.check_input(x.shape())?;
        let e1 = self.encoder1.forward(s, x);
        let skips1: Vec<Var<T>> = e1.skips.iter().rev().cloned().collect();
        let b1 = self.bottleneck1.forward(s, &e1.bottom);
        let d1 = self.decoder1.forward(s, &b1, &skips1.iter().map(|v| vec![v.clone()]).collect::<Vec<_>>());
        let mask1 = self.head1.forward(s, &d1).sigmoid();

        let net2_input = x.mul_bcast(&mask1);
        let e2 = self.encoder2.forward(s, &net2_input);
        let b2 = self.bottleneck2.forward(s, &e2.bottom);
        let skips2: Vec<Vec<Var<T>>> =
            skips1.iter().zip(e2.skips.iter().rev()).map(|(a, b)| vec![a.clone(), b.clone()]).collect();
        let d2 = self.decoder2.forward(s, &b2, &skips2);
        let mask2 = self.head2.forward(s, &d2).sigmoid();
        Ok(GraphOutput { mask1, mask2, net2_input })
    }

    /// Evaluation-mode masks for an `N×C×H×W` batch, each `N×1×H×W`.
    pub fn predict_batch(&self, images: &Tensor<T>) -> Result<(Tensor<T>, Tensor<T>)> {
        let s = Session::eval(&self.store);
        let out = self.forward_graph(&s, &Var::constant(images.clone()))?;
        Ok((out.mask1.value().clone(), out.mask2.value().clone()))
    }

    /// Evaluation-mode masks for one `C×H×W` image.
    pub fn forward(&self, image: &Tensor<T>) -> Result<NetworkOutput<T>> {
        let &[c, h, w] = image.shape() else {
            return Err(Error::Shape(format!("expected a C×H×W image, got {:?}", image.shape())));
        };
        let (m1, m2) = self.predict_batch(&image.clone().reshape(&[1, c, h, w])?)?;
        Ok(NetworkOutput { mask1: m1.reshape(&[1, h, w])?, mask2: m2.reshape(&[1, h, w])? })
    }

    pub fn save_weights(&self, path: &Path) -> Result<()> {
        write_archive(path, self.arch.tag(), serde_json::to_value(&self.config)?, &self.store)
    }

    /// Loads weights saved from a model of the same architecture and config.
    pub fn load_weights(&mut self, path: &Path) -> Result<()> {
        let archive = read_archive::<T>(path)?;
        if archive.manifest.architecture != self.arch.tag() {
            return Err(Error::ArchitectureMismatch {
                expected: self.arch.tag().to_string(),
                found: archive.manifest.architecture,
            });
        }
        let fields = diff_fields(&serde_json::to_value(&self.config)?, &archive.manifest.config);
        if !fields.is_empty() {
            return Err(Error::ConfigMismatch { fields });
        }
        restore_store(&mut self.store, archive.tensors)
    }

    /// Builds a model from the config embedded in an archive, then loads it.
    pub fn load(path: &Path) -> Result<Self> {
        let archive = read_archive::<T>(path)?;
        let arch = [Architecture::PlusPlus, Architecture::Baseline]
            .into_iter()
            .find(|a| a.tag() == archive.manifest.architecture)
            .ok_or_else(|| Error::CorruptArchive(format!("unknown architecture `{}`", archive.manifest.architecture)))?;
        let config: ModelConfig = serde_json::from_value(archive.manifest.config.clone())
            .map_err(|e| Error::CorruptArchive(format!("config: {e}")))?;
        let mut model = Self::new(arch, config)?;
        restore_store(&mut model.store, archive.tensors)?;
        Ok(model)
    }
}

/// Number of trainable scalars in a model.
pub fn count_parameters<T: Scalar>(model: &Model<T>) -> usize {
    model.count_parameters()
}
