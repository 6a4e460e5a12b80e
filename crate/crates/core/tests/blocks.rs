use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vertseg::blocks::*;
use vertseg::gradcheck::check_gradient;
use vertseg::nn::{ParamBuilder, ParamStore, Session};
use vertseg::{Tensor, Var};

fn store_and_rng<T: vertseg::Scalar>(seed: u64) -> (ParamStore<T>, ChaCha8Rng) {
    (ParamStore::new(), ChaCha8Rng::seed_from_u64(seed))
}

fn feature_map(c: usize, h: usize, w: usize, seed: u64) -> FeatureMap<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    FeatureMap::new(Tensor::from_fn(&[c, h, w], |_| rng.gen_range(-2.0..2.0))).unwrap()
}

fn small_cfg(out: usize) -> BlockConfig {
    BlockConfig { out_channels: out, rf_dim: 16, ..BlockConfig::default() }
}

#[test]
fn conv_block_shapes_and_rectified_range() {
    for &(c, h, w, out) in &[(4, 16, 16, 8), (3, 7, 5, 3), (1, 64, 64, 32)] {
        let (mut store, mut rng) = store_and_rng::<f64>(0);
        let block = ConvBlock::new(&mut ParamBuilder::new(&mut store, &mut rng), c, out).unwrap();
        let y = block.apply(&store, &feature_map(c, h, w, 1)).unwrap();
        assert_eq!(y.tensor().shape(), &[out, h, w]);
        assert!(y.tensor().min() >= 0.0);
    }
}

#[test]
fn conv_block_rejects_zero_width() {
    let (mut store, mut rng) = store_and_rng::<f32>(0);
    assert!(ConvBlock::new(&mut ParamBuilder::new(&mut store, &mut rng), 4, 0).is_err());
}

#[test]
fn aspp_output_shape_and_rate_clamping() {
    let cfg = BlockConfig { out_channels: 16, ..BlockConfig::default() };
    let (mut store, mut rng) = store_and_rng::<f64>(2);
    let aspp = Aspp::new(&mut ParamBuilder::new(&mut store, &mut rng), 16, &cfg).unwrap();
    let y = aspp.apply(&store, &feature_map(16, 32, 32, 3)).unwrap();
    assert_eq!(y.tensor().shape(), &[16, 32, 32]);

    assert_eq!(clamp_rates(&[1, 6, 12, 18], 8, 8), (vec![1, 6, 7, 7], true));
    assert_eq!(clamp_rates(&[1, 6, 12, 18], 32, 32), (vec![1, 6, 12, 18], false));

    let (mut store, mut rng) = store_and_rng::<f64>(2);
    let cfg = BlockConfig { out_channels: 8, ..BlockConfig::default() };
    let aspp = Aspp::new(&mut ParamBuilder::new(&mut store, &mut rng), 8, &cfg).unwrap();
    let y = aspp.apply(&store, &feature_map(8, 8, 8, 3)).unwrap();
    assert_eq!(y.tensor().shape(), &[8, 8, 8]);
    assert!(y.tensor().all_finite());
}

#[test]
fn aspp_constant_input_gives_uniform_output() {
    let cfg = BlockConfig { out_channels: 4, ..BlockConfig::default() };
    let (mut store, mut rng) = store_and_rng::<f64>(5);
    let aspp = Aspp::new(&mut ParamBuilder::new(&mut store, &mut rng), 3, &cfg).unwrap();
    let x = FeatureMap::new(Tensor::full(&[3, 16, 16], 0.75)).unwrap();
    let s = Session::eval(&store);
    let branch = aspp.pooled_branch(&s, &x.to_batch());
    let single = aspp.pooled_branch(&s, &Var::constant(Tensor::full(&[1, 3, 1, 1], 0.75)));
    assert_eq!(branch.shape(), &[1, 4, 16, 16]);
    for (i, &v) in branch.value().data().iter().enumerate() {
        assert_eq!(v, single.value().data()[i / 256]);
    }
    assert_eq!(aspp.apply(&store, &x).unwrap().tensor().shape(), &[4, 16, 16]);
}

#[test]
fn spatial_attention_structure() {
    let (mut store, mut rng) = store_and_rng::<f64>(4);
    let sa = SpatialAttention::new(&mut ParamBuilder::new(&mut store, &mut rng));
    let x = feature_map(8, 16, 16, 9);
    let (y, m) = sa.apply(&store, &x).unwrap();
    assert_eq!(y.tensor().shape(), &[8, 16, 16]);
    assert_eq!(m.tensor().shape(), &[1, 16, 16]);
    assert!(m.tensor().data().iter().all(|&v| v > 0.0 && v < 1.0));
    // Rebuilding F' = M ⊗ F from the returned pair reproduces the output.
    let rebuilt = Tensor::from_fn(&[8, 16, 16], |i| m.tensor().data()[i % 256] * x.tensor().data()[i]);
    assert_eq!(&rebuilt, y.tensor());
}

#[test]
fn spatial_attention_constant_map_for_spatially_constant_input() {
    let (mut store, mut rng) = store_and_rng::<f64>(4);
    let sa = SpatialAttention::new(&mut ParamBuilder::new(&mut store, &mut rng));
    let x = FeatureMap::new(Tensor::from_fn(&[4, 16, 16], |i| (i / 256) as f64 - 1.5)).unwrap();
    // Without padding effects the map would be exactly uniform; the 7×7 conv
    // pads with zeros, so check the interior where the kernel fits.
    let (_, m) = sa.apply(&store, &x).unwrap();
    let centre = m.tensor().at(&[0, 8, 8]);
    for r in 3..13 {
        for c in 3..13 {
            assert!((m.tensor().at(&[0, r, c]) - centre).abs() < 1e-12);
        }
    }
}

#[test]
fn random_feature_map_zero_projection_and_bounds() {
    let params = RandomFeatureParams::<f64> {
        projection: Tensor::zeros(&[4, 3]),
        phase: Tensor::zeros(&[4]),
        seed: 0,
        sigma: 1.0,
    };
    let z = random_feature_map(&[0.3, -2.0, 5.0], &params).unwrap();
    for v in z {
        assert!((v - 0.5f64.sqrt()).abs() < 1e-15);
    }
    let params = RandomFeatureParams::<f64>::new(5, 32, 0.7, 11).unwrap();
    let bound = (2.0f64 / 32.0).sqrt();
    let z = random_feature_map(&[10.0, -3.0, 0.0, 1.0, 2.0], &params).unwrap();
    assert!(z.iter().all(|v| v.abs() <= bound + 1e-15));
    assert!(random_feature_map(&[1.0, 2.0], &params).is_err());
}

#[test]
fn random_features_are_seed_deterministic() {
    let a = RandomFeatureParams::<f32>::new(8, 64, 1.0, 42).unwrap();
    let b = RandomFeatureParams::<f32>::new(8, 64, 1.0, 42).unwrap();
    assert_eq!(a, b);
    assert!(RandomFeatureParams::<f32>::new(0, 64, 1.0, 42).is_err());
    assert!(RandomFeatureParams::<f32>::new(8, 64, 0.0, 42).is_err());
}

#[test]
fn random_features_approximate_gaussian_kernel() {
    let params = RandomFeatureParams::<f64>::new(8, 1024, 1.0, 2024).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut total = 0.0;
    for _ in 0..100 {
        let x: Vec<f64> = (0..8).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let y: Vec<f64> = (0..8).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let (fx, fy) = (random_feature_map(&x, &params).unwrap(), random_feature_map(&y, &params).unwrap());
        let approx: f64 = fx.iter().zip(&fy).map(|(a, b)| a * b).sum();
        let dist2: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum();
        total += (approx - (-dist2 / 2.0).exp()).abs();
    }
    assert!(total / 100.0 < 0.1, "mean kernel error {}", total / 100.0);
}

#[test]
fn squeeze_excite_shape_gate_and_determinism() {
    let (mut store, mut rng) = store_and_rng::<f64>(6);
    let params = RandomFeatureParams::new(32, 64, 1.0, 3).unwrap();
    let kind = SqueezeKind::RandomFeatures { params, resample_per_forward: false };
    let se = SqueezeExcite::new(&mut ParamBuilder::new(&mut store, &mut rng), 32, 8, kind).unwrap();
    let x = feature_map(32, 8, 8, 1);
    let y = se.apply(&store, &x).unwrap();
    assert_eq!(y.tensor().shape(), &[32, 8, 8]);
    assert!(y.tensor().data().iter().zip(x.tensor().data()).all(|(a, b)| a.abs() <= b.abs()));
    assert_eq!(y, se.apply(&store, &x).unwrap());
    let s = Session::eval(&store);
    let w = se.weights(&s, &x.to_batch());
    assert!(w.value().data().iter().all(|&v| v > 0.0 && v < 1.0));
}

#[test]
fn squeeze_excite_rejects_empty_bottleneck() {
    let (mut store, mut rng) = store_and_rng::<f32>(6);
    let mut b = ParamBuilder::new(&mut store, &mut rng);
    assert!(SqueezeExcite::new(&mut b, 4, 8, SqueezeKind::Plain).is_err());
    let params = RandomFeatureParams::new(5, 16, 1.0, 3).unwrap();
    let kind = SqueezeKind::RandomFeatures { params, resample_per_forward: false };
    assert!(SqueezeExcite::new(&mut b, 16, 4, kind).is_err());
}

#[test]
fn resampling_changes_training_outputs_only_when_enabled() {
    let (mut store, mut rng) = store_and_rng::<f64>(6);
    let params = RandomFeatureParams::new(16, 32, 1.0, 3).unwrap();
    let kind = SqueezeKind::RandomFeatures { params, resample_per_forward: true };
    let se = SqueezeExcite::new(&mut ParamBuilder::new(&mut store, &mut rng), 16, 4, kind).unwrap();
    let x = feature_map(16, 4, 4, 1).to_batch();
    let frozen = se.forward(&Session::eval(&store), &x);
    let train = Session::train(&store).with_resample_rng(ChaCha8Rng::seed_from_u64(1));
    let a = se.forward(&train, &x);
    let b = se.forward(&train, &x);
    assert_ne!(a.value(), b.value());
    assert_ne!(a.value(), frozen.value());
}

#[test]
fn psa_shape_and_softmax_normalisation() {
    let cfg = BlockConfig::default();
    let (mut store, mut rng) = store_and_rng::<f64>(8);
    let psa = Psa::new(&mut ParamBuilder::new(&mut store, &mut rng), 16, &cfg).unwrap();
    let x = feature_map(16, 16, 16, 2);
    assert_eq!(psa.apply(&store, &x).unwrap().tensor().shape(), &[16, 16, 16]);
    let (_, w) = psa.forward_with_weights(&Session::eval(&store), &x.to_batch());
    assert_eq!(w.shape(), &[1, 4, 4]);
    let wd = w.value().data();
    for j in 0..4 {
        let total: f64 = (0..4).map(|g| wd[g * 4 + j]).sum();
        assert!((total - 1.0).abs() < 1e-6);
        assert!((0..4).all(|g| wd[g * 4 + j] > 0.0 && wd[g * 4 + j] < 1.0));
    }
}

#[test]
fn psa_single_group_keeps_conv_output() {
    let cfg = BlockConfig { psa_groups: 1, psa_kernel_sizes: vec![3], ..BlockConfig::default() };
    let (mut store, mut rng) = store_and_rng::<f64>(8);
    let psa = Psa::new(&mut ParamBuilder::new(&mut store, &mut rng), 8, &cfg).unwrap();
    let x = feature_map(8, 6, 6, 2).to_batch();
    let s = Session::eval(&store);
    assert_eq!(psa.forward(&s, &x).value(), psa.group_conv(&s, &x, 0).value());
}

#[test]
fn psa_rejects_bad_configs() {
    let (mut store, mut rng) = store_and_rng::<f32>(8);
    let mut b = ParamBuilder::new(&mut store, &mut rng);
    assert!(Psa::new(&mut b, 10, &BlockConfig::default()).is_err());
    let even = BlockConfig { psa_kernel_sizes: vec![3, 4, 7, 9], ..BlockConfig::default() };
    assert!(Psa::new(&mut b, 16, &even).is_err());
}

#[test]
fn block_config_validation() {
    assert!(BlockConfig::default().validate().is_ok());
    assert!(BlockConfig { aspp_rates: vec![1, 6, 12], ..BlockConfig::default() }.validate().is_err());
    assert!(BlockConfig { psa_groups: 3, ..BlockConfig::default() }.validate().is_err());
}

#[test]
fn blocks_are_bitwise_deterministic() {
    let cfg = small_cfg(8);
    let (mut store, mut rng) = store_and_rng::<f32>(12);
    let mut b = ParamBuilder::new(&mut store, &mut rng);
    let conv = ConvBlock::new(&mut b.sub("c"), 4, 8).unwrap();
    let aspp = Aspp::new(&mut b.sub("a"), 8, &cfg).unwrap();
    let sa = SpatialAttention::new(&mut b.sub("s"));
    let psa = Psa::new(&mut b.sub("p"), 8, &BlockConfig { psa_groups: 2, psa_kernel_sizes: vec![3, 5], ..cfg }).unwrap();
    let x = FeatureMap::new(Tensor::from_fn(&[4, 16, 16], |i| ((i as f32) * 0.37).sin())).unwrap();
    let run = || {
        let a = conv.apply(&store, &x).unwrap();
        let a = aspp.apply(&store, &a).unwrap();
        let (a, _) = sa.apply(&store, &a).unwrap();
        psa.apply(&store, &a).unwrap()
    };
    assert_eq!(run(), run());
}

// Finite-difference checks on the input gradient of sum(outputs).

fn grad_ok(report: vertseg::gradcheck::GradCheckReport) {
    assert!(report.pass_fraction() >= 0.95, "pass fraction {} worst {}", report.pass_fraction(), report.worst_relative_error);
}

/// Moves zero-initialised biases and batch-norm affines off their defaults,
/// which otherwise park many pre-activations exactly on ReLU kinks.
fn jitter(store: &mut ParamStore<f64>, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        let name = store.entry(id).name.clone();
        if name.ends_with("bias") || name.ends_with("beta") || name.ends_with("gamma") {
            for v in store.get_mut(id).data_mut() {
                *v += rng.gen_range(-0.3..0.3);
            }
        }
    }
}

fn toy_input(c: usize, seed: u64) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(&[1, c, 6, 6], |_| rng.gen_range(-1.0..1.0))
}

#[test]
fn conv_block_gradient() {
    let (mut store, mut rng) = store_and_rng::<f64>(21);
    let block = ConvBlock::new(&mut ParamBuilder::new(&mut store, &mut rng), 3, 4).unwrap();
    jitter(&mut store, 7);
    grad_ok(check_gradient(&toy_input(3, 1), |x| block.forward(&Session::train(&store), x).sum(), 1e-3, 1e-3));
}

#[test]
fn spatial_attention_gradient() {
    let (mut store, mut rng) = store_and_rng::<f64>(22);
    let sa = SpatialAttention::new(&mut ParamBuilder::new(&mut store, &mut rng));
    jitter(&mut store, 7);
    grad_ok(check_gradient(&toy_input(4, 2), |x| sa.forward(&Session::eval(&store), x).0.sum(), 1e-3, 1e-3));
}

#[test]
fn psa_gradient() {
    let cfg = BlockConfig { psa_groups: 2, psa_kernel_sizes: vec![3, 5], se_reduction: 2, ..BlockConfig::default() };
    let (mut store, mut rng) = store_and_rng::<f64>(23);
    let psa = Psa::new(&mut ParamBuilder::new(&mut store, &mut rng), 8, &cfg).unwrap();
    jitter(&mut store, 7);
    grad_ok(check_gradient(&toy_input(8, 3), |x| psa.forward(&Session::eval(&store), x).sum(), 1e-3, 1e-3));
}

#[test]
fn squeeze_excite_rf_gradient() {
    let (mut store, mut rng) = store_and_rng::<f64>(24);
    let params = RandomFeatureParams::new(8, 16, 1.0, 5).unwrap();
    let kind = SqueezeKind::RandomFeatures { params, resample_per_forward: false };
    let se = SqueezeExcite::new(&mut ParamBuilder::new(&mut store, &mut rng), 8, 4, kind).unwrap();
    jitter(&mut store, 7);
    grad_ok(check_gradient(&toy_input(8, 4), |x| se.forward(&Session::eval(&store), x).sum(), 1e-3, 1e-3));
}

#[test]
fn aspp_gradient() {
    let cfg = BlockConfig { out_channels: 4, aspp_rates: vec![1, 2, 3, 4], ..BlockConfig::default() };
    let (mut store, mut rng) = store_and_rng::<f64>(25);
    let aspp = Aspp::new(&mut ParamBuilder::new(&mut store, &mut rng), 3, &cfg).unwrap();
    jitter(&mut store, 7);
    grad_ok(check_gradient(&toy_input(3, 5), |x| aspp.forward(&Session::eval(&store), x).sum(), 1e-3, 1e-3));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn attention_weights_stay_in_open_unit_interval(seed in 0u64..1000, h in 1usize..10, w in 1usize..10, scale in 0.1f64..50.0) {
        let (mut store, mut rng) = store_and_rng::<f64>(seed);
        let mut b = ParamBuilder::new(&mut store, &mut rng);
        let sa = SpatialAttention::new(&mut b.sub("sa"));
        let se = SqueezeExcite::new(&mut b.sub("se"), 8, 4, SqueezeKind::Plain).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(seed + 1);
        let x = FeatureMap::new(Tensor::from_fn(&[8, h, w], |_| r.gen_range(-scale..scale))).unwrap();
        let (y, m) = sa.apply(&store, &x).unwrap();
        prop_assert_eq!(y.tensor().shape(), x.tensor().shape());
        prop_assert!(m.tensor().data().iter().all(|&v| v > 0.0 && v < 1.0));
        let s = Session::eval(&store);
        let gate = se.weights(&s, &x.to_batch());
        prop_assert!(gate.value().data().iter().all(|&v| v > 0.0 && v < 1.0));
        let gated = se.apply(&store, &x).unwrap();
        prop_assert_eq!(gated.tensor().shape(), x.tensor().shape());
    }

    #[test]
    fn psa_weights_sum_to_one(seed in 0u64..1000, groups in 1usize..5, width in 1usize..4) {
        let kernels: Vec<usize> = (0..groups).map(|i| 2 * i + 1).collect();
        let cfg = BlockConfig { psa_groups: groups, psa_kernel_sizes: kernels, ..BlockConfig::default() };
        let (mut store, mut rng) = store_and_rng::<f64>(seed);
        let c = groups * width;
        let psa = Psa::new(&mut ParamBuilder::new(&mut store, &mut rng), c, &cfg).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let x = Var::constant(Tensor::from_fn(&[2, c, 5, 5], |_| r.gen_range(-3.0..3.0)));
        let (y, wts) = psa.forward_with_weights(&Session::eval(&store), &x);
        prop_assert_eq!(y.shape(), x.shape());
        let wd = wts.value().data();
        for n in 0..2 {
            for j in 0..width {
                let total: f64 = (0..groups).map(|g| wd[(n * groups + g) * width + j]).sum();
                prop_assert!((total - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn conv_block_preserves_any_spatial_size(h in 1usize..12, w in 1usize..12, c in 1usize..4, out in 1usize..6) {
        let (mut store, mut rng) = store_and_rng::<f32>(1);
        let block = ConvBlock::new(&mut ParamBuilder::new(&mut store, &mut rng), c, out).unwrap();
        let x = FeatureMap::new(Tensor::from_fn(&[c, h, w], |i| (i as f32 * 0.7).cos())).unwrap();
        let y = block.apply(&store, &x).unwrap();
        prop_assert_eq!(y.tensor().shape(), &[out, h, w]);
        prop_assert!(y.tensor().min() >= 0.0);
    }
}
