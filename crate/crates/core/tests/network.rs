use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vertseg::network::{count_parameters, Architecture, Model, ModelConfig};
use vertseg::nn::{ParamBuilder, ParamStore, Session};
use vertseg::{Error, Tensor, Var};

fn image(h: usize, w: usize, seed: u64) -> Tensor<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(&[1, h, w], |_| rng.gen_range(-1.0..1.0))
}

fn in_open_unit(t: &Tensor<f32>) -> bool {
    t.data().iter().all(|&v| v > 0.0 && v < 1.0)
}

#[test]
fn desk_models_produce_masks_of_input_size() {
    for arch in [Architecture::PlusPlus, Architecture::Baseline] {
        let model = Model::<f32>::new(arch, ModelConfig::desk()).unwrap();
        let out = model.forward(&image(64, 64, 1)).unwrap();
        assert_eq!(out.mask1.shape(), &[1, 64, 64]);
        assert_eq!(out.mask2.shape(), &[1, 64, 64]);
        assert!(in_open_unit(&out.mask1) && in_open_unit(&out.mask2));
    }
}

#[test]
fn desk_forward_is_fast() {
    let model = Model::<f32>::plusplus(ModelConfig::desk()).unwrap();
    let x = image(64, 64, 2);
    model.forward(&x).unwrap();
    let start = std::time::Instant::now();
    model.forward(&x).unwrap();
    assert!(start.elapsed().as_secs_f64() < 1.0, "desk forward took {:?}", start.elapsed());
}

#[test]
fn indivisible_input_is_rejected_with_required_multiple() {
    let model = Model::<f32>::plusplus(ModelConfig::desk()).unwrap();
    let err = model.forward(&image(60, 60, 1)).unwrap_err();
    assert!(matches!(err, Error::Shape(_)));
    assert!(err.to_string().contains("spatial size must be divisible by 16"), "{err}");
}

#[test]
fn forward_is_bitwise_deterministic() {
    let model = Model::<f32>::plusplus(ModelConfig::desk()).unwrap();
    let x = image(32, 48, 3);
    assert_eq!(model.forward(&x).unwrap(), model.forward(&x).unwrap());
    let again = Model::<f32>::plusplus(ModelConfig::desk()).unwrap();
    assert_eq!(model.forward(&x).unwrap(), again.forward(&x).unwrap());
}

#[test]
fn zero_image_gives_zero_second_network_input() {
    let model = Model::<f32>::plusplus(ModelConfig::desk()).unwrap();
    let s = Session::eval(model.store());
    let out = model.forward_graph(&s, &Var::constant(Tensor::zeros(&[1, 1, 32, 32]))).unwrap();
    assert!(out.net2_input.value().data().iter().all(|&v| v == 0.0));
    assert!(in_open_unit(out.mask1.value()));
}

#[test]
fn single_conv_parameter_count() {
    let mut store = ParamStore::<f32>::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    vertseg::nn::Conv2d::new(&mut ParamBuilder::new(&mut store, &mut rng), 1, 8, 3, 1, true);
    assert_eq!(store.trainable_count(), 80);
}

#[test]
fn parameter_counts_order() {
    let pp_full = Model::<f32>::plusplus(ModelConfig::full()).unwrap();
    let base_full = Model::<f32>::baseline(ModelConfig::full()).unwrap();
    let pp_desk = Model::<f32>::plusplus(ModelConfig::desk()).unwrap();
    let base_desk = Model::<f32>::baseline(ModelConfig::desk()).unwrap();
    println!("full: plusplus {} baseline {}", count_parameters(&pp_full), count_parameters(&base_full));
    assert!(count_parameters(&pp_full) < count_parameters(&base_full));
    assert!(count_parameters(&pp_desk) < count_parameters(&pp_full));
    assert!(count_parameters(&base_desk) < count_parameters(&base_full));
}

#[test]
fn parameter_count_is_monotone_in_widths() {
    let base = ModelConfig::desk();
    let count = |cfg: &ModelConfig| {
        (
            Model::<f32>::plusplus(cfg.clone()).unwrap().count_parameters(),
            Model::<f32>::baseline(cfg.clone()).unwrap().count_parameters(),
        )
    };
    let (pp0, b0) = count(&base);
    let mut variants = Vec::new();
    for i in 0..4 {
        let mut c = base.clone();
        c.encoder2_channels[i] += 4;
        variants.push(c);
        let mut c = base.clone();
        c.decoder_channels[i] += 8;
        variants.push(c);
        let mut c = base.clone();
        c.encoder1.block_depths[i] += 1;
        variants.push(c);
    }
    for i in 0..5 {
        let mut c = base.clone();
        c.vgg_channels[i] += 4;
        variants.push(c);
    }
    let mut c = base.clone();
    c.encoder1.growth_rate += 4;
    variants.push(c);
    let mut c = base.clone();
    c.block_cfg.out_channels += 4;
    variants.push(c);
    for cfg in &variants {
        let (pp, b) = count(cfg);
        assert!(pp >= pp0 && b >= b0);
        assert!(pp > pp0 || b > b0);
    }
}

#[test]
fn weights_round_trip_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.vsw");
    let mut cfg = ModelConfig::desk();
    cfg.init_seed = 5;
    let model = Model::<f32>::plusplus(cfg.clone()).unwrap();
    model.save_weights(&path).unwrap();
    let x = image(64, 64, 9);
    let expected = model.forward(&x).unwrap();

    let mut fresh = Model::<f32>::plusplus(ModelConfig { init_seed: 5, ..ModelConfig::desk() }).unwrap();
    for v in fresh.store_mut().get_mut(model.first_conv_weight()).data_mut() {
        *v = 0.0;
    }
    fresh.load_weights(&path).unwrap();
    assert_eq!(fresh.forward(&x).unwrap(), expected);
    assert!(fresh.store().bit_identical(model.store()));
    assert_eq!(Model::<f32>::load(&path).unwrap().forward(&x).unwrap(), expected);
}

#[test]
fn loading_with_other_config_lists_fields() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.vsw");
    Model::<f32>::plusplus(ModelConfig::desk()).unwrap().save_weights(&path).unwrap();
    let mut cfg = ModelConfig::desk();
    cfg.encoder2_channels = vec![12, 16, 32, 64];
    let mut other = Model::<f32>::plusplus(cfg).unwrap();
    match other.load_weights(&path).unwrap_err() {
        Error::ConfigMismatch { fields } => assert_eq!(fields, vec!["encoder2_channels".to_string()]),
        e => panic!("unexpected error {e}"),
    }
}

#[test]
fn loading_other_architecture_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.vsw");
    Model::<f32>::plusplus(ModelConfig::desk()).unwrap().save_weights(&path).unwrap();
    let mut base = Model::<f32>::baseline(ModelConfig::desk()).unwrap();
    assert!(matches!(base.load_weights(&path), Err(Error::ArchitectureMismatch { .. })));
}

#[test]
fn corrupt_archive_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.vsw");
    Model::<f32>::plusplus(ModelConfig::desk()).unwrap().save_weights(&path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 10]).unwrap();
    assert!(matches!(Model::<f32>::load(&path), Err(Error::CorruptArchive(_))));
    std::fs::write(&path, b"not an archive").unwrap();
    assert!(matches!(Model::<f32>::load(&path), Err(Error::CorruptArchive(_))));
}

#[test]
fn gradient_reaches_first_encoder_conv() {
    for arch in [Architecture::PlusPlus, Architecture::Baseline] {
        let model = Model::<f32>::new(arch, ModelConfig::desk()).unwrap();
        let s = Session::train(model.store());
        let out = model.forward_graph(&s, &Var::constant(image(32, 32, 4).reshape(&[1, 1, 32, 32]).unwrap())).unwrap();
        let grads = out.mask2.mean().backward();
        let g = s.gradients(&grads);
        let first = g[model.first_conv_weight().index()].as_ref().expect("first conv gradient");
        assert!(first.l2_norm() > 0.0, "{arch:?}");
    }
}

#[test]
fn models_are_shareable_across_threads() {
    fn assert_send_sync<S: Send + Sync>() {}
    assert_send_sync::<Model<f32>>();
    let model = std::sync::Arc::new(Model::<f32>::plusplus(ModelConfig::desk()).unwrap());
    let x = image(32, 32, 1);
    let expected = model.forward(&x).unwrap();
    let handles: Vec<_> = (0..2)
        .map(|_| {
            let (m, x) = (model.clone(), x.clone());
            std::thread::spawn(move || m.forward(&x).unwrap())
        })
        .collect();
    for h in handles {
        assert_eq!(h.join().unwrap(), expected);
    }
}

#[test]
fn config_validation_rejects_bad_shapes() {
    let mut cfg = ModelConfig::desk();
    cfg.decoder_channels.pop();
    assert!(Model::<f32>::plusplus(cfg).is_err());
    let mut cfg = ModelConfig::desk();
    cfg.block_cfg.out_channels = 18;
    assert!(Model::<f32>::plusplus(cfg.clone()).is_err());
    assert!(Model::<f32>::baseline(cfg).is_ok());
}

#[test]
fn full_models_at_256() {
    for arch in [Architecture::PlusPlus, Architecture::Baseline] {
        let model = Model::<f32>::new(arch, ModelConfig::full()).unwrap();
        let start = std::time::Instant::now();
        let out = model.forward(&image(256, 256, 7)).unwrap();
        println!("{arch:?} full 256 forward {:?}", start.elapsed());
        assert_eq!(out.mask2.shape(), &[1, 256, 256]);
        assert!(in_open_unit(&out.mask1) && in_open_unit(&out.mask2));
    }
}
