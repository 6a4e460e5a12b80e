use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};

use vertseg::data::synth::phantom_id;
use vertseg::data::{
    load_pair, load_volume, make_synthetic_dataset, prepare_slices, save_volume, scan_dataset, split_dataset, write_dataset,
    Phase, Plane, SliceCache, SliceOptions, REFERENCE_FRACTIONS,
};
use vertseg::eval::{
    evaluate, export_qualitative, predict_volume, run_ablation, AblationConfig, AblationData, AblationResult, MetricsReport,
    Provenance, ReportRow,
};
use vertseg::network::{Architecture, Model, ModelConfig};
use vertseg::training::{TrainData, Trainer};

use crate::cli::{AverageArg, GlobalArgs, ModelArg};
use crate::work::{model_config, train_config, DatasetInfo, Work};

pub fn synth(g: &GlobalArgs, n: usize, out: &Path) -> Result<()> {
    let seed = g.seed.unwrap_or(0);
    let items: Vec<_> = make_synthetic_dataset(n, seed)?
        .into_iter()
        .enumerate()
        .map(|(i, (img, mask))| (phantom_id(i), img, mask))
        .collect();
    let entries = write_dataset(out, &items)?;
    println!("wrote {} phantom pairs to {}", entries.len(), out.display());
    Ok(())
}

pub fn preprocess(g: &GlobalArgs, input: &Path, fractions: Option<Vec<f64>>) -> Result<()> {
    let work = Work::new(&g.work);
    let fractions = match fractions {
        Some(f) => [f[0], f[1], f[2]],
        None => REFERENCE_FRACTIONS,
    };
    let seed = g.seed.unwrap_or(0);
    let entries = scan_dataset(input)?;
    let split = split_dataset(&entries, fractions, seed)?;
    let opts = SliceOptions { size: Some(ModelConfig::for_scale(g.scale.into()).input_size), keep_empty: false };
    let mut samples = Vec::new();
    for (phase, e) in split.iter() {
        let (img, mask) = load_pair::<f32>(e).with_context(|| format!("loading volume {}", e.id))?;
        for plane in g.plane.planes() {
            samples.extend(prepare_slices(&img, &mask, plane, &e.id, phase, &opts)?);
        }
    }
    SliceCache::write(&work.cache_dir(), &samples)?;
    let ids = |p: Phase| split.get(p).iter().map(|e| e.id.clone()).collect::<Vec<_>>();
    let info = DatasetInfo {
        source: input.to_path_buf(),
        seed,
        fractions,
        train: ids(Phase::Train),
        valid: ids(Phase::Valid),
        test: ids(Phase::Test),
    };
    fs::write(work.dataset_file(), serde_json::to_vec_pretty(&info)?)?;
    let (a, b, c) = split.sizes();
    println!("cached {} slices ({a}/{b}/{c} train/valid/test volumes) in {}", samples.len(), work.cache_dir().display());
    Ok(())
}

pub fn train(g: &GlobalArgs, model: ModelArg, epochs: Option<usize>, resume: bool) -> Result<()> {
    let work = Work::new(&g.work);
    let arch: Architecture = model.into();
    let mut cfg = train_config(g)?;
    if let Some(e) = epochs {
        cfg.epochs = e;
    }
    cfg.validate()?;
    let mcfg = model_config(g, cfg.seed);
    let planes = g.plane.planes();
    let data = TrainData {
        train: work.slices(&planes, Phase::Train, mcfg.input_size)?,
        valid: work.slices(&planes, Phase::Valid, mcfg.input_size)?,
    };
    if data.train.is_empty() {
        bail!("no training slices for plane `{}` in {}", g.plane.name(), work.cache_dir().display());
    }
    let dir = work.model_dir(arch, g.plane);
    let mut trainer = if resume {
        Trainer::resume(&dir, cfg.clone()).with_context(|| format!("resuming from {}", dir.display()))?
    } else {
        Trainer::new(Model::new(arch, mcfg)?, cfg.clone())?
    };
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("train_config.toml"), cfg.to_toml())?;
    log::info!(
        "training {} on {} train / {} valid slices for {} epochs",
        arch.label(),
        data.train.len(),
        data.valid.len(),
        cfg.epochs
    );
    while !trainer.is_finished() {
        trainer.run_epoch(&data)?;
        trainer.save_checkpoint(&dir)?;
        trainer.history().write_csv(&dir.join("history.csv"))?;
    }
    let best = trainer.best_epoch().unwrap_or(0);
    let rec = &trainer.history().records[best];
    println!(
        "trained {} ({} epochs); best epoch {best} with valid F1 {:.4}; weights in {}",
        arch.label(),
        trainer.history().len(),
        rec.valid_f1,
        dir.display()
    );
    Ok(())
}

pub fn evaluate_cmd(g: &GlobalArgs, model: ModelArg, average: AverageArg, threshold: Option<f64>) -> Result<()> {
    let work = Work::new(&g.work);
    let arch: Architecture = model.into();
    let cfg = train_config(g)?;
    let threshold = threshold.unwrap_or(cfg.threshold);
    let info = work.dataset()?;
    let mut rows = Vec::new();
    for plane in g.plane.planes() {
        let (m, path) = work.trained_model(arch, plane)?;
        log::info!("evaluating {} on the {plane} plane", path.display());
        let mut plane_rows = Vec::new();
        for phase in [Phase::Valid, Phase::Test] {
            let samples = work.slices(&[plane], phase, m.config().input_size)?;
            if samples.is_empty() {
                bail!("no {phase} slices for the {plane} plane in {}", work.cache_dir().display());
            }
            let evaluation = evaluate(&m, &samples, threshold, average.into())?;
            plane_rows.push(ReportRow { model: arch.label().into(), plane, phase, evaluation });
        }
        let prov = Provenance::new(&(m.config(), &cfg), &info.id(), threshold, average.into());
        let report = MetricsReport::new(plane_rows, prov);
        report.write(&work.reports_dir(), &format!("eval-{}-{plane}", arch.label()))?;
        rows.extend(report.rows);
    }
    let prov = Provenance::new(&cfg, &info.id(), threshold, average.into());
    print!("{}", MetricsReport::new(rows, prov).to_markdown());
    Ok(())
}

pub fn predict(g: &GlobalArgs, input: &Path, out: &Path, model: ModelArg, weights: Option<&Path>, threshold: Option<f64>) -> Result<()> {
    let plane = match g.plane.planes().as_slice() {
        [p] => *p,
        _ => bail!("predict needs a single plane, not `{}`", g.plane.name()),
    };
    let cfg = train_config(g)?;
    let m = match weights {
        Some(p) => {
            if !p.exists() {
                bail!("missing weights: {} not found", p.display());
            }
            Model::<f32>::load(p).with_context(|| format!("loading {}", p.display()))?
        }
        None => Work::new(&g.work).trained_model(model.into(), plane)?.0,
    };
    if !input.exists() {
        bail!("missing input volume: {} not found", input.display());
    }
    let vol = load_volume::<f32>(input)?;
    let mask = predict_volume(&m, &vol, plane, threshold.unwrap_or(cfg.threshold))?;
    save_volume(&mask, out)?;
    let fg = mask.data().data().iter().filter(|&&v| v != 0.0).count();
    println!("wrote {} ({fg} foreground voxels of {})", out.display(), mask.data().numel());
    Ok(())
}

pub fn ablate(g: &GlobalArgs, seeds: &[u64], epochs: Option<usize>, average: AverageArg) -> Result<()> {
    let work = Work::new(&g.work);
    let base = train_config(g)?;
    let seeds = if seeds.is_empty() { vec![base.seed] } else { seeds.to_vec() };
    let planes = g.plane.planes();
    let size = model_config(g, 0).input_size;
    let data = AblationData {
        train: work.slices(&planes, Phase::Train, size)?,
        valid: work.slices(&planes, Phase::Valid, size)?,
        test: work.slices(&planes, Phase::Test, size)?,
    };
    let mut results = Vec::new();
    for &seed in &seeds {
        let mut train = base.clone();
        train.seed = seed;
        if let Some(e) = epochs {
            train.epochs = e;
        }
        let cfg = AblationConfig { model: model_config(g, seed), train, threshold: base.threshold, averaging: average.into() };
        let res = run_ablation(&cfg, &data)?;
        res.write(&work.ablation_dir().join(format!("seed-{seed}")))?;
        results.push(res);
    }
    let summary = ablation_summary(&results);
    fs::write(work.ablation_dir().join("summary.csv"), &summary)?;
    print!("{summary}");
    Ok(())
}

/// Mean F1 per model and augmentation setting over seeds.
fn ablation_summary(results: &[AblationResult]) -> String {
    let mut s = String::from("model,augmentation,seeds,mean_valid_f1,mean_test_f1\n");
    let mean = |m: &str, aug: bool, phase: Phase| {
        let v: Vec<f64> = results.iter().filter_map(|r| r.mean_f1(m, aug, phase)).collect();
        100.0 * v.iter().sum::<f64>() / v.len().max(1) as f64
    };
    for m in ["baseline", "plusplus"] {
        for aug in [true, false] {
            let on_off = if aug { "on" } else { "off" };
            let (v, t) = (mean(m, aug, Phase::Valid), mean(m, aug, Phase::Test));
            writeln!(s, "{m},{on_off},{},{v:.6},{t:.6}", results.len()).unwrap();
        }
    }
    s
}

pub fn report(g: &GlobalArgs, qualitative: Option<usize>) -> Result<()> {
    let work = Work::new(&g.work);
    let dir = work.reports_dir();
    let mut paths: Vec<_> = match fs::read_dir(&dir) {
        Ok(rd) => rd
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
                name.starts_with("eval-") && name.ends_with(".json")
            })
            .collect(),
        Err(_) => Vec::new(),
    };
    if paths.is_empty() {
        bail!("missing evaluation results: no eval-*.json in {} (run `vertseg evaluate` first)", dir.display());
    }
    paths.sort();
    let reports = paths.iter().map(|p| MetricsReport::read_json(p)).collect::<vertseg::Result<Vec<_>>>()?;
    let merged = MetricsReport::merge(reports)?;
    merged.write(&dir, "metrics")?;
    print!("{}", merged.to_markdown());
    if let Some(n) = qualitative {
        for plane in g.plane.planes() {
            export_grid(&work, plane, n)?;
        }
    }
    Ok(())
}

fn export_grid(work: &Work, plane: Plane, n: usize) -> Result<()> {
    let (b, _) = work.trained_model(Architecture::Baseline, plane)?;
    let (p, _) = work.trained_model(Architecture::PlusPlus, plane)?;
    if b.config().input_size != p.config().input_size {
        bail!("baseline and plusplus models for the {plane} plane use different input sizes");
    }
    let all = work.slices(&[plane], Phase::Test, b.config().input_size)?;
    if all.is_empty() || n == 0 {
        bail!("no test slices for the {plane} plane to export");
    }
    let step = (all.len() / n).max(1);
    let picked: Vec<_> = all.into_iter().step_by(step).take(n).collect();
    let path = work.reports_dir().join(format!("qualitative-{plane}.png"));
    let threshold = vertseg::eval::DEFAULT_THRESHOLD;
    export_qualitative(&b, &p, &picked, threshold, &path)?;
    println!("wrote {}", path.display());
    Ok(())
}
