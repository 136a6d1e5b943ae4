use std::fs;
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};

use clap::Args;
use dfunet::features::{
    extract_features, resize_patch, write_feature_csv, FeatureConfig, FeatureSidecar, FeatureTable, Which,
};
use dfunet::metrics::{self, ScoredSample};
use dfunet::netzoo::{
    build_dfunet, build_lenet, init_params, load_checkpoint, save_checkpoint, DfunetVariant, NetworkSpec, MAGIC,
};
use dfunet::optim::{evaluate, train_with, Sample, TrainConfig};
use dfunet::pipeline::{
    apply_normalizer, augment_patch, augmented_count, fit_normalizer, load_patch, make_folds_with, read_manifest,
    scan_dataset, to_gray, write_manifest, write_ppm, write_synthetic_dataset, DatasetManifest, FoldOptions, FoldPlan,
    Holdout, ImageBuffer, ManifestEntry, Normalizer, Partition,
};
use dfunet::svm::{svm_decision, train_svm, KernelSpec, SmoParams, SvmModel};
use dfunet::Tensor;
use log::{info, warn};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::{HoldoutArg, KernelArg, SeedArg};

fn read(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn absolute(path: &Path) -> CliResult<PathBuf> {
    std::path::absolute(path).map_err(|e| CliError::io(path, e))
}

/// Writes `manifest` to `out` with paths relative to `out`'s directory where possible.
fn save_manifest(manifest: &DatasetManifest, out: &Path) -> CliResult<()> {
    let out = absolute(out)?;
    let base = out.parent().unwrap_or(Path::new("/"));
    let mut abs = manifest.clone();
    for e in &mut abs.entries {
        e.path = absolute(&e.path)?;
    }
    write(&out, write_manifest(&abs, base)?)
}

fn startup<T: Serialize>(command: &str, config: &T) {
    info!(
        "{command} configuration: {}",
        serde_json::to_string(config).expect("plain data")
    );
}

pub fn manifest(root: &Path, out: &Path, classes: &[String]) -> CliResult<()> {
    let m = scan_dataset(root, classes)?;
    save_manifest(&m, out)?;
    println!("{} patches in {} classes", m.len(), classes.len());
    Ok(())
}

pub fn synth(out: &Path, n: usize, size: usize, seed: u64) -> CliResult<()> {
    startup("synth", &serde_json::json!({ "n": n, "size": size, "seed": seed }));
    if n == 0 || size < 8 {
        return Err(CliError::input("synth needs n ≥ 1 and size ≥ 8"));
    }
    let m = write_synthetic_dataset(out, n, size, seed)?;
    save_manifest(&m, &out.join("manifest.csv"))?;
    println!("{} synthetic patches written to {}", m.len(), out.display());
    Ok(())
}

pub fn folds(manifest: &Path, k: usize, holdout: HoldoutArg, per_patch: bool, out: &Path, seed: u64) -> CliResult<()> {
    let holdout = match holdout {
        HoldoutArg::Kfold => Holdout::Kfold,
        HoldoutArg::Split => Holdout::Split85_5_10,
    };
    let opts = FoldOptions {
        k,
        holdout,
        seed,
        per_patch,
    };
    startup(
        "folds",
        &serde_json::json!({ "k": k, "holdout": holdout, "seed": seed, "per_patch": per_patch }),
    );
    let m = read_manifest(manifest)?;
    let outcome = make_folds_with(&m, &opts)?;
    for w in &outcome.warnings {
        warn!("{w}");
    }
    write(out, outcome.plan.to_json())?;
    println!("{} folds over {} patches", outcome.plan.folds.len(), m.len());
    Ok(())
}

pub fn augment(input: &Path, out: &Path, classes: &[String], seed: u64) -> CliResult<()> {
    startup("augment", &serde_json::json!({ "classes": classes, "seed": seed }));
    let m = scan_dataset(input, classes)?;
    let mut entries = Vec::with_capacity(augmented_count(m.len()));
    for e in &m.entries {
        let patch = load_patch(e)?;
        let stem = e
            .path
            .file_stem()
            .expect("scanned .ppm file")
            .to_string_lossy()
            .into_owned();
        let dir = out.join(&classes[e.label]);
        for aug in augment_patch(&patch, seed)? {
            let kind = aug.provenance.to_string();
            let path = dir.join(format!("{stem}-{}.ppm", kind.trim_start_matches("augmented:")));
            write(&path, write_ppm(&aug.image)?)?;
            entries.push(ManifestEntry {
                path,
                label: aug.label,
                source_id: aug.source_id,
            });
        }
    }
    let aug = DatasetManifest::new(entries, classes.to_vec())?;
    save_manifest(&aug, &out.join("manifest.csv"))?;
    println!("originals {} outputs {}", m.len(), aug.len());
    Ok(())
}

pub fn features(manifest: &Path, which: &str, out: &Path) -> CliResult<()> {
    let which: Which = which.parse()?;
    let config = FeatureConfig::default();
    startup("features", &serde_json::json!({ "which": which, "config": config }));
    let m = read_manifest(manifest)?;
    let mut table = FeatureTable::default();
    let mut layout = Vec::new();
    for e in &m.entries {
        let v = extract_features(&load_patch(e)?.image, which, &config)?;
        table.push(e.path.to_string_lossy(), e.label, v.values)?;
        layout = v.layout;
    }
    write(out, write_feature_csv(&table)?)?;
    let sidecar = FeatureSidecar {
        which,
        config,
        dim: layout.iter().map(|s| s.len).sum(),
        layout,
    };
    write(&out.with_extension("json"), serde_json::to_string_pretty(&sidecar)?)?;
    println!("{} rows × {} features", table.rows.len(), sidecar.dim);
    Ok(())
}

#[derive(Debug, Args)]
pub struct SvmTrainArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long = "C", default_value_t = 1.0)]
    c: f64,
    #[arg(long, value_enum, default_value = "linear")]
    kernel: KernelArg,
    /// RBF width; defaults to 1 / feature count.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
    #[arg(long, default_value_t = 100)]
    max_passes: usize,
    /// Restrict training to one fold's train split (needs --manifest and --fold).
    #[arg(long, requires_all = ["manifest", "fold"])]
    folds: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    fold: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

pub fn svm_train(a: &SvmTrainArgs) -> CliResult<()> {
    let mut table = dfunet::features::parse_feature_csv(&read(&a.features)?)?;
    if let (Some(plan), Some(manifest), Some(k)) = (&a.folds, &a.manifest, a.fold) {
        let m = read_manifest(manifest)?;
        let fold = FoldPlan::from_json(&read(plan)?)?.fold(k)?.clone();
        let keep: std::collections::HashSet<String> = fold
            .select(&m, Partition::Train)
            .iter()
            .map(|e| e.path.to_string_lossy().into_owned())
            .collect();
        let mut kept = FeatureTable::default();
        for ((id, label), row) in table.ids.iter().zip(&table.labels).zip(table.rows) {
            if keep.contains(id) {
                kept.push(id.clone(), *label, row)?;
            }
        }
        table = kept;
    }
    if table.rows.is_empty() {
        return Err(CliError::input("no training rows"));
    }
    let kernel = match a.kernel {
        KernelArg::Linear => KernelSpec::Linear,
        KernelArg::Rbf => KernelSpec::Rbf {
            gamma: a.gamma.unwrap_or(1.0 / table.dim().max(1) as f64),
        },
    };
    let params = SmoParams {
        c: a.c,
        kernel,
        tol: a.tol,
        max_passes: a.max_passes,
    };
    startup(
        "svm-train",
        &serde_json::json!({ "params": params, "rows": table.rows.len(), "dim": table.dim() }),
    );
    let model = train_svm(&table.rows, &table.labels, &params)?;
    if !model.meta.converged {
        warn!(
            "stopped after {} passes with KKT violation {:e}",
            model.meta.passes, model.meta.kkt_violation
        );
    }
    write(&a.out, model.to_json())?;
    let sidecar = a.features.with_extension("json");
    if sidecar.exists() {
        write(&a.out.with_extension("features.json"), read(&sidecar)?)?;
    }
    println!("{} support vectors, b = {}", model.coef.len(), model.b);
    Ok(())
}

#[derive(Debug, Clone, Copy, Serialize)]
enum Arch {
    Dfunet(DfunetVariant),
    Lenet,
}

fn parse_arch(s: &str) -> CliResult<Arch> {
    if s == "lenet" {
        return Ok(Arch::Lenet);
    }
    match s.strip_prefix("dfunet-") {
        Some(v) => Ok(Arch::Dfunet(v.parse()?)),
        None => Err(CliError::input(format!(
            "unknown architecture {s:?}; expected dfunet-base, dfunet-v1..v5 or lenet"
        ))),
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// dfunet-base, dfunet-v1 … dfunet-v5 or lenet.
    #[arg(long)]
    arch: String,
    #[arg(long)]
    folds: PathBuf,
    #[arg(long)]
    fold: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Step-down interval as a fraction of all iterations.
    #[arg(long)]
    step: Option<f64>,
    /// Square DFUNet input side (LeNet is fixed at 28).
    #[arg(long, default_value_t = 224)]
    input_size: usize,
    #[command(flatten)]
    seed: SeedArg,
}

/// Grayscale for one-channel networks, then a bilinear resize to the network input.
fn to_input(img: &ImageBuffer, shape: [usize; 3]) -> CliResult<Tensor> {
    let [c, h, w] = shape;
    let img = if c == 1 { to_gray(img)? } else { img.clone() };
    if img.channels() != c {
        return Err(CliError::input(format!(
            "patch has {} channels, network expects {c}",
            img.channels()
        )));
    }
    Ok(resize_patch(&img, w, h)?.to_tensor())
}

fn load_samples(entries: &[&ManifestEntry], shape: [usize; 3]) -> CliResult<Vec<Sample>> {
    entries
        .iter()
        .map(|e| {
            Ok(Sample {
                input: to_input(&load_patch(e)?.image, shape)?,
                label: e.label,
            })
        })
        .collect()
}

fn normalize(samples: &mut [Sample], n: &Normalizer) -> CliResult<()> {
    for s in samples {
        s.input = apply_normalizer(n, &s.input)?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct EpochLog {
    epoch: usize,
    iteration: usize,
    lr: f64,
    loss: f64,
    train_accuracy: f64,
    val_loss: Option<f64>,
    val_accuracy: Option<f64>,
}

pub fn train(a: &TrainArgs) -> CliResult<()> {
    let arch = parse_arch(&a.arch)?;
    let m = read_manifest(&a.manifest)?;
    let classes = m.class_names.len().max(2);
    let (spec, defaults) = match arch {
        Arch::Dfunet(v) => (
            build_dfunet(v, [3, a.input_size, a.input_size], classes)?,
            TrainConfig::dfunet(),
        ),
        Arch::Lenet => (build_lenet(classes)?, TrainConfig::lenet()),
    };
    let config = TrainConfig {
        epochs: a.epochs.unwrap_or(defaults.epochs),
        batch_size: a.batch_size.unwrap_or(defaults.batch_size),
        base_lr: a.lr.unwrap_or(defaults.base_lr),
        gamma: a.gamma.unwrap_or(defaults.gamma),
        step_fraction: a.step.unwrap_or(defaults.step_fraction),
        seed: a.seed.seed,
    };
    startup(
        "train",
        &serde_json::json!({ "arch": arch, "input": spec.input, "classes": classes, "config": config, "fold": a.fold }),
    );

    let plan = FoldPlan::from_json(&read(&a.folds)?)?;
    let fold = plan.fold(a.fold)?;
    let mut train_set = load_samples(&fold.select(&m, Partition::Train), spec.input)?;
    let mut val_set = load_samples(&fold.select(&m, Partition::Val), spec.input)?;
    if train_set.is_empty() {
        return Err(CliError::input(format!("fold {} has an empty training split", a.fold)));
    }
    let normalizer = fit_normalizer(train_set.iter().map(|s| &s.input))?;
    normalize(&mut train_set, &normalizer)?;
    normalize(&mut val_set, &normalizer)?;
    info!("{} training and {} validation patches", train_set.len(), val_set.len());

    let mut log = Vec::new();
    let mut val_error = None;
    let outcome = train_with(
        &spec,
        init_params(&spec, config.seed),
        &train_set,
        &config,
        |r, params| {
            let (mut val_loss, mut val_accuracy) = (None, None);
            if !val_set.is_empty() {
                match evaluate(&spec, params, &val_set, config.batch_size) {
                    Ok(ev) => {
                        val_loss = Some(ev.loss);
                        val_accuracy = Some(ev.accuracy);
                    }
                    Err(e) => {
                        val_error = Some(e);
                        return ControlFlow::Break(());
                    }
                }
            }
            info!(
                "epoch {} lr {:.1e} loss {:.5} train acc {:.4} val loss {} val acc {}",
                r.epoch,
                r.lr,
                r.loss,
                r.train_accuracy,
                val_loss.map_or("-".into(), |v| format!("{v:.5}")),
                val_accuracy.map_or("-".into(), |v| format!("{v:.4}")),
            );
            log.push(EpochLog {
                epoch: r.epoch,
                iteration: r.iteration,
                lr: r.lr,
                loss: r.loss,
                train_accuracy: r.train_accuracy,
                val_loss,
                val_accuracy,
            });
            ControlFlow::Continue(())
        },
    )?;
    if let Some(e) = val_error {
        return Err(e.into());
    }
    if let Some((name, _)) = outcome
        .params
        .iter()
        .find(|(_, t)| t.data().iter().any(|&v| !(v as f32).is_finite()))
    {
        return Err(CliError {
            code: crate::error::EXIT_NUMERIC,
            message: format!("parameter {name} is not finite in 32-bit precision"),
        });
    }
    save_checkpoint(&a.out, &spec, &outcome.params, Some(&outcome.optimizer))
        .map_err(|e| CliError::input(format!("{}: {e}", a.out.display())))?;
    write(
        &a.out.with_extension("normalizer.json"),
        serde_json::to_string(&normalizer)?,
    )?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in &log {
        w.serialize(row).map_err(|e| CliError::input(e.to_string()))?;
    }
    write(
        &a.out.with_extension("log.csv"),
        w.into_inner().map_err(|e| CliError::input(e.to_string()))?,
    )?;
    println!("checkpoint written to {}", a.out.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// CNN checkpoint or SVM model JSON.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    folds: PathBuf,
    #[arg(long)]
    fold: usize,
    /// Metrics JSON.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    scores: PathBuf,
}

fn cnn_scores(
    spec: &NetworkSpec,
    model: &Path,
    entries: &[&ManifestEntry],
    params: &dfunet::netzoo::Params,
) -> CliResult<Vec<f64>> {
    if spec.classes != 2 {
        return Err(CliError::input(format!(
            "scores need a 2-class network, checkpoint has {} classes",
            spec.classes
        )));
    }
    let norm_path = model.with_extension("normalizer.json");
    let normalizer: Normalizer = serde_json::from_slice(&read(&norm_path)?)?;
    let mut samples = load_samples(entries, spec.input)?;
    normalize(&mut samples, &normalizer)?;
    let ev = evaluate(spec, params, &samples, 8)?;
    Ok(ev.probs.iter().map(|p| p[1]).collect())
}

fn svm_scores(model_path: &Path, bytes: &[u8], entries: &[&ManifestEntry]) -> CliResult<Vec<f64>> {
    let model = SvmModel::from_json(bytes)?;
    let sidecar_path = model_path.with_extension("features.json");
    let sidecar: FeatureSidecar = serde_json::from_slice(&read(&sidecar_path)?)?;
    if sidecar.dim != model.dim() {
        return Err(CliError::input(format!(
            "{} describes {} features, model has {}",
            sidecar_path.display(),
            sidecar.dim,
            model.dim()
        )));
    }
    entries
        .iter()
        .map(|e| {
            let v = extract_features(&load_patch(e)?.image, sidecar.which, &sidecar.config)?;
            Ok(svm_decision(&model, &v.values)?)
        })
        .collect()
}

pub fn eval(a: &EvalArgs) -> CliResult<()> {
    let m = read_manifest(&a.manifest)?;
    let plan = FoldPlan::from_json(&read(&a.folds)?)?;
    let entries = plan.fold(a.fold)?.select(&m, Partition::Test);
    if entries.is_empty() {
        return Err(CliError::input(format!("fold {} has an empty test split", a.fold)));
    }
    let bytes = read(&a.model)?;
    let (scores, threshold) = if bytes.starts_with(MAGIC) {
        let ckpt = load_checkpoint(&a.model)?;
        startup(
            "eval",
            &serde_json::json!({ "model": "cnn", "input": ckpt.spec.input, "fold": a.fold }),
        );
        (cnn_scores(&ckpt.spec, &a.model, &entries, &ckpt.params)?, 0.5)
    } else {
        startup("eval", &serde_json::json!({ "model": "svm", "fold": a.fold }));
        (svm_scores(&a.model, &bytes, &entries)?, 0.0)
    };
    let samples: Vec<ScoredSample> = entries
        .iter()
        .zip(scores)
        .map(|(e, score)| ScoredSample {
            id: e.path.to_string_lossy().into_owned(),
            label: e.label,
            score,
        })
        .collect();
    write(&a.scores, metrics::write_scores_csv(&samples)?)?;
    let summary = metrics::summarize(&samples, threshold)?;
    write(&a.out, serde_json::to_string_pretty(&summary)?)?;
    println!(
        "{} test patches, auc {:.4}, accuracy {:.4}",
        samples.len(),
        summary.auc,
        summary.accuracy
    );
    Ok(())
}

pub fn report(scores: &[PathBuf], out: &Path, table: &Path) -> CliResult<()> {
    let mut curves = Vec::new();
    for path in scores {
        let samples =
            metrics::parse_scores_csv(&read(path)?).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        let name = path
            .file_stem()
            .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
        let curve = metrics::roc_curve(&samples).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        curves.push((name, curve));
    }
    let named: Vec<(&str, &metrics::RocCurve)> = curves.iter().map(|(n, c)| (n.as_str(), c)).collect();
    write(out, metrics::roc_svg(&named))?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::input(e.to_string());
    w.write_record(["model", "auc", "se", "ci_low", "ci_high"])
        .map_err(csv_err)?;
    for (name, curve) in &curves {
        let r = metrics::curve_auc(curve);
        w.write_record([
            name.clone(),
            r.auc.to_string(),
            r.se.to_string(),
            r.ci95.0.to_string(),
            r.ci95.1.to_string(),
        ])
        .map_err(csv_err)?;
        println!(
            "{name}: auc {:.4} se {:.4} ci95 {:.4} - {:.4}",
            r.auc, r.se, r.ci95.0, r.ci95.1
        );
    }
    write(table, w.into_inner().map_err(|e| CliError::input(e.to_string()))?)?;
    Ok(())
}
