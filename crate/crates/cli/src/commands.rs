use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use tsnet_core::corpus::{load_image_dir, write_synth_corpus, IngestReport};
use tsnet_core::evaluation::{
    evaluate_models, plot_robustness, read_report_csv, robustness_sweep, write_report,
    write_report_csv, EvalRow, Perturbation, ReportRow,
};
use tsnet_core::network::{load_model, save_model, train_stream, ModelParams};
use tsnet_core::transforms::{assemble_frequency_cube, write_fqc};
use tsnet_core::{ChromaConvention, Error, LabeledDataset, PlanarImage, RunConfig, Split};

use crate::args::{
    AugmentFlags, Cli, Command, CommonArgs, EvalArgs, ModelArgs, ReportArgs, RobustnessArgs,
    SynthArgs, TrainArgs, TransformArgs, TransformFlags,
};

pub const CONFIG_FILE: &str = "config.json";

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => synth(a),
        Command::Transform(a) => transform(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Robustness(a) => robustness(a),
        Command::Report(a) => report(a),
    }
}

/// 2 for configuration mistakes, 1 for everything else (I/O, bad data).
pub fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::InvalidConfig(_)) => 2,
        _ => 1,
    }
}

fn resolve(common: &CommonArgs) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.set_seed(seed);
    }
    if common.workers.is_some() {
        cfg.workers = common.workers;
    }
    Ok(cfg)
}

fn apply_transform(cfg: &mut RunConfig, flags: &TransformFlags) {
    let t = &mut cfg.transform;
    if let Some(c) = flags.colorspace {
        t.colorspace = c;
    }
    if let Some(s) = flags.transforms {
        t.transforms = s;
    }
    if let Some(b) = flags.block_size {
        t.block_size = b;
    }
    if flags.chroma_swap {
        t.chroma = ChromaConvention::SwappedUnscaled;
    }
}

fn apply_augment(cfg: &mut RunConfig, flags: &AugmentFlags) {
    let a = &mut cfg.augment;
    if let Some(p) = flags.aug_prob {
        a.probability = p;
    }
    if let Some(r) = flags.aug_blur_range {
        a.blur_sigma_range = r;
    }
    if let Some(r) = flags.aug_jpeg_range {
        a.jpeg_quality_range = r;
    }
}

/// Validates, sizes the worker pool, and returns the config ready to use.
fn finish(cfg: RunConfig) -> Result<RunConfig> {
    cfg.validate()?;
    if let Some(n) = cfg.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    Ok(cfg)
}

fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".config.json");
    PathBuf::from(name)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    Ok(())
}

fn load_dir(dir: &Path) -> Result<LabeledDataset> {
    let IngestReport { dataset, skipped } = load_image_dir(dir)?;
    for s in &skipped {
        eprintln!("warning: skipped {}: {}", s.path.display(), s.reason);
    }
    if dataset.is_empty() {
        bail!(Error::Ingestion {
            origin: dir.display().to_string(),
            reason: "no decodable images".into(),
        });
    }
    Ok(dataset)
}

fn synth(a: SynthArgs) -> Result<()> {
    let mut cfg = resolve(&a.common)?;
    if let Some(size) = a.size {
        cfg.synth.size = size;
    }
    cfg.paths.insert("out".into(), a.out.clone());
    let cfg = finish(cfg)?;
    create_dir(&a.out)?;
    let per_class = [
        (Split::Train, a.n_train),
        (Split::Val, a.n_val),
        (Split::Test, a.n_test),
    ];
    let manifest = write_synth_corpus(&cfg.synth, &a.out, &per_class)?;
    cfg.save(&a.out.join(CONFIG_FILE))?;
    println!(
        "wrote {} images to {}",
        manifest.files.len(),
        a.out.display()
    );
    Ok(())
}

fn transform(a: TransformArgs) -> Result<()> {
    let mut cfg = resolve(&a.common)?;
    apply_transform(&mut cfg, &a.transform);
    cfg.paths.insert("in".into(), a.input.clone());
    cfg.paths.insert("out".into(), a.out.clone());
    let cfg = finish(cfg)?;
    let img = PlanarImage::open(&a.input)?;
    let cube = assemble_frequency_cube(&img, &cfg.transform)?;
    write_fqc(&a.out, &cube)?;
    cfg.save(&sidecar(&a.out))?;
    println!(
        "{}: {}x{}x{} ({})",
        a.out.display(),
        cube.height(),
        cube.width(),
        cube.channels(),
        cube.channel_order().join(",")
    );
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let mut cfg = resolve(&a.common)?;
    apply_transform(&mut cfg, &a.transform);
    apply_augment(&mut cfg, &a.augment);
    let t = &mut cfg.train;
    if let Some(v) = a.epochs {
        t.epochs = v;
    }
    if let Some(v) = a.batch_size {
        t.batch_size = v;
    }
    if let Some(v) = a.lr {
        t.learning_rate = v;
    }
    if let Some(v) = a.weight_decay {
        t.weight_decay = v;
    }
    if let Some(v) = a.image_size {
        t.image_size = v;
    }
    if let Some(v) = a.precision {
        t.precision = v;
    }
    cfg.paths.insert("data".into(), a.data.clone());
    cfg.paths.insert("out".into(), a.out.clone());
    let cfg = finish(cfg)?;

    let train = load_dir(&a.data.join(Split::Train.dir_name()))?;
    let val = load_dir(&a.data.join(Split::Val.dir_name()))?;
    let model = train_stream(
        a.stream,
        &train,
        &val,
        &cfg.train,
        &cfg.transform,
        &cfg.augment,
    )?;
    save_model(&a.out, &model)?;
    cfg.save(&sidecar(&a.out))?;
    let best = &model.summary.history[model.summary.best_epoch];
    println!(
        "{} stream: best epoch {} (val accuracy {:.4}, val loss {:.4}) -> {}",
        a.stream,
        best.epoch,
        best.val_accuracy,
        best.val_loss,
        a.out.display()
    );
    Ok(())
}

fn load_models(m: &ModelArgs) -> Result<Vec<(String, ModelParams)>> {
    let paths: Vec<&PathBuf> = match (&m.model, &m.model_a, &m.model_b) {
        (Some(p), None, None) => vec![p],
        (None, Some(a), Some(b)) => vec![a, b],
        _ => bail!(Error::invalid_config(
            "pass --model, or both --model-a and --model-b"
        )),
    };
    let models: Vec<ModelParams> = paths
        .iter()
        .map(|p| load_model(p))
        .collect::<tsnet_core::Result<_>>()?;
    let names: Vec<String> = models.iter().map(|m| m.stream.to_string()).collect();
    let unique = names.len() < 2 || names[0] != names[1];
    Ok(models
        .into_iter()
        .zip(names)
        .enumerate()
        .map(|(i, (m, n))| {
            let name = if unique {
                n
            } else {
                format!("model_{}", ["a", "b"][i])
            };
            (name, m)
        })
        .collect())
}

fn model_paths(cfg: &mut RunConfig, m: &ModelArgs) {
    for (key, path) in [
        ("model", &m.model),
        ("model_a", &m.model_a),
        ("model_b", &m.model_b),
    ] {
        if let Some(p) = path {
            cfg.paths.insert(key.into(), p.clone());
        }
    }
}

fn borrowed(models: &[(String, ModelParams)]) -> Vec<(String, &ModelParams)> {
    models.iter().map(|(n, m)| (n.clone(), m)).collect()
}

fn print_rows(rows: &[EvalRow]) {
    for r in rows {
        let value = r
            .perturbation
            .value()
            .map(|v| v.to_string())
            .unwrap_or_default();
        eprintln!(
            "{:<6} {:>5} {:<10} acc {:.4}  f1_fake {:.4}  f1_real {:.4}  n {}",
            r.perturbation.kind(),
            value,
            r.model,
            r.report.accuracy,
            r.report.f1_fake,
            r.report.f1_real,
            r.report.n
        );
    }
}

fn eval(a: EvalArgs) -> Result<()> {
    let mut cfg = resolve(&a.common)?;
    if let Some(t) = a.threshold {
        cfg.threshold = t;
    }
    model_paths(&mut cfg, &a.models);
    cfg.paths.insert("data".into(), a.data.clone());
    if let Some(out) = &a.out {
        cfg.paths.insert("out".into(), out.clone());
    }
    let cfg = finish(cfg)?;
    let models = load_models(&a.models)?;
    let data = load_dir(&a.data)?;
    let rows = evaluate_models(
        &borrowed(&models),
        &data,
        cfg.threshold,
        Perturbation::Clean,
    )?;
    print_rows(&rows);
    let report: Vec<ReportRow> = rows.iter().map(ReportRow::from).collect();
    match &a.out {
        Some(out) => {
            write_report_csv(out, &report)?;
            cfg.save(&sidecar(out))?;
        }
        None => write_report(std::io::stdout().lock(), &report)?,
    }
    Ok(())
}

fn robustness(a: RobustnessArgs) -> Result<()> {
    let mut cfg = resolve(&a.common)?;
    if let Some(s) = &a.blur_sigmas {
        cfg.robustness.blur_sigmas = s.0.clone();
    }
    if let Some(q) = &a.jpeg_qualities {
        cfg.robustness.jpeg_qualities = q.0.clone();
    }
    if let Some(t) = a.threshold {
        cfg.threshold = t;
    }
    model_paths(&mut cfg, &a.models);
    cfg.paths.insert("data".into(), a.data.clone());
    cfg.paths.insert("out".into(), a.out.clone());
    let cfg = finish(cfg)?;
    let models = load_models(&a.models)?;
    let data = load_dir(&a.data)?;
    let rows = robustness_sweep(&borrowed(&models), &data, &cfg.robustness, cfg.threshold)?;
    print_rows(&rows);
    create_dir(&a.out)?;
    let report: Vec<ReportRow> = rows.iter().map(ReportRow::from).collect();
    let csv = a.out.join("robustness.csv");
    write_report_csv(&csv, &report)?;
    plot_robustness(&report, &a.out)?;
    cfg.save(&a.out.join(CONFIG_FILE))?;
    println!("wrote {} rows to {}", report.len(), csv.display());
    Ok(())
}

fn summary_table(rows: &[ReportRow]) -> String {
    let mut s =
        String::from("| perturbation | value | model | accuracy | F1 (fake) | F1 (real) | n |\n");
    s.push_str("|---|---|---|---|---|---|---|\n");
    for r in rows {
        let value = r
            .perturbation_value
            .map(|v| v.to_string())
            .unwrap_or_default();
        let flag = |degenerate: bool| if degenerate { "*" } else { "" };
        let _ = writeln!(
            s,
            "| {} | {} | {} | {:.2}% | {:.4}{} | {:.4}{} | {} |",
            r.perturbation_kind,
            value,
            r.model,
            100.0 * r.accuracy,
            r.f1_fake,
            flag(r.degenerate.contains("f1_fake")),
            r.f1_real,
            flag(r.degenerate.contains("f1_real")),
            r.n
        );
    }
    if rows.iter().any(|r| !r.degenerate.is_empty()) {
        s.push_str("\n`*` precision or recall undefined for that class; F1 reported as computed from counts.\n");
    }
    s
}

fn report(a: ReportArgs) -> Result<()> {
    let rows = read_report_csv(&a.csv)?;
    create_dir(&a.out)?;
    let plots = plot_robustness(&rows, &a.out)?;
    let summary = a.out.join("summary.md");
    fs::write(&summary, summary_table(&rows)).map_err(|e| Error::io(&summary, e))?;
    let mut cfg = RunConfig::default();
    cfg.paths.insert("csv".into(), a.csv.clone());
    cfg.paths.insert("out".into(), a.out.clone());
    cfg.save(&a.out.join(CONFIG_FILE))?;
    println!(
        "wrote {} and {} plot(s) to {}",
        summary.display(),
        plots.len(),
        a.out.display()
    );
    Ok(())
}
