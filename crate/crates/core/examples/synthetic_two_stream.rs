//! Trains both streams on the synthetic corpus and prints clean test
//! metrics for each stream and their fusion.
//!
//! Usage: `synthetic_two_stream [epochs] [f32|f64] [per-class-train]`

use std::time::Instant;

use tsnet_core::corpus::synth_dataset;
use tsnet_core::evaluation::{evaluate_models, Perturbation};
use tsnet_core::network::{train_stream, Precision};
use tsnet_core::{AugmentConfig, Split, StreamKind, SynthConfig, TrainConfig, TransformConfig};

fn main() -> tsnet_core::Result<()> {
    env_logger::Builder::from_default_env()
        .filter_level(log::LevelFilter::Info)
        .init();
    let args: Vec<String> = std::env::args().collect();
    let epochs = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(4);
    let precision = match args.get(2).map(String::as_str) {
        Some("f64") => Precision::F64,
        _ => Precision::F32,
    };
    let n_train = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(500);

    let synth = SynthConfig {
        seed: 7,
        ..SynthConfig::default()
    };
    let t = Instant::now();
    let train = synth_dataset(&synth, Split::Train, n_train)?;
    let val = synth_dataset(&synth, Split::Val, 100)?;
    let test = synth_dataset(&synth, Split::Test, 100)?;
    println!("corpus: {:.1}s", t.elapsed().as_secs_f64());

    let tcfg = TrainConfig {
        epochs,
        precision,
        seed: 7,
        ..TrainConfig::default()
    };
    let acfg = AugmentConfig {
        seed: 7,
        ..AugmentConfig::default()
    };
    let xcfg = TransformConfig::default();
    let mut models = Vec::new();
    for kind in [StreamKind::Spatial, StreamKind::Frequency] {
        let t = Instant::now();
        let m = train_stream(kind, &train, &val, &tcfg, &xcfg, &acfg)?;
        println!(
            "{kind}: {:.1}s, best epoch {}",
            t.elapsed().as_secs_f64(),
            m.summary.best_epoch
        );
        models.push((kind.to_string(), m));
    }
    let named: Vec<_> = models.iter().map(|(n, m)| (n.clone(), m)).collect();
    for row in evaluate_models(&named, &test, 0.5, Perturbation::Clean)? {
        println!(
            "{:<10} accuracy {:.4}  f1_fake {:.4}  f1_real {:.4}",
            row.model, row.report.accuracy, row.report.f1_fake, row.report.f1_real
        );
    }
    Ok(())
}
