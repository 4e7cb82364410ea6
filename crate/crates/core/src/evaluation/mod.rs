//! Stream fusion, classification metrics and the robustness sweep.

mod metrics;
mod plot;
mod report;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use metrics::{f1_score, Confusion, MetricsReport};
pub use plot::plot_robustness;
pub use report::{read_report_csv, write_report, write_report_csv, ReportRow};

use crate::augmentation::{gaussian_blur, jpeg_roundtrip};
use crate::corpus::{Label, LabeledDataset};
use crate::error::{Error, Result};
use crate::image::PlanarImage;
use crate::network::{ModelParams, Probabilities};

pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const FUSED_NAME: &str = "fused";

const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// Equal-weight average of two stream outputs.
pub fn fuse_probabilities(
    spatial: Probabilities,
    frequency: Probabilities,
) -> Result<Probabilities> {
    for p in [spatial, frequency] {
        let ok = (0.0..=1.0).contains(&p.real)
            && (0.0..=1.0).contains(&p.fake)
            && (p.real + p.fake - 1.0).abs() <= SIMPLEX_TOLERANCE;
        if !ok {
            return Err(Error::invalid_input(format!(
                "({}, {}) is not a probability pair",
                p.real, p.fake
            )));
        }
    }
    let fake = 0.5 * (spatial.fake + frequency.fake);
    Ok(Probabilities {
        real: 1.0 - fake,
        fake,
    })
}

/// A test-time perturbation applied before scoring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum Perturbation {
    Clean,
    Blur(f64),
    Jpeg(u8),
}

impl Perturbation {
    pub fn kind(&self) -> &'static str {
        match self {
            Perturbation::Clean => "clean",
            Perturbation::Blur(_) => "blur",
            Perturbation::Jpeg(_) => "jpeg",
        }
    }

    pub fn value(&self) -> Option<f64> {
        match *self {
            Perturbation::Clean => None,
            Perturbation::Blur(s) => Some(s),
            Perturbation::Jpeg(q) => Some(f64::from(q)),
        }
    }

    pub fn apply(&self, img: &PlanarImage) -> Result<PlanarImage> {
        match *self {
            Perturbation::Clean => Ok(img.clone()),
            Perturbation::Blur(sigma) => gaussian_blur(img, sigma),
            Perturbation::Jpeg(q) => jpeg_roundtrip(img, q),
        }
    }
}

/// Metrics of one model (or the fusion) under one perturbation.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub perturbation: Perturbation,
    pub model: String,
    pub report: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RobustnessConfig {
    pub blur_sigmas: Vec<f64>,
    pub jpeg_qualities: Vec<u8>,
}

impl Default for RobustnessConfig {
    fn default() -> Self {
        Self {
            blur_sigmas: vec![3.0, 5.0, 7.0, 9.0, 11.0],
            jpeg_qualities: vec![85, 87, 90, 92, 95],
        }
    }
}

impl RobustnessConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(s) = self
            .blur_sigmas
            .iter()
            .find(|s| !(s.is_finite() && **s > 0.0))
        {
            return Err(Error::invalid_config(format!(
                "blur sigma must be positive, got {s}"
            )));
        }
        if let Some(q) = self.jpeg_qualities.iter().find(|q| !(1..=100).contains(*q)) {
            return Err(Error::invalid_config(format!(
                "JPEG quality must be in [1, 100], got {q}"
            )));
        }
        Ok(())
    }

    pub fn perturbations(&self) -> Vec<Perturbation> {
        std::iter::once(Perturbation::Clean)
            .chain(self.blur_sigmas.iter().map(|&s| Perturbation::Blur(s)))
            .chain(self.jpeg_qualities.iter().map(|&q| Perturbation::Jpeg(q)))
            .collect()
    }
}

fn report_for(truth: &[Label], probs: &[Probabilities], threshold: f64) -> Result<MetricsReport> {
    let predicted: Vec<Label> = probs.iter().map(|p| p.predict(threshold)).collect();
    MetricsReport::from_labels(truth, &predicted)
}

fn check_models(models: &[(String, &ModelParams)]) -> Result<()> {
    if models.is_empty() || models.len() > 2 {
        return Err(Error::Evaluation(format!(
            "expected one or two models, got {}",
            models.len()
        )));
    }
    if models.len() == 2 && models[0].0 == models[1].0 {
        return Err(Error::Evaluation(format!(
            "both models are named {:?}",
            models[0].0
        )));
    }
    Ok(())
}

/// Scores each model on `data` after `perturbation`, plus the fusion when
/// two models are given. Rows come in model order, fusion last.
pub fn evaluate_models(
    models: &[(String, &ModelParams)],
    data: &LabeledDataset,
    threshold: f64,
    perturbation: Perturbation,
) -> Result<Vec<EvalRow>> {
    check_models(models)?;
    if data.is_empty() {
        return Err(Error::Evaluation("cannot evaluate an empty dataset".into()));
    }
    let truth = data.labels();
    let mut per_model = Vec::with_capacity(models.len());
    let mut cache: Option<(usize, Vec<PlanarImage>)> = None;
    for (_, model) in models {
        let size = model.image_size();
        if cache.as_ref().map_or(true, |(s, _)| *s != size) {
            let images = data
                .load_all(size)?
                .par_iter()
                .map(|img| perturbation.apply(img))
                .collect::<Result<Vec<_>>>()?;
            cache = Some((size, images));
        }
        let images = &cache.as_ref().expect("filled above").1;
        per_model.push(model.predict_images(images)?);
    }

    let mut rows = Vec::with_capacity(models.len() + 1);
    for ((name, _), probs) in models.iter().zip(&per_model) {
        rows.push(EvalRow {
            perturbation,
            model: name.clone(),
            report: report_for(&truth, probs, threshold)?,
        });
    }
    if let [a, b] = per_model.as_slice() {
        let fused = a
            .iter()
            .zip(b)
            .map(|(&p, &q)| fuse_probabilities(p, q))
            .collect::<Result<Vec<_>>>()?;
        rows.push(EvalRow {
            perturbation,
            model: FUSED_NAME.to_string(),
            report: report_for(&truth, &fused, threshold)?,
        });
    }
    Ok(rows)
}

/// Clean metrics of one model, or of the fusion of two.
pub fn evaluate_dataset(
    models: &[&ModelParams],
    data: &LabeledDataset,
    threshold: f64,
) -> Result<MetricsReport> {
    let named: Vec<(String, &ModelParams)> = models
        .iter()
        .enumerate()
        .map(|(i, m)| (format!("m{i}"), *m))
        .collect();
    let rows = evaluate_models(&named, data, threshold, Perturbation::Clean)?;
    Ok(rows.last().expect("at least one row").report)
}

/// The clean row followed by one row per blur sigma and JPEG quality, for
/// each model and the fusion. Only the test images are perturbed.
pub fn robustness_sweep(
    models: &[(String, &ModelParams)],
    test: &LabeledDataset,
    rcfg: &RobustnessConfig,
    threshold: f64,
) -> Result<Vec<EvalRow>> {
    rcfg.validate()?;
    let mut rows = Vec::new();
    for p in rcfg.perturbations() {
        log::info!("evaluating {} {:?}", p.kind(), p.value());
        rows.extend(evaluate_models(models, test, threshold, p)?);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(fake: f64) -> Probabilities {
        Probabilities {
            real: 1.0 - fake,
            fake,
        }
    }

    #[test]
    fn fusion_is_the_mean() {
        let f = fuse_probabilities(pair(0.2), pair(0.4)).unwrap();
        assert!((f.fake - 0.3).abs() < 1e-15 && (f.real - 0.7).abs() < 1e-15);
        assert_eq!(
            fuse_probabilities(pair(0.35), pair(0.35)).unwrap(),
            pair(0.35)
        );
        assert!(fuse_probabilities(
            Probabilities {
                real: 0.5,
                fake: 0.6
            },
            pair(0.1)
        )
        .is_err());
        assert!(fuse_probabilities(
            Probabilities {
                real: 1.5,
                fake: -0.5
            },
            pair(0.1)
        )
        .is_err());
    }

    proptest::proptest! {
        #[test]
        fn fusion_properties(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let ab = fuse_probabilities(pair(a), pair(b)).unwrap();
            let ba = fuse_probabilities(pair(b), pair(a)).unwrap();
            proptest::prop_assert_eq!(ab, ba);
            proptest::prop_assert!((ab.real + ab.fake - 1.0).abs() < 1e-12);
            if pair(a).predicted() == pair(b).predicted() {
                proptest::prop_assert_eq!(ab.predicted(), pair(a).predicted());
            }
        }
    }

    #[test]
    fn sweep_rows() {
        let r = RobustnessConfig::default();
        let p = r.perturbations();
        assert_eq!(p.len(), 11);
        assert_eq!(p[0], Perturbation::Clean);
        assert_eq!(p[1], Perturbation::Blur(3.0));
        assert_eq!(p[10], Perturbation::Jpeg(95));
        let empty = RobustnessConfig {
            blur_sigmas: vec![],
            jpeg_qualities: vec![],
        };
        assert_eq!(empty.perturbations(), vec![Perturbation::Clean]);
        assert!(RobustnessConfig {
            blur_sigmas: vec![0.0],
            ..r.clone()
        }
        .validate()
        .is_err());
        assert!(RobustnessConfig {
            jpeg_qualities: vec![0],
            ..r
        }
        .validate()
        .is_err());
    }
}
