use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::model::{softmax, Batch, Network, Precision};
use super::spec::{NetworkShape, NetworkSpec};
use super::Probabilities;
use crate::augmentation::{augment, AugmentConfig};
use crate::corpus::{Label, LabeledDataset};
use crate::error::{Error, Result};
use crate::image::PlanarImage;
use crate::seeding::{derive_rng, derive_seed, PURPOSE_INIT, PURPOSE_SHUFFLE};
use crate::transforms::{assemble_frequency_cube, ChannelNormalizer, TransformConfig};

/// Which representation a stream's network consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StreamKind {
    /// RGB pixels.
    Spatial,
    /// Normalized frequency cubes.
    Frequency,
}

impl FromStr for StreamKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "spatial" => Ok(StreamKind::Spatial),
            "frequency" => Ok(StreamKind::Frequency),
            other => Err(Error::invalid_config(format!(
                "unknown stream {other:?} (expected spatial or frequency)"
            ))),
        }
    }
}

impl fmt::Display for StreamKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StreamKind::Spatial => "spatial",
            StreamKind::Frequency => "frequency",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    /// Side length images are cropped/resized to before either stream.
    pub image_size: usize,
    pub precision: Precision,
    pub network: NetworkShape,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            weight_decay: 5e-4,
            batch_size: 24,
            epochs: 24,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            image_size: 64,
            precision: Precision::F64,
            network: NetworkShape::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.adam().validate()?;
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::invalid_config(format!(
                "weight decay must be >= 0, got {}",
                self.weight_decay
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid_config("batch size must be at least 1"));
        }
        let spec = self.network.with_inputs(3);
        spec.validate()?;
        let f = spec.downsampling();
        if self.image_size == 0 || self.image_size % f != 0 {
            return Err(Error::invalid_config(format!(
                "image size {} must be a positive multiple of {f}",
                self.image_size
            )));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            epsilon: self.adam_eps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean minibatch objective; absent for the initial parameters.
    pub train_loss: Option<f64>,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub history: Vec<EpochRecord>,
    /// Epoch whose parameters were kept; 0 means the initialization.
    pub best_epoch: usize,
}

/// A trained stream: weights plus everything needed to preprocess inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub stream: StreamKind,
    pub network: Network,
    pub transform: TransformConfig,
    /// Present for the frequency stream.
    pub normalizer: Option<ChannelNormalizer>,
    pub augment: AugmentConfig,
    pub train: TrainConfig,
    pub summary: TrainingSummary,
}

impl ModelParams {
    pub fn image_size(&self) -> usize {
        self.train.image_size
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.network.spec
    }

    /// Maps an RGB image of the model's size to the network input.
    pub fn prepare(&self, img: &PlanarImage) -> Result<PlanarImage> {
        prepare_input(self.stream, &self.transform, self.normalizer.as_ref(), img)
    }

    /// Class probabilities for already prepared inputs, in input order.
    pub fn predict_prepared(&self, inputs: &[PlanarImage]) -> Result<Vec<Probabilities>> {
        let mut out = Vec::with_capacity(inputs.len());
        for chunk in inputs.chunks(EVAL_CHUNK) {
            let logits = self
                .network
                .forward_with(&Batch::from_images(chunk)?, self.train.precision)?;
            out.extend(logits.iter().map(Probabilities::from_logits));
        }
        Ok(out)
    }

    /// Class probabilities for RGB images of the model's size.
    pub fn predict_images(&self, images: &[PlanarImage]) -> Result<Vec<Probabilities>> {
        let inputs = images
            .par_iter()
            .map(|img| self.prepare(img))
            .collect::<Result<Vec<_>>>()?;
        self.predict_prepared(&inputs)
    }

    pub fn predict_proba(&self, img: &PlanarImage) -> Result<Probabilities> {
        Ok(self.predict_images(std::slice::from_ref(img))?[0])
    }
}

const EVAL_CHUNK: usize = 64;

fn prepare_input(
    stream: StreamKind,
    transform: &TransformConfig,
    normalizer: Option<&ChannelNormalizer>,
    img: &PlanarImage,
) -> Result<PlanarImage> {
    img.require_channels(3)?;
    match stream {
        StreamKind::Spatial => Ok(img.clone()),
        StreamKind::Frequency => {
            let cube = assemble_frequency_cube(img, transform)?;
            match normalizer {
                Some(n) => Ok(n.apply(&cube)?.into_planes()),
                None => Ok(cube.into_planes()),
            }
        }
    }
}

fn input_channels(stream: StreamKind, transform: &TransformConfig) -> usize {
    match stream {
        StreamKind::Spatial => 3,
        StreamKind::Frequency => transform.channel_count(),
    }
}

/// Mean cross-entropy and accuracy at threshold 0.5.
fn score(
    network: &Network,
    inputs: &[PlanarImage],
    labels: &[Label],
    precision: Precision,
) -> Result<(f64, f64)> {
    let mut loss = 0.0;
    let mut correct = 0usize;
    for (chunk, lab) in inputs.chunks(EVAL_CHUNK).zip(labels.chunks(EVAL_CHUNK)) {
        let logits = network.forward_with(&Batch::from_images(chunk)?, precision)?;
        for (l, &y) in logits.iter().zip(lab) {
            let p = softmax(l);
            loss -= p[y.index()].max(f64::MIN_POSITIVE).ln();
            let predicted = if p[1] > 0.5 { Label::Fake } else { Label::Real };
            correct += usize::from(predicted == y);
        }
    }
    let n = inputs.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

/// Trains one stream from scratch and returns the parameters of the epoch
/// with the best validation accuracy (ties go to the lower validation
/// loss, then the earlier epoch).
pub fn train_stream(
    kind: StreamKind,
    train: &LabeledDataset,
    val: &LabeledDataset,
    tcfg: &TrainConfig,
    xcfg: &TransformConfig,
    acfg: &AugmentConfig,
) -> Result<ModelParams> {
    tcfg.validate()?;
    acfg.validate()?;
    if kind == StreamKind::Frequency {
        xcfg.validate()?;
    }
    if train.is_empty() || val.is_empty() {
        return Err(Error::Training(format!(
            "need non-empty train and validation sets (got {} and {})",
            train.len(),
            val.len()
        )));
    }
    let size = tcfg.image_size;
    let train_images = train.load_all(size)?;
    let train_labels = train.labels();
    let val_labels = val.labels();

    let normalizer = match kind {
        StreamKind::Spatial => None,
        StreamKind::Frequency => {
            let cubes = train_images
                .par_iter()
                .map(|img| prepare_input(kind, xcfg, None, img))
                .collect::<Result<Vec<_>>>()?;
            Some(ChannelNormalizer::fit_images(&cubes)?)
        }
    };
    let val_inputs = val
        .load_all(size)?
        .par_iter()
        .map(|img| prepare_input(kind, xcfg, normalizer.as_ref(), img))
        .collect::<Result<Vec<_>>>()?;

    let spec = tcfg.network.with_inputs(input_channels(kind, xcfg));
    let mut network = Network::init(spec, derive_seed(tcfg.seed, &[PURPOSE_INIT]))?;
    let mut state = AdamState::new(&network.params);
    let adam = tcfg.adam();

    let (val_loss, val_accuracy) = score(&network, &val_inputs, &val_labels, tcfg.precision)?;
    let mut summary = TrainingSummary {
        history: vec![EpochRecord {
            epoch: 0,
            train_loss: None,
            val_loss,
            val_accuracy,
        }],
        best_epoch: 0,
    };
    let mut best = (val_accuracy, val_loss, network.clone());
    log::info!("{kind} epoch 0: val loss {val_loss:.4}, val acc {val_accuracy:.4}");

    let mut order: Vec<usize> = (0..train_images.len()).collect();
    for epoch in 1..=tcfg.epochs {
        let mut rng = derive_rng(tcfg.seed, &[PURPOSE_SHUFFLE, epoch as u64]);
        order.sort_unstable();
        order.shuffle(&mut rng);

        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for idx in order.chunks(tcfg.batch_size) {
            let inputs = idx
                .par_iter()
                .map(|&i| {
                    let mut rng = acfg.sample_rng(epoch as u64, i as u64);
                    let img = augment(&train_images[i], acfg, &mut rng)?;
                    prepare_input(kind, xcfg, normalizer.as_ref(), &img)
                })
                .collect::<Result<Vec<_>>>()?;
            let labels: Vec<Label> = idx.iter().map(|&i| train_labels[i]).collect();
            let out = network.loss_and_grad_with(
                &Batch::from_images(&inputs)?,
                &labels,
                tcfg.weight_decay,
                tcfg.precision,
            )?;
            if !out.loss.is_finite() {
                return Err(Error::Training(format!("loss diverged at epoch {epoch}")));
            }
            adam_step(&mut network.params, &out.grads, &mut state, &adam)?;
            loss_sum += out.loss;
            batches += 1;
        }

        let (val_loss, val_accuracy) = score(&network, &val_inputs, &val_labels, tcfg.precision)?;
        let train_loss = loss_sum / batches as f64;
        log::info!("{kind} epoch {epoch}: train loss {train_loss:.4}, val loss {val_loss:.4}, val acc {val_accuracy:.4}");
        summary.history.push(EpochRecord {
            epoch,
            train_loss: Some(train_loss),
            val_loss,
            val_accuracy,
        });
        if val_accuracy > best.0 || (val_accuracy == best.0 && val_loss < best.1) {
            best = (val_accuracy, val_loss, network.clone());
            summary.best_epoch = epoch;
        }
    }

    Ok(ModelParams {
        stream: kind,
        network: best.2,
        transform: *xcfg,
        normalizer,
        augment: *acfg,
        train: tcfg.clone(),
        summary,
    })
}

/// Fraction of `images` classified correctly at threshold 0.5.
pub fn accuracy(model: &ModelParams, images: &[PlanarImage], labels: &[Label]) -> Result<f64> {
    let probs = model.predict_images(images)?;
    let correct = probs
        .iter()
        .zip(labels)
        .filter(|(p, &y)| p.predicted() == y)
        .count();
    Ok(correct as f64 / images.len().max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ImageSource, LabeledItem};
    use std::sync::Arc;

    /// Reals are dark, fakes bright; trivially separable.
    fn toy(n_per_class: usize, size: usize, offset: u64) -> LabeledDataset {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(offset);
        let mut items = Vec::new();
        for label in [Label::Real, Label::Fake] {
            for _ in 0..n_per_class {
                let base = if label == Label::Real { 0.25 } else { 0.75 };
                let img = PlanarImage::from_fn(size, size, 3, |_, _, _| {
                    base + rng.random_range(-0.2..0.2)
                });
                items.push(LabeledItem {
                    source: ImageSource::Memory(Arc::new(img)),
                    label,
                });
            }
        }
        LabeledDataset { items, split: None }
    }

    fn small_config(epochs: usize) -> TrainConfig {
        TrainConfig {
            learning_rate: 3e-3,
            batch_size: 8,
            epochs,
            seed: 11,
            image_size: 8,
            network: NetworkShape {
                stem_width: 4,
                block_widths: vec![4, 8],
            },
            ..TrainConfig::default()
        }
    }

    #[test]
    fn overfits_a_separable_toy_set() {
        let data = toy(16, 8, 1);
        let tcfg = small_config(24);
        let model = train_stream(
            StreamKind::Spatial,
            &data,
            &data,
            &tcfg,
            &TransformConfig::default(),
            &AugmentConfig::disabled(),
        )
        .unwrap();
        let images = data.load_all(8).unwrap();
        assert_eq!(accuracy(&model, &images, &data.labels()).unwrap(), 1.0);
        assert_eq!(model.summary.history.len(), 25);
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let data = toy(4, 8, 2);
        let tcfg = small_config(0);
        let model = train_stream(
            StreamKind::Frequency,
            &data,
            &data,
            &tcfg,
            &TransformConfig::default(),
            &AugmentConfig::disabled(),
        )
        .unwrap();
        let init = Network::init(
            model.network.spec.clone(),
            derive_seed(tcfg.seed, &[PURPOSE_INIT]),
        )
        .unwrap();
        assert_eq!(model.network, init);
        assert_eq!(model.summary.best_epoch, 0);
        assert_eq!(model.summary.history.len(), 1);
        assert_eq!(model.spec().input_channels, 18);
        assert!(model.normalizer.is_some());
    }

    #[test]
    fn training_is_deterministic() {
        let data = toy(6, 8, 3);
        let tcfg = small_config(2);
        let acfg = AugmentConfig {
            probability: 0.5,
            seed: 4,
            ..AugmentConfig::default()
        };
        let run = || {
            train_stream(
                StreamKind::Frequency,
                &data,
                &data,
                &tcfg,
                &TransformConfig::default(),
                &acfg,
            )
            .unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn empty_sets_are_rejected() {
        let data = toy(2, 8, 0);
        let err = train_stream(
            StreamKind::Spatial,
            &LabeledDataset::default(),
            &data,
            &small_config(1),
            &TransformConfig::default(),
            &AugmentConfig::disabled(),
        );
        assert!(matches!(err, Err(Error::Training(_))));
    }

    #[test]
    fn probabilities_are_a_simplex() {
        let data = toy(3, 8, 5);
        let model = train_stream(
            StreamKind::Spatial,
            &data,
            &data,
            &small_config(0),
            &TransformConfig::default(),
            &AugmentConfig::disabled(),
        )
        .unwrap();
        for img in data.load_all(8).unwrap() {
            let p = model.predict_proba(&img).unwrap();
            assert!((p.real + p.fake - 1.0).abs() < 1e-12);
            assert!((0.0..=1.0).contains(&p.fake));
        }
        assert!(model.predict_proba(&PlanarImage::zeros(8, 8, 1)).is_err());
    }

    #[test]
    fn stream_kind_parses() {
        assert_eq!(
            "Frequency".parse::<StreamKind>().unwrap(),
            StreamKind::Frequency
        );
        assert!("both".parse::<StreamKind>().is_err());
        assert_eq!(StreamKind::Spatial.to_string(), "spatial");
    }
}
