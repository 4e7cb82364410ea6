//! Labelled image collections: deterministic synthetic real/fake pairs and
//! on-disk `real/` + `fake/` directories.
//!
//! Synthetic "real" images are smooth Gaussian random fields with a gentle
//! color gradient. "Fake" images take the same base, average-pool and
//! nearest-upsample it (leaving the spectral replicas that generator
//! upsampling leaves), then add a faint checkerboard at pixel pitch.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::augmentation::gaussian_filter;
use crate::error::{Error, Result};
use crate::image::PlanarImage;
use crate::seeding::{derive_rng, PURPOSE_SYNTH};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Real = 0,
    Fake = 1,
}

impl Label {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Label> {
        match i {
            0 => Some(Label::Real),
            1 => Some(Label::Fake),
            _ => None,
        }
    }

    pub fn dir_name(self) -> &'static str {
        match self {
            Label::Real => "real",
            Label::Fake => "fake",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn dir_name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    fn from_dir_name(name: &str) -> Option<Split> {
        Split::ALL.into_iter().find(|s| s.dir_name() == name)
    }

    fn id(self) -> u64 {
        match self {
            Split::Train => 0,
            Split::Val => 1,
            Split::Test => 2,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.dir_name())
    }
}

#[derive(Debug, Clone)]
pub enum ImageSource {
    Path(PathBuf),
    Memory(Arc<PlanarImage>),
}

#[derive(Debug, Clone)]
pub struct LabeledItem {
    pub source: ImageSource,
    pub label: Label,
}

impl LabeledItem {
    /// Decodes (if needed) and brings the image to `size x size`.
    pub fn load(&self, size: usize) -> Result<PlanarImage> {
        let img = match &self.source {
            ImageSource::Path(p) => PlanarImage::open(p)?,
            ImageSource::Memory(img) => {
                if img.height() == size && img.width() == size {
                    return Ok(img.as_ref().clone());
                }
                img.as_ref().clone()
            }
        };
        preprocess_crop_resize(&img, size)
    }
}

#[derive(Debug, Clone, Default)]
pub struct LabeledDataset {
    pub items: Vec<LabeledItem>,
    pub split: Option<Split>,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.items.iter().map(|i| i.label).collect()
    }

    pub fn count(&self, label: Label) -> usize {
        self.items.iter().filter(|i| i.label == label).count()
    }

    /// Loads every image at `size x size`, in dataset order.
    pub fn load_all(&self, size: usize) -> Result<Vec<PlanarImage>> {
        use rayon::prelude::*;
        self.items.par_iter().map(|item| item.load(size)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub size: usize,
    pub base_smoothness: f64,
    pub artifact_amplitude: f64,
    pub upsample_factor: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            size: 64,
            base_smoothness: 2.0,
            artifact_amplitude: 0.02,
            upsample_factor: 2,
            seed: 0,
        }
    }
}

/// Synthetic images are sized so that 8-pixel blocks and the Haar factor of
/// 2 always tile them.
pub const SYNTH_SIZE_MULTIPLE: usize = 16;

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.size == 0 || self.size % SYNTH_SIZE_MULTIPLE != 0 {
            return Err(Error::invalid_config(format!(
                "synthetic image size must be a positive multiple of {SYNTH_SIZE_MULTIPLE}, got {}",
                self.size
            )));
        }
        if !(self.base_smoothness > 0.0 && self.base_smoothness.is_finite()) {
            return Err(Error::invalid_config("base smoothness must be positive"));
        }
        if !(0.0..=1.0).contains(&self.artifact_amplitude) {
            return Err(Error::invalid_config(
                "artifact amplitude must be in [0, 1]",
            ));
        }
        if self.upsample_factor == 0 || self.size % self.upsample_factor != 0 {
            return Err(Error::invalid_config(format!(
                "upsample factor {} must divide the image size {}",
                self.upsample_factor, self.size
            )));
        }
        Ok(())
    }

    /// Generation index of the `k`-th image of a class in a split. Real and
    /// fake images never share a base.
    pub fn generation_index(split: Split, label: Label, k: usize) -> u64 {
        (split.id() << 40) | ((k as u64) << 1) | label.index() as u64
    }
}

const REAL_LOW: f64 = 0.1;
const REAL_HIGH: f64 = 0.9;

/// A smooth random "natural" image, deterministic in `(cfg.seed, index)`.
pub fn synth_real(cfg: &SynthConfig, index: u64) -> Result<PlanarImage> {
    cfg.validate()?;
    let n = cfg.size;
    let mut rng = derive_rng(cfg.seed, &[PURPOSE_SYNTH, index]);
    let field = |rng: &mut rand_chacha::ChaCha8Rng| {
        let noise = PlanarImage::from_fn(n, n, 1, |_, _, _| rng.sample::<f64, _>(StandardNormal));
        let mut f = gaussian_filter(&noise, cfg.base_smoothness);
        let mean = f.mean();
        let std =
            (f.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n * n) as f64).sqrt();
        for v in f.data_mut() {
            *v = (*v - mean) / std.max(1e-12);
        }
        f
    };
    let shared = field(&mut rng);
    let mut planes = Vec::with_capacity(3);
    for _ in 0..3 {
        let own = field(&mut rng);
        let gx: f64 = rng.random_range(-1.0..1.0);
        let gy: f64 = rng.random_range(-1.0..1.0);
        let span = (n - 1).max(1) as f64;
        let mut plane = PlanarImage::from_fn(n, n, 1, |y, x, _| {
            0.7 * shared.get(y, x, 0)
                + 0.5 * own.get(y, x, 0)
                + 2.0 * (gx * (x as f64 / span - 0.5) + gy * (y as f64 / span - 0.5))
        });
        let (lo, hi) = plane
            .data()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        for v in plane.data_mut() {
            *v = if hi > lo {
                REAL_LOW + (REAL_HIGH - REAL_LOW) * (*v - lo) / (hi - lo)
            } else {
                0.5
            };
        }
        planes.push(plane);
    }
    PlanarImage::stack(&planes)
}

/// Average-pools by `factor` and replicates back to full size.
pub fn pool_and_replicate(img: &PlanarImage, factor: usize) -> PlanarImage {
    if factor <= 1 {
        return img.clone();
    }
    let (h, w, c) = img.dims();
    let area = (factor * factor) as f64;
    PlanarImage::from_fn(h, w, c, |y, x, ch| {
        let (ty, tx) = (y / factor * factor, x / factor * factor);
        let mut sum = 0.0;
        for dy in 0..factor {
            for dx in 0..factor {
                sum += img.get((ty + dy).min(h - 1), (tx + dx).min(w - 1), ch);
            }
        }
        sum / area
    })
}

/// The real image of the same index with upsampling artifacts injected.
pub fn synth_fake(cfg: &SynthConfig, index: u64) -> Result<PlanarImage> {
    let base = synth_real(cfg, index)?;
    let mut img = pool_and_replicate(&base, cfg.upsample_factor);
    if cfg.artifact_amplitude > 0.0 {
        let c = img.channels();
        let w = img.width();
        for (i, px) in img.data_mut().chunks_exact_mut(c).enumerate() {
            let (y, x) = (i / w, i % w);
            let sign = if (x + y) % 2 == 0 { 1.0 } else { -1.0 };
            for v in px {
                *v += sign * cfg.artifact_amplitude;
            }
        }
        img.clamp_unit();
    }
    Ok(img)
}

pub fn synth_image(cfg: &SynthConfig, label: Label, index: u64) -> Result<PlanarImage> {
    match label {
        Label::Real => synth_real(cfg, index),
        Label::Fake => synth_fake(cfg, index),
    }
}

/// An in-memory balanced split: `per_class` real images followed by
/// `per_class` fake images.
pub fn synth_dataset(cfg: &SynthConfig, split: Split, per_class: usize) -> Result<LabeledDataset> {
    use rayon::prelude::*;
    cfg.validate()?;
    let jobs: Vec<(Label, usize)> = [Label::Real, Label::Fake]
        .into_iter()
        .flat_map(|l| (0..per_class).map(move |k| (l, k)))
        .collect();
    let items = jobs
        .par_iter()
        .map(|&(label, k)| {
            let img = synth_image(cfg, label, SynthConfig::generation_index(split, label, k))?;
            Ok(LabeledItem {
                source: ImageSource::Memory(Arc::new(img)),
                label,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LabeledDataset {
        items,
        split: Some(split),
    })
}

/// One file of a synthetic corpus written to disk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative to the corpus root, `/`-separated.
    pub path: String,
    pub split: Split,
    pub label: Label,
    pub index: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthManifest {
    pub config: SynthConfig,
    pub per_class: Vec<(Split, usize)>,
    pub files: Vec<ManifestEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Writes `root/<split>/<real|fake>/<k>.png` for every requested split and
/// a `manifest.json` listing them.
pub fn write_synth_corpus(
    cfg: &SynthConfig,
    root: &Path,
    per_class: &[(Split, usize)],
) -> Result<SynthManifest> {
    use rayon::prelude::*;
    cfg.validate()?;
    let mut files = Vec::new();
    for &(split, n) in per_class {
        for label in [Label::Real, Label::Fake] {
            let dir = root.join(split.dir_name()).join(label.dir_name());
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            for k in 0..n {
                files.push(ManifestEntry {
                    path: format!("{}/{}/{k:05}.png", split.dir_name(), label.dir_name()),
                    split,
                    label,
                    index: SynthConfig::generation_index(split, label, k),
                });
            }
        }
    }
    files
        .par_iter()
        .try_for_each(|f| synth_image(cfg, f.label, f.index)?.save_png(&root.join(&f.path)))?;
    let manifest = SynthManifest {
        config: *cfg,
        per_class: per_class.to_vec(),
        files,
    };
    let path = root.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest)?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

/// A file that was listed but could not be decoded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedFile {
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct IngestReport {
    pub dataset: LabeledDataset,
    pub skipped: Vec<SkippedFile>,
}

fn list_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Lists `root/real/*` then `root/fake/*`, each in lexicographic order.
///
/// Files that fail to decode are left out and reported in
/// [`IngestReport::skipped`].
pub fn load_image_dir(root: &Path) -> Result<IngestReport> {
    let mut items = Vec::new();
    let mut skipped = Vec::new();
    for label in [Label::Real, Label::Fake] {
        let dir = root.join(label.dir_name());
        if !dir.is_dir() {
            return Err(Error::Ingestion {
                origin: root.display().to_string(),
                reason: format!("missing `{}/` subdirectory", label.dir_name()),
            });
        }
        for path in list_files(&dir)? {
            let decoded = image::ImageReader::open(&path)
                .and_then(|r| r.with_guessed_format())
                .map_err(|e| e.to_string())
                .and_then(|r| r.decode().map_err(|e| e.to_string()));
            match decoded {
                Ok(_) => items.push(LabeledItem {
                    source: ImageSource::Path(path),
                    label,
                }),
                Err(reason) => {
                    log::warn!("skipping {}: {reason}", path.display());
                    skipped.push(SkippedFile { path, reason });
                }
            }
        }
    }
    let split = root
        .file_name()
        .and_then(|n| n.to_str())
        .and_then(Split::from_dir_name);
    Ok(IngestReport {
        dataset: LabeledDataset { items, split },
        skipped,
    })
}

/// Center-crops to the shorter edge, then bilinearly resizes to
/// `target x target`.
pub fn preprocess_crop_resize(img: &PlanarImage, target: usize) -> Result<PlanarImage> {
    let (h, w, c) = img.dims();
    if h < 2 || w < 2 {
        return Err(Error::Ingestion {
            origin: "image".into(),
            reason: format!("degenerate {h}x{w} image"),
        });
    }
    if target == 0 {
        return Err(Error::invalid_input("target size must be positive"));
    }
    let side = h.min(w);
    let (oy, ox) = ((h - side) / 2, (w - side) / 2);
    let cropped = if side == h && side == w {
        img.clone()
    } else {
        PlanarImage::from_fn(side, side, c, |y, x, ch| img.get(oy + y, ox + x, ch))
    };
    if side == target {
        return Ok(cropped);
    }
    Ok(resize_bilinear(&cropped, target, target))
}

/// Bilinear resampling with half-pixel centers and edge clamping.
pub fn resize_bilinear(img: &PlanarImage, out_h: usize, out_w: usize) -> PlanarImage {
    let (h, w, c) = img.dims();
    let coords = |out: usize, src: usize| -> Vec<(usize, usize, f64)> {
        let scale = src as f64 / out as f64;
        (0..out)
            .map(|i| {
                let s = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
                let i0 = s.floor() as usize;
                let i1 = (i0 + 1).min(src - 1);
                (i0, i1, s - i0 as f64)
            })
            .collect()
    };
    let (ys, xs) = (coords(out_h, h), coords(out_w, w));
    let lerp = |a: f64, b: f64, t: f64| a + t * (b - a);
    PlanarImage::from_fn(out_h, out_w, c, |y, x, ch| {
        let (y0, y1, ty) = ys[y];
        let (x0, x1, tx) = xs[x];
        let top = lerp(img.get(y0, x0, ch), img.get(y0, x1, ch), tx);
        let bottom = lerp(img.get(y1, x0, ch), img.get(y1, x1, ch), tx);
        lerp(top, bottom, ty)
    })
}
