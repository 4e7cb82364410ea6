//! Pixel-domain perturbations: Gaussian blur and JPEG round trips, used both
//! as random training augmentation and as deterministic robustness sweeps.

use std::io::Cursor;

use image::codecs::jpeg::JpegEncoder;
use image::{ExtendedColorType, ImageFormat};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::PlanarImage;
use crate::seeding::{derive_rng, PURPOSE_AUGMENT};

pub const MIN_BLUR_SIGMA: f64 = 0.1;

/// Normalized 1-D Gaussian taps for offsets `-r..=r` with `r = ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let taps: Vec<f64> = (-radius..=radius)
        .map(|k| (-((k * k) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / total).collect()
}

/// Half-sample symmetric reflection (`d c b a | a b c d | d c b a`).
fn reflect(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - 1 - m) as usize
    }
}

/// Separable Gaussian convolution with reflect padding, without clamping.
pub(crate) fn gaussian_filter(img: &PlanarImage, sigma: f64) -> PlanarImage {
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as isize;
    let (h, w, c) = img.dims();

    let taps = |n: usize| -> Vec<Vec<usize>> {
        (0..n as isize)
            .map(|i| (-radius..=radius).map(|k| reflect(i + k, n)).collect())
            .collect()
    };
    let (col_taps, row_taps) = (taps(w), taps(h));

    let src = img.data();
    let mut horiz = vec![0.0; src.len()];
    for y in 0..h {
        let row = &src[y * w * c..(y + 1) * w * c];
        for x in 0..w {
            for ch in 0..c {
                horiz[(y * w + x) * c + ch] = kernel
                    .iter()
                    .zip(&col_taps[x])
                    .map(|(k, &sx)| k * row[sx * c + ch])
                    .sum();
            }
        }
    }
    let mut out = vec![0.0; src.len()];
    for y in 0..h {
        for (k, &sy) in kernel.iter().zip(&row_taps[y]) {
            let src_row = &horiz[sy * w * c..(sy + 1) * w * c];
            let dst_row = &mut out[y * w * c..(y + 1) * w * c];
            for (d, s) in dst_row.iter_mut().zip(src_row) {
                *d += k * s;
            }
        }
    }
    PlanarImage::new(h, w, c, out).expect("same shape as input")
}

/// Gaussian blur of a pixel-domain image; output is clamped to `[0, 1]`.
pub fn gaussian_blur(img: &PlanarImage, sigma: f64) -> Result<PlanarImage> {
    if !(sigma >= MIN_BLUR_SIGMA) {
        return Err(Error::invalid_input(format!(
            "blur sigma must be at least {MIN_BLUR_SIGMA}, got {sigma}"
        )));
    }
    let mut out = gaussian_filter(img, sigma);
    out.clamp_unit();
    Ok(out)
}

/// Encodes with a baseline JPEG codec at `quality` and decodes back.
pub fn jpeg_roundtrip(img: &PlanarImage, quality: u8) -> Result<PlanarImage> {
    if !(1..=100).contains(&quality) {
        return Err(Error::invalid_input(format!(
            "JPEG quality must be in 1..=100, got {quality}"
        )));
    }
    let rgb = img.to_rgb8()?;
    let mut buf = Vec::new();
    JpegEncoder::new_with_quality(&mut buf, quality)
        .encode(
            rgb.as_raw(),
            rgb.width(),
            rgb.height(),
            ExtendedColorType::Rgb8,
        )
        .map_err(|e| Error::Augmentation(format!("JPEG encode: {e}")))?;
    let decoded = image::load(Cursor::new(&buf), ImageFormat::Jpeg)
        .map_err(|e| Error::Augmentation(format!("JPEG decode: {e}")))?;
    let out = PlanarImage::from_dynamic(&decoded);
    if out.dims() != img.dims() {
        return Err(Error::Augmentation(format!(
            "codec changed dimensions from {:?} to {:?}",
            img.dims(),
            out.dims()
        )));
    }
    Ok(out)
}

/// How the blur and JPEG coins relate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentPolicy {
    /// Each perturbation fires on its own coin.
    #[default]
    Independent,
    /// One coin decides whether both perturbations fire together.
    Joint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub probability: f64,
    pub blur_sigma_range: [f64; 2],
    pub jpeg_quality_range: [u8; 2],
    pub policy: AugmentPolicy,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            probability: 0.1,
            blur_sigma_range: [0.5, 3.0],
            jpeg_quality_range: [70, 95],
            policy: AugmentPolicy::Independent,
            seed: 0,
        }
    }
}

impl AugmentConfig {
    pub fn disabled() -> Self {
        Self {
            probability: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.probability) {
            return Err(Error::invalid_config(format!(
                "augmentation probability must be in [0, 1], got {}",
                self.probability
            )));
        }
        let [lo, hi] = self.blur_sigma_range;
        if !(lo >= MIN_BLUR_SIGMA && hi >= lo && hi.is_finite()) {
            return Err(Error::invalid_config(format!(
                "blur sigma range must satisfy {MIN_BLUR_SIGMA} <= lo <= hi, got [{lo}, {hi}]"
            )));
        }
        let [qlo, qhi] = self.jpeg_quality_range;
        if !(1 <= qlo && qlo <= qhi && qhi <= 100) {
            return Err(Error::invalid_config(format!(
                "JPEG quality range must satisfy 1 <= lo <= hi <= 100, got [{qlo}, {qhi}]"
            )));
        }
        Ok(())
    }

    /// Generator for one sample of one epoch, independent of visiting order.
    pub fn sample_rng(&self, epoch: u64, index: u64) -> rand_chacha::ChaCha8Rng {
        derive_rng(self.seed, &[PURPOSE_AUGMENT, epoch, index])
    }
}

/// The perturbations chosen for one sample.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AugmentPlan {
    pub blur_sigma: Option<f64>,
    pub jpeg_quality: Option<u8>,
}

impl AugmentPlan {
    pub fn sample<R: Rng + ?Sized>(cfg: &AugmentConfig, rng: &mut R) -> AugmentPlan {
        let [slo, shi] = cfg.blur_sigma_range;
        let [qlo, qhi] = cfg.jpeg_quality_range;
        let (blur, jpeg) = match cfg.policy {
            AugmentPolicy::Independent => {
                let blur = rng.random::<f64>() < cfg.probability;
                let jpeg = rng.random::<f64>() < cfg.probability;
                (blur, jpeg)
            }
            AugmentPolicy::Joint => {
                let both = rng.random::<f64>() < cfg.probability;
                (both, both)
            }
        };
        AugmentPlan {
            blur_sigma: blur.then(|| {
                if shi > slo {
                    rng.random_range(slo..shi)
                } else {
                    slo
                }
            }),
            jpeg_quality: jpeg.then(|| rng.random_range(qlo..=qhi)),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.blur_sigma.is_none() && self.jpeg_quality.is_none()
    }

    /// Blur first, then JPEG.
    pub fn apply(&self, img: &PlanarImage) -> Result<PlanarImage> {
        let mut out = match self.blur_sigma {
            Some(sigma) => gaussian_blur(img, sigma)?,
            None => img.clone(),
        };
        if let Some(q) = self.jpeg_quality {
            out = jpeg_roundtrip(&out, q)?;
        }
        Ok(out)
    }
}

/// Randomly perturbs a training image according to `cfg`.
pub fn augment<R: Rng + ?Sized>(
    img: &PlanarImage,
    cfg: &AugmentConfig,
    rng: &mut R,
) -> Result<PlanarImage> {
    img.require_channels(3)?;
    AugmentPlan::sample(cfg, rng).apply(img)
}
