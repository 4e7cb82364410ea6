use serde::{Deserialize, Serialize};

use super::FrequencyCube;
use crate::error::{Error, Result};
use crate::image::PlanarImage;

/// Smallest standard deviation a channel may be scaled by.
pub const STD_FLOOR: f64 = 1e-8;

/// Per-channel standardization `(x - mean) / std`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelNormalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Running per-channel count, mean and sum of squared deviations.
struct Moments {
    count: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Moments {
    fn of_image(img: &PlanarImage) -> Moments {
        let c = img.channels();
        let count = (img.height() * img.width()) as f64;
        let mut mean = vec![0.0; c];
        for px in img.data().chunks_exact(c) {
            for (m, v) in mean.iter_mut().zip(px) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= count);
        let mut m2 = vec![0.0; c];
        for px in img.data().chunks_exact(c) {
            for ((s, v), m) in m2.iter_mut().zip(px).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        Moments { count, mean, m2 }
    }

    /// Pairwise combination of two partial results.
    fn merge(&mut self, other: Moments) {
        let n = self.count + other.count;
        for c in 0..self.mean.len() {
            let delta = other.mean[c] - self.mean[c];
            self.mean[c] += delta * other.count / n;
            self.m2[c] += other.m2[c] + delta * delta * self.count * other.count / n;
        }
        self.count = n;
    }
}

impl ChannelNormalizer {
    pub fn identity(channels: usize) -> Self {
        Self {
            mean: vec![0.0; channels],
            std: vec![1.0; channels],
        }
    }

    pub fn channels(&self) -> usize {
        self.mean.len()
    }

    /// Population mean and std of every channel over all pixels of all images.
    pub fn fit_images<'a>(images: impl IntoIterator<Item = &'a PlanarImage>) -> Result<Self> {
        let mut acc: Option<Moments> = None;
        for img in images {
            let m = Moments::of_image(img);
            match &mut acc {
                None => acc = Some(m),
                Some(a) if a.mean.len() != m.mean.len() => {
                    return Err(Error::invalid_input(format!(
                        "channel count changed from {} to {}",
                        a.mean.len(),
                        m.mean.len()
                    )))
                }
                Some(a) => a.merge(m),
            }
        }
        let acc =
            acc.ok_or_else(|| Error::invalid_input("cannot fit a normalizer on zero cubes"))?;
        let std = acc
            .m2
            .iter()
            .map(|s| (s / acc.count).sqrt().max(STD_FLOOR))
            .collect();
        Ok(Self {
            mean: acc.mean,
            std,
        })
    }

    fn check(&self, img: &PlanarImage) -> Result<()> {
        if img.channels() != self.channels() {
            return Err(Error::invalid_input(format!(
                "normalizer has {} channels, input has {}",
                self.channels(),
                img.channels()
            )));
        }
        Ok(())
    }

    pub fn apply_image(&self, img: &PlanarImage) -> Result<PlanarImage> {
        self.check(img)?;
        let mut out = img.clone();
        let c = self.channels();
        for px in out.data_mut().chunks_exact_mut(c) {
            for ((v, m), s) in px.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - m) / s;
            }
        }
        Ok(out)
    }

    pub fn unapply_image(&self, img: &PlanarImage) -> Result<PlanarImage> {
        self.check(img)?;
        let mut out = img.clone();
        let c = self.channels();
        for px in out.data_mut().chunks_exact_mut(c) {
            for ((v, m), s) in px.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = *v * s + m;
            }
        }
        Ok(out)
    }

    pub fn apply(&self, cube: &FrequencyCube) -> Result<FrequencyCube> {
        FrequencyCube::new(
            self.apply_image(cube.planes())?,
            cube.channel_order().to_vec(),
        )
    }

    pub fn unapply(&self, cube: &FrequencyCube) -> Result<FrequencyCube> {
        FrequencyCube::new(
            self.unapply_image(cube.planes())?,
            cube.channel_order().to_vec(),
        )
    }
}

pub fn fit_channel_normalizer<'a>(
    cubes: impl IntoIterator<Item = &'a FrequencyCube>,
) -> Result<ChannelNormalizer> {
    ChannelNormalizer::fit_images(cubes.into_iter().map(FrequencyCube::planes))
}
