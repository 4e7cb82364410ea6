use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{blockwise_dft, blockwise_haar_dwt, upsample_nearest, BlockSize};
use crate::colorspace::{rgb_to_ycbcr_with, ChromaConvention, ColorCoefficients};
use crate::error::{Error, Result};
use crate::image::PlanarImage;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColorSpace {
    Rgb,
    #[default]
    Ycbcr,
}

impl ColorSpace {
    fn channel_names(self) -> [&'static str; 3] {
        match self {
            ColorSpace::Rgb => ["R", "G", "B"],
            ColorSpace::Ycbcr => ["Y", "Cb", "Cr"],
        }
    }
}

impl FromStr for ColorSpace {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rgb" => Ok(ColorSpace::Rgb),
            "ycbcr" => Ok(ColorSpace::Ycbcr),
            other => Err(Error::invalid_config(format!(
                "unknown colorspace {other:?}"
            ))),
        }
    }
}

impl fmt::Display for ColorSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ColorSpace::Rgb => "rgb",
            ColorSpace::Ycbcr => "ycbcr",
        })
    }
}

/// Which transforms contribute channels to the cube.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformSet {
    pub dft: bool,
    pub dwt: bool,
}

impl TransformSet {
    pub const BOTH: TransformSet = TransformSet {
        dft: true,
        dwt: true,
    };
    pub const DFT_ONLY: TransformSet = TransformSet {
        dft: true,
        dwt: false,
    };
    pub const DWT_ONLY: TransformSet = TransformSet {
        dft: false,
        dwt: true,
    };

    pub fn is_empty(&self) -> bool {
        !self.dft && !self.dwt
    }

    /// Channels produced for a 3-channel input: 2 per color channel for the
    /// DFT, 4 per color channel for the DWT.
    pub fn channel_count(&self) -> usize {
        3 * (2 * usize::from(self.dft) + 4 * usize::from(self.dwt))
    }
}

impl Default for TransformSet {
    fn default() -> Self {
        Self::BOTH
    }
}

impl FromStr for TransformSet {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let mut set = TransformSet {
            dft: false,
            dwt: false,
        };
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "dft" => set.dft = true,
                "dwt" => set.dwt = true,
                other => {
                    return Err(Error::invalid_config(format!(
                        "unknown transform {other:?}"
                    )))
                }
            }
        }
        if set.is_empty() {
            return Err(Error::invalid_config("at least one transform is required"));
        }
        Ok(set)
    }
}

impl fmt::Display for TransformSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = [(self.dft, "dft"), (self.dwt, "dwt")]
            .into_iter()
            .filter_map(|(on, n)| on.then_some(n))
            .collect();
        f.write_str(&names.join(","))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransformConfig {
    pub colorspace: ColorSpace,
    pub transforms: TransformSet,
    pub block_size: BlockSize,
    pub coefficients: ColorCoefficients,
    pub chroma: ChromaConvention,
}

impl TransformConfig {
    pub fn validate(&self) -> Result<()> {
        if self.transforms.is_empty() {
            return Err(Error::invalid_config("transform set is empty"));
        }
        if let BlockSize::Pixels(n) = self.block_size {
            if self.transforms.dwt && n % 2 != 0 {
                return Err(Error::invalid_config(format!(
                    "Haar transform needs an even block size, got {n}"
                )));
            }
        }
        Ok(())
    }

    pub fn channel_count(&self) -> usize {
        self.transforms.channel_count()
    }

    /// Channel labels in cube order: every DFT plane first, then every
    /// Haar subband.
    pub fn channel_order(&self) -> Vec<String> {
        let names = self.colorspace.channel_names();
        let mut order = Vec::with_capacity(self.channel_count());
        if self.transforms.dft {
            for n in names {
                order.push(format!("{n}.dft.re"));
                order.push(format!("{n}.dft.im"));
            }
        }
        if self.transforms.dwt {
            for n in names {
                for band in ["ll", "hl", "lh", "hh"] {
                    order.push(format!("{n}.{band}"));
                }
            }
        }
        order
    }
}

/// An `H x W x C` stack of frequency planes with labelled channels.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyCube {
    data: PlanarImage,
    channel_order: Vec<String>,
}

impl FrequencyCube {
    pub fn new(data: PlanarImage, channel_order: Vec<String>) -> Result<Self> {
        if data.channels() != channel_order.len() {
            return Err(Error::invalid_input(format!(
                "{} channels but {} labels",
                data.channels(),
                channel_order.len()
            )));
        }
        Ok(Self {
            data,
            channel_order,
        })
    }

    /// Wraps planes with generic `ch{i}` labels, for cubes read from disk.
    pub fn unlabeled(data: PlanarImage) -> Self {
        let channel_order = (0..data.channels()).map(|i| format!("ch{i}")).collect();
        Self {
            data,
            channel_order,
        }
    }

    pub fn planes(&self) -> &PlanarImage {
        &self.data
    }

    pub fn into_planes(self) -> PlanarImage {
        self.data
    }

    pub fn channel_order(&self) -> &[String] {
        &self.channel_order
    }

    pub fn height(&self) -> usize {
        self.data.height()
    }

    pub fn width(&self) -> usize {
        self.data.width()
    }

    pub fn channels(&self) -> usize {
        self.data.channels()
    }
}

/// Color-converts an RGB image and stacks its blockwise DFT and Haar planes.
///
/// Haar subbands are nearest-upsampled by 2 so every plane is `H x W`.
pub fn assemble_frequency_cube(
    img: &PlanarImage,
    config: &TransformConfig,
) -> Result<FrequencyCube> {
    config.validate()?;
    img.require_channels(3)?;
    let color = match config.colorspace {
        ColorSpace::Rgb => img.clone(),
        ColorSpace::Ycbcr => rgb_to_ycbcr_with(img, &config.coefficients, config.chroma)?,
    };
    let channels: Vec<PlanarImage> = (0..3).map(|c| color.channel(c)).collect();
    let mut planes = Vec::with_capacity(config.channel_count());
    if config.transforms.dft {
        for ch in &channels {
            let (re, im) = blockwise_dft(ch, config.block_size)?;
            planes.push(re);
            planes.push(im);
        }
    }
    if config.transforms.dwt {
        for ch in &channels {
            let sb = blockwise_haar_dwt(ch, config.block_size)?;
            for band in [&sb.ll, &sb.hl, &sb.lh, &sb.hh] {
                planes.push(upsample_nearest(band, 2)?);
            }
        }
    }
    FrequencyCube::new(PlanarImage::stack(&planes)?, config.channel_order())
}
