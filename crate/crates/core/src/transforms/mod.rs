//! Frequency-domain features: blockwise DFT, blockwise Haar DWT, and the
//! multi-channel frequency cube fed to the frequency stream.

mod cube;
mod dft;
mod dwt;
mod fqc;
mod normalizer;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cube::{assemble_frequency_cube, ColorSpace, FrequencyCube, TransformConfig, TransformSet};
pub use dft::{blockwise_dft, blockwise_idft};
pub use dwt::{blockwise_haar_dwt, blockwise_haar_idwt, upsample_nearest, SubbandSet};
pub use fqc::{read_fqc, write_fqc, FQC_MAGIC};
pub use normalizer::{fit_channel_normalizer, ChannelNormalizer, STD_FLOOR};

/// Tile size for blockwise transforms. `Full` uses one block spanning the
/// whole image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlockSize {
    Pixels(usize),
    Full,
}

impl BlockSize {
    /// Block height and width for an image of the given size.
    pub fn resolve(self, height: usize, width: usize) -> (usize, usize) {
        match self {
            BlockSize::Pixels(n) => (n, n),
            BlockSize::Full => (height, width),
        }
    }

    pub(crate) fn check_tiling(self, height: usize, width: usize) -> Result<(usize, usize)> {
        let (bh, bw) = self.resolve(height, width);
        if bh == 0 || bw == 0 {
            return Err(Error::invalid_input("block size must be positive"));
        }
        if height % bh != 0 || width % bw != 0 {
            return Err(Error::invalid_input(format!(
                "image {height}x{width} is not divisible into {bh}x{bw} blocks"
            )));
        }
        Ok((bh, bw))
    }
}

impl Default for BlockSize {
    fn default() -> Self {
        BlockSize::Pixels(8)
    }
}

impl fmt::Display for BlockSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BlockSize::Pixels(n) => write!(f, "{n}"),
            BlockSize::Full => f.write_str("full"),
        }
    }
}

impl FromStr for BlockSize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "full" => Ok(BlockSize::Full),
            other => match other.parse::<usize>() {
                Ok(n) if n > 0 => Ok(BlockSize::Pixels(n)),
                _ => Err(Error::invalid_config(format!(
                    "block size must be a positive integer or \"full\", got {s:?}"
                ))),
            },
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum BlockSizeRepr {
    Pixels(usize),
    Named(String),
}

impl Serialize for BlockSize {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            BlockSize::Pixels(n) => BlockSizeRepr::Pixels(n),
            BlockSize::Full => BlockSizeRepr::Named("full".into()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for BlockSize {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match BlockSizeRepr::deserialize(d)? {
            BlockSizeRepr::Pixels(0) => {
                Err(serde::de::Error::custom("block size must be positive"))
            }
            BlockSizeRepr::Pixels(n) => Ok(BlockSize::Pixels(n)),
            BlockSizeRepr::Named(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_size_parsing_and_serde() {
        assert_eq!("8".parse::<BlockSize>().unwrap(), BlockSize::Pixels(8));
        assert_eq!("full".parse::<BlockSize>().unwrap(), BlockSize::Full);
        assert!("0".parse::<BlockSize>().is_err());
        assert!("big".parse::<BlockSize>().is_err());
        assert_eq!(serde_json::to_string(&BlockSize::Pixels(16)).unwrap(), "16");
        assert_eq!(serde_json::to_string(&BlockSize::Full).unwrap(), "\"full\"");
        assert_eq!(
            serde_json::from_str::<BlockSize>("\"full\"").unwrap(),
            BlockSize::Full
        );
        assert_eq!(
            serde_json::from_str::<BlockSize>("32").unwrap(),
            BlockSize::Pixels(32)
        );
    }

    #[test]
    fn tiling_check() {
        assert_eq!(BlockSize::Pixels(8).check_tiling(64, 32).unwrap(), (8, 8));
        assert_eq!(BlockSize::Full.check_tiling(12, 20).unwrap(), (12, 20));
        assert!(BlockSize::Pixels(8).check_tiling(60, 64).is_err());
    }
}
