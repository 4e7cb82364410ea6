//! `FQC1` cube files: the magic `FQC1`, little-endian `u32` height, width and
//! channel count, then `height * width * channels` little-endian `f32`
//! values in channel-last row-major order.

use std::fs;
use std::path::Path;

use super::FrequencyCube;
use crate::error::{Error, Result};
use crate::image::PlanarImage;

pub const FQC_MAGIC: &[u8; 4] = b"FQC1";

pub fn encode_fqc(cube: &PlanarImage) -> Vec<u8> {
    let (h, w, c) = cube.dims();
    let mut buf = Vec::with_capacity(16 + 4 * h * w * c);
    buf.extend_from_slice(FQC_MAGIC);
    for d in [h, w, c] {
        buf.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for &v in cube.data() {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    buf
}

pub fn decode_fqc(bytes: &[u8]) -> Result<PlanarImage> {
    let bad = |reason: String| Error::Format {
        what: "FQC1",
        reason,
    };
    if bytes.len() < 16 || &bytes[..4] != FQC_MAGIC {
        return Err(bad("missing FQC1 header".into()));
    }
    let dim =
        |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
    let (h, w, c) = (dim(0), dim(1), dim(2));
    let expected = h
        .checked_mul(w)
        .and_then(|n| n.checked_mul(c))
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| bad("dimensions overflow".into()))?;
    if bytes.len() - 16 != expected {
        return Err(bad(format!(
            "payload is {} bytes, expected {expected} for {h}x{w}x{c}",
            bytes.len() - 16
        )));
    }
    let data = bytes[16..]
        .chunks_exact(4)
        .map(|b| f64::from(f32::from_le_bytes(b.try_into().unwrap())))
        .collect();
    PlanarImage::new(h, w, c, data).map_err(|e| bad(e.to_string()))
}

pub fn write_fqc(path: &Path, cube: &FrequencyCube) -> Result<()> {
    fs::write(path, encode_fqc(cube.planes())).map_err(|e| Error::io(path, e))
}

pub fn read_fqc(path: &Path) -> Result<FrequencyCube> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(FrequencyCube::unlabeled(decode_fqc(&bytes)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let img = PlanarImage::from_fn(2, 3, 18, |y, x, c| (y * 54 + x * 18 + c) as f64);
        let bytes = encode_fqc(&img);
        assert_eq!(&bytes[..4], b"FQC1");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 18);
        assert_eq!(bytes.len(), 16 + 4 * 2 * 3 * 18);
        // third value is channel 2 of pixel (0, 0)
        assert_eq!(f32::from_le_bytes(bytes[24..28].try_into().unwrap()), 2.0);
    }

    #[test]
    fn rejects_garbage() {
        assert!(decode_fqc(b"FQC2\0\0\0\0\0\0\0\0\0\0\0\0").is_err());
        let mut bytes = encode_fqc(&PlanarImage::zeros(2, 2, 1));
        bytes.pop();
        assert!(decode_fqc(&bytes).is_err());
    }

    proptest! {
        #[test]
        fn f32_values_round_trip_exactly(vals in proptest::collection::vec(-1e6f32..1e6, 12)) {
            let img = PlanarImage::new(2, 2, 3, vals.iter().map(|&v| f64::from(v)).collect()).unwrap();
            prop_assert_eq!(decode_fqc(&encode_fqc(&img)).unwrap(), img);
        }
    }
}
