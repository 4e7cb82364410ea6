//! RGB <-> YCbCr conversion driven by luma weights.
//!
//! Luma is `Y = k_ry R + k_gy G + k_by B` with `k_gy = 1 - k_ry - k_by`.
//! Chroma is stored zero-centered. The conventional layout scales the color
//! differences into `[-0.5, 0.5]`:
//!
//! ```text
//! Cb = (B - Y) / (2 (1 - k_by))      Cr = (R - Y) / (2 (1 - k_ry))
//! ```
//!
//! [`ChromaConvention::SwappedUnscaled`] reproduces the alternative literal
//! form `Cr = B - Y`, `Cb = R - Y` without scaling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::PlanarImage;

/// Luma weights of a YCbCr standard. `k_gy` is derived from the other two.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCoefficients", into = "RawCoefficients")]
pub struct ColorCoefficients {
    k_ry: f64,
    k_by: f64,
}

#[derive(Serialize, Deserialize)]
struct RawCoefficients {
    k_ry: f64,
    k_by: f64,
}

impl TryFrom<RawCoefficients> for ColorCoefficients {
    type Error = Error;
    fn try_from(raw: RawCoefficients) -> Result<Self> {
        ColorCoefficients::new(raw.k_ry, raw.k_by)
    }
}

impl From<ColorCoefficients> for RawCoefficients {
    fn from(c: ColorCoefficients) -> Self {
        RawCoefficients {
            k_ry: c.k_ry,
            k_by: c.k_by,
        }
    }
}

impl ColorCoefficients {
    /// ITU-R BT.601.
    pub const ITU601: ColorCoefficients = ColorCoefficients {
        k_ry: 0.299,
        k_by: 0.114,
    };
    /// ITU-R BT.709.
    pub const ITU709: ColorCoefficients = ColorCoefficients {
        k_ry: 0.2126,
        k_by: 0.0722,
    };
    /// SMPTE 240M.
    pub const SMPTE240M: ColorCoefficients = ColorCoefficients {
        k_ry: 0.212,
        k_by: 0.087,
    };

    pub fn new(k_ry: f64, k_by: f64) -> Result<Self> {
        let k_gy = 1.0 - k_ry - k_by;
        if !(k_ry > 0.0 && k_by > 0.0 && k_gy > 0.0) || !k_ry.is_finite() || !k_by.is_finite() {
            return Err(Error::invalid_config(format!(
                "luma weights must be positive and sum to 1 (k_ry={k_ry}, k_by={k_by}, k_gy={k_gy})"
            )));
        }
        Ok(Self { k_ry, k_by })
    }

    pub fn k_ry(&self) -> f64 {
        self.k_ry
    }

    pub fn k_gy(&self) -> f64 {
        1.0 - self.k_ry - self.k_by
    }

    pub fn k_by(&self) -> f64 {
        self.k_by
    }

    /// Luma written relative to G so that gray pixels give `Y == G` exactly.
    #[inline]
    fn luma(&self, r: f64, g: f64, b: f64) -> f64 {
        (g + self.k_ry * (r - g) + self.k_by * (b - g)).clamp(0.0, 1.0)
    }

    fn cb_scale(&self) -> f64 {
        2.0 * (1.0 - self.k_by)
    }

    fn cr_scale(&self) -> f64 {
        2.0 * (1.0 - self.k_ry)
    }
}

impl Default for ColorCoefficients {
    fn default() -> Self {
        Self::ITU601
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChromaConvention {
    /// Cb from blue, Cr from red, scaled into `[-0.5, 0.5]`.
    #[default]
    Conventional,
    /// `Cr = B - Y`, `Cb = R - Y`, unscaled.
    SwappedUnscaled,
}

/// Converts an RGB image to zero-centered YCbCr using the conventional layout.
pub fn rgb_to_ycbcr(img: &PlanarImage, coeffs: &ColorCoefficients) -> Result<PlanarImage> {
    rgb_to_ycbcr_with(img, coeffs, ChromaConvention::Conventional)
}

pub fn ycbcr_to_rgb(img: &PlanarImage, coeffs: &ColorCoefficients) -> Result<PlanarImage> {
    ycbcr_to_rgb_with(img, coeffs, ChromaConvention::Conventional)
}

pub fn rgb_to_ycbcr_with(
    img: &PlanarImage,
    coeffs: &ColorCoefficients,
    convention: ChromaConvention,
) -> Result<PlanarImage> {
    img.require_channels(3)?;
    let mut out = img.clone();
    for px in out.data_mut().chunks_exact_mut(3) {
        let (r, g, b) = (px[0], px[1], px[2]);
        let y = coeffs.luma(r, g, b);
        let (cb, cr) = match convention {
            ChromaConvention::Conventional => {
                ((b - y) / coeffs.cb_scale(), (r - y) / coeffs.cr_scale())
            }
            ChromaConvention::SwappedUnscaled => (r - y, b - y),
        };
        px[0] = y;
        px[1] = cb;
        px[2] = cr;
    }
    Ok(out)
}

pub fn ycbcr_to_rgb_with(
    img: &PlanarImage,
    coeffs: &ColorCoefficients,
    convention: ChromaConvention,
) -> Result<PlanarImage> {
    img.require_channels(3)?;
    let mut out = img.clone();
    for px in out.data_mut().chunks_exact_mut(3) {
        let (y, cb, cr) = (px[0], px[1], px[2]);
        let (r, b) = match convention {
            ChromaConvention::Conventional => {
                (y + coeffs.cr_scale() * cr, y + coeffs.cb_scale() * cb)
            }
            ChromaConvention::SwappedUnscaled => (y + cb, y + cr),
        };
        let g = (y - coeffs.k_ry * r - coeffs.k_by * b) / coeffs.k_gy();
        px[0] = r.clamp(0.0, 1.0);
        px[1] = g.clamp(0.0, 1.0);
        px[2] = b.clamp(0.0, 1.0);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pixel(r: f64, g: f64, b: f64) -> PlanarImage {
        PlanarImage::new(1, 1, 3, vec![r, g, b]).unwrap()
    }

    #[test]
    fn itu601_green_weight_is_derived() {
        let c = ColorCoefficients::ITU601;
        assert!((c.k_gy() - 0.587).abs() < 1e-15);
        assert!((c.k_ry() + c.k_gy() + c.k_by() - 1.0).abs() < 1e-15);
        assert_eq!(ColorCoefficients::new(0.299, 0.114).unwrap(), c);
    }

    #[test]
    fn invalid_weights_rejected_at_construction() {
        assert!(ColorCoefficients::new(0.0, 0.2).is_err());
        assert!(ColorCoefficients::new(0.6, 0.5).is_err());
        assert!(ColorCoefficients::new(-0.1, 0.2).is_err());
        assert!(ColorCoefficients::new(f64::NAN, 0.2).is_err());
        let bad: std::result::Result<ColorCoefficients, _> =
            serde_json::from_str(r#"{"k_ry":0.7,"k_by":0.4}"#);
        assert!(bad.is_err());
    }

    #[test]
    fn gray_has_zero_chroma() {
        let out = rgb_to_ycbcr(&pixel(0.5, 0.5, 0.5), &ColorCoefficients::ITU601).unwrap();
        assert_eq!(out.data(), &[0.5, 0.0, 0.0]);
    }

    #[test]
    fn pure_red() {
        let out = rgb_to_ycbcr(&pixel(1.0, 0.0, 0.0), &ColorCoefficients::ITU601).unwrap();
        let d = out.data();
        assert!((d[0] - 0.299).abs() < 1e-12);
        assert!((d[1] - (-0.299 / 1.772)).abs() < 1e-12);
        assert!((d[1] + 0.16874).abs() < 1e-5);
        assert!((d[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn inverse_of_red_and_gray() {
        let c = ColorCoefficients::ITU601;
        let red = ycbcr_to_rgb(&pixel(0.299, -0.299 / 1.772, 0.5), &c).unwrap();
        assert!(red.max_abs_diff(&pixel(1.0, 0.0, 0.0)) < 1e-6);
        let red_rounded = ycbcr_to_rgb(&pixel(0.299, -0.16874, 0.5), &c).unwrap();
        assert!(red_rounded.max_abs_diff(&pixel(1.0, 0.0, 0.0)) < 1e-5);
        let gray = ycbcr_to_rgb(&pixel(0.5, 0.0, 0.0), &c).unwrap();
        assert!(gray.max_abs_diff(&pixel(0.5, 0.5, 0.5)) < 1e-15);
    }

    #[test]
    fn wrong_channel_count_is_rejected() {
        let img = PlanarImage::zeros(2, 2, 1);
        assert!(matches!(
            rgb_to_ycbcr(&img, &ColorCoefficients::ITU601),
            Err(Error::InvalidInput(_))
        ));
        assert!(ycbcr_to_rgb(&img, &ColorCoefficients::ITU601).is_err());
    }

    #[test]
    fn swapped_convention_matches_literal_formula() {
        let c = ColorCoefficients::ITU601;
        let (r, g, b) = (0.9, 0.3, 0.2);
        let y = 0.299 * r + 0.587 * g + 0.114 * b;
        let out =
            rgb_to_ycbcr_with(&pixel(r, g, b), &c, ChromaConvention::SwappedUnscaled).unwrap();
        let d = out.data();
        assert!((d[0] - y).abs() < 1e-12);
        assert!((d[1] - (r - y)).abs() < 1e-12, "Cb = R - Y");
        assert!((d[2] - (b - y)).abs() < 1e-12, "Cr = B - Y");
        let back = ycbcr_to_rgb_with(&out, &c, ChromaConvention::SwappedUnscaled).unwrap();
        assert!(back.max_abs_diff(&pixel(r, g, b)) < 1e-12);
    }

    proptest! {
        #[test]
        fn round_trip_and_luma_range(px in proptest::collection::vec(0.0f64..=1.0, 3 * 16)) {
            let img = PlanarImage::new(4, 4, 3, px).unwrap();
            for coeffs in [ColorCoefficients::ITU601, ColorCoefficients::ITU709, ColorCoefficients::SMPTE240M] {
                let ycc = rgb_to_ycbcr(&img, &coeffs).unwrap();
                for p in ycc.data().chunks_exact(3) {
                    prop_assert!((0.0..=1.0).contains(&p[0]));
                    prop_assert!(p[1].abs() <= 0.5 + 1e-12 && p[2].abs() <= 0.5 + 1e-12);
                }
                let back = ycbcr_to_rgb(&ycc, &coeffs).unwrap();
                prop_assert!(back.max_abs_diff(&img) < 1e-6);
            }
        }

        #[test]
        fn gray_axis_is_exact(v in 0.0f64..=1.0) {
            let out = rgb_to_ycbcr(&pixel(v, v, v), &ColorCoefficients::ITU601).unwrap();
            prop_assert_eq!(out.data(), &[v, 0.0, 0.0][..]);
        }
    }
}
