use std::f64::consts::FRAC_1_SQRT_2;

use super::BlockSize;
use crate::error::{Error, Result};
use crate::image::PlanarImage;

/// The four single-level Haar subbands of a channel, each `(H/2) x (W/2)`.
///
/// `hl` is high-pass across columns (horizontal detail) and low-pass across
/// rows; `lh` is the opposite.
#[derive(Debug, Clone, PartialEq)]
pub struct SubbandSet {
    pub ll: PlanarImage,
    pub hl: PlanarImage,
    pub lh: PlanarImage,
    pub hh: PlanarImage,
}

impl SubbandSet {
    pub fn energy(&self) -> f64 {
        [&self.ll, &self.hl, &self.lh, &self.hh]
            .iter()
            .flat_map(|b| b.data())
            .map(|v| v * v)
            .sum()
    }

    fn dims(&self) -> Result<(usize, usize)> {
        let (h, w, c) = self.ll.dims();
        for band in [&self.hl, &self.lh, &self.hh] {
            if band.dims() != (h, w, c) {
                return Err(Error::invalid_input(format!(
                    "subband shapes differ: {:?} vs {:?}",
                    self.ll.dims(),
                    band.dims()
                )));
            }
        }
        if c != 1 {
            return Err(Error::invalid_input("subbands must be single-channel"));
        }
        Ok((h, w))
    }
}

fn check_even_blocks(block_size: BlockSize, h: usize, w: usize) -> Result<(usize, usize)> {
    let (bh, bw) = block_size.resolve(h, w);
    if bh % 2 != 0 || bw % 2 != 0 {
        return Err(Error::invalid_input(format!(
            "Haar blocks must have even size, got {bh}x{bw}"
        )));
    }
    block_size.check_tiling(h, w)
}

/// Single-level orthonormal Haar analysis of each block.
///
/// Rows are filtered first, then columns, inside every block; each block's
/// `(bh/2) x (bw/2)` patches are placed at the block's position in the
/// half-resolution subband planes.
pub fn blockwise_haar_dwt(channel: &PlanarImage, block_size: BlockSize) -> Result<SubbandSet> {
    channel.require_channels(1)?;
    let (h, w, _) = channel.dims();
    let (bh, bw) = check_even_blocks(block_size, h, w)?;
    let (hh_, hw) = (h / 2, w / 2);
    let mut ll = PlanarImage::zeros(hh_, hw, 1);
    let mut hl = PlanarImage::zeros(hh_, hw, 1);
    let mut lh = PlanarImage::zeros(hh_, hw, 1);
    let mut hh = PlanarImage::zeros(hh_, hw, 1);

    let src = channel.data();
    // Row pass output for one block: low half then high half of each row.
    let mut low = vec![0.0; bh * (bw / 2)];
    let mut high = vec![0.0; bh * (bw / 2)];
    let half_w = bw / 2;
    for by in (0..h).step_by(bh) {
        for bx in (0..w).step_by(bw) {
            for y in 0..bh {
                let row = &src[(by + y) * w + bx..(by + y) * w + bx + bw];
                for (k, pair) in row.chunks_exact(2).enumerate() {
                    low[y * half_w + k] = (pair[0] + pair[1]) * FRAC_1_SQRT_2;
                    high[y * half_w + k] = (pair[0] - pair[1]) * FRAC_1_SQRT_2;
                }
            }
            for y in 0..bh / 2 {
                let oy = by / 2 + y;
                for k in 0..half_w {
                    let ox = bx / 2 + k;
                    let i = oy * hw + ox;
                    let (lt, lb) = (low[2 * y * half_w + k], low[(2 * y + 1) * half_w + k]);
                    let (ht, hb) = (high[2 * y * half_w + k], high[(2 * y + 1) * half_w + k]);
                    ll.data_mut()[i] = (lt + lb) * FRAC_1_SQRT_2;
                    lh.data_mut()[i] = (lt - lb) * FRAC_1_SQRT_2;
                    hl.data_mut()[i] = (ht + hb) * FRAC_1_SQRT_2;
                    hh.data_mut()[i] = (ht - hb) * FRAC_1_SQRT_2;
                }
            }
        }
    }
    Ok(SubbandSet { ll, hl, lh, hh })
}

/// Haar synthesis; exact inverse of [`blockwise_haar_dwt`].
pub fn blockwise_haar_idwt(subbands: &SubbandSet, block_size: BlockSize) -> Result<PlanarImage> {
    let (sh, sw) = subbands.dims()?;
    let (h, w) = (sh * 2, sw * 2);
    let (bh, bw) = check_even_blocks(block_size, h, w)?;
    let mut out = PlanarImage::zeros(h, w, 1);
    let s = FRAC_1_SQRT_2;
    for by in (0..h).step_by(bh) {
        for bx in (0..w).step_by(bw) {
            for y in 0..bh / 2 {
                for k in 0..bw / 2 {
                    let i = (by / 2 + y) * sw + bx / 2 + k;
                    let (ll, hl) = (subbands.ll.data()[i], subbands.hl.data()[i]);
                    let (lh, hh) = (subbands.lh.data()[i], subbands.hh.data()[i]);
                    // undo the column pass
                    let (lt, lb) = ((ll + lh) * s, (ll - lh) * s);
                    let (ht, hb) = ((hl + hh) * s, (hl - hh) * s);
                    // undo the row pass
                    let top = (by + 2 * y) * w + bx + 2 * k;
                    let bottom = top + w;
                    let d = out.data_mut();
                    d[top] = (lt + ht) * s;
                    d[top + 1] = (lt - ht) * s;
                    d[bottom] = (lb + hb) * s;
                    d[bottom + 1] = (lb - hb) * s;
                }
            }
        }
    }
    Ok(out)
}

/// Replicates every sample into a `factor x factor` tile.
pub fn upsample_nearest(channel: &PlanarImage, factor: usize) -> Result<PlanarImage> {
    if factor < 1 {
        return Err(Error::invalid_input("upsampling factor must be at least 1"));
    }
    let (h, w, c) = channel.dims();
    Ok(PlanarImage::from_fn(
        h * factor,
        w * factor,
        c,
        |y, x, ch| channel.get(y / factor, x / factor, ch),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_goes_to_ll() {
        let img = PlanarImage::filled(8, 8, 1, 0.3);
        let sb = blockwise_haar_dwt(&img, BlockSize::Pixels(8)).unwrap();
        assert_eq!(sb.ll.dims(), (4, 4, 1));
        assert!(sb.ll.data().iter().all(|&v| (v - 0.6).abs() < 1e-12));
        for band in [&sb.hl, &sb.lh, &sb.hh] {
            assert!(band.data().iter().all(|&v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn checkerboard_goes_to_hh() {
        let img =
            PlanarImage::from_fn(8, 8, 1, |y, x, _| if (x + y) % 2 == 0 { 1.0 } else { -1.0 });
        let sb = blockwise_haar_dwt(&img, BlockSize::Pixels(8)).unwrap();
        assert!(sb.hh.data().iter().all(|&v| (v - 2.0).abs() < 1e-12));
        for band in [&sb.ll, &sb.hl, &sb.lh] {
            assert!(band.data().iter().all(|&v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn matches_closed_form_window_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let img = PlanarImage::from_fn(16, 24, 1, |_, _, _| rng.random::<f64>() * 2.0 - 1.0);
        let sb = blockwise_haar_dwt(&img, BlockSize::Pixels(8)).unwrap();
        for y in 0..8 {
            for x in 0..12 {
                let a = img.get(2 * y, 2 * x, 0);
                let b = img.get(2 * y, 2 * x + 1, 0);
                let c = img.get(2 * y + 1, 2 * x, 0);
                let d = img.get(2 * y + 1, 2 * x + 1, 0);
                assert!((sb.ll.get(y, x, 0) - (a + b + c + d) / 2.0).abs() < 1e-12);
                assert!((sb.hl.get(y, x, 0) - (a - b + c - d) / 2.0).abs() < 1e-12);
                assert!((sb.lh.get(y, x, 0) - (a + b - c - d) / 2.0).abs() < 1e-12);
                assert!((sb.hh.get(y, x, 0) - (a - b - c + d) / 2.0).abs() < 1e-12);
            }
        }
        let energy: f64 = img.data().iter().map(|v| v * v).sum();
        assert!((sb.energy() - energy).abs() <= 1e-9 * energy);
    }

    #[test]
    fn perfect_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let img = PlanarImage::from_fn(32, 32, 1, |_, _, _| rng.random::<f64>());
        for bs in [
            BlockSize::Pixels(2),
            BlockSize::Pixels(8),
            BlockSize::Pixels(16),
            BlockSize::Full,
        ] {
            let sb = blockwise_haar_dwt(&img, bs).unwrap();
            let back = blockwise_haar_idwt(&sb, bs).unwrap();
            assert!(back.max_abs_diff(&img) < 1e-9, "{bs}");
        }
    }

    #[test]
    fn synthesis_of_zero_and_constant_ll() {
        let zero = PlanarImage::zeros(4, 4, 1);
        let sb = SubbandSet {
            ll: zero.clone(),
            hl: zero.clone(),
            lh: zero.clone(),
            hh: zero.clone(),
        };
        let out = blockwise_haar_idwt(&sb, BlockSize::Pixels(8)).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
        let sb = SubbandSet {
            ll: PlanarImage::filled(4, 4, 1, 2.0 * 0.7),
            ..sb
        };
        let out = blockwise_haar_idwt(&sb, BlockSize::Pixels(8)).unwrap();
        assert!(out.data().iter().all(|&v| (v - 0.7).abs() < 1e-12));
    }

    #[test]
    fn errors() {
        let img = PlanarImage::zeros(12, 12, 1);
        assert!(matches!(
            blockwise_haar_dwt(&img, BlockSize::Pixels(3)),
            Err(Error::InvalidInput(_))
        ));
        assert!(blockwise_haar_dwt(&PlanarImage::zeros(7, 8, 1), BlockSize::Full).is_err());
        let sb = SubbandSet {
            ll: PlanarImage::zeros(4, 4, 1),
            hl: PlanarImage::zeros(4, 4, 1),
            lh: PlanarImage::zeros(4, 2, 1),
            hh: PlanarImage::zeros(4, 4, 1),
        };
        assert!(matches!(
            blockwise_haar_idwt(&sb, BlockSize::Pixels(8)),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn nearest_upsampling() {
        let img = PlanarImage::new(2, 2, 1, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(upsample_nearest(&img, 1).unwrap(), img);
        let up = upsample_nearest(&img, 2).unwrap();
        assert_eq!(
            up.data(),
            &[1.0, 1.0, 2.0, 2.0, 1.0, 1.0, 2.0, 2.0, 3.0, 3.0, 4.0, 4.0, 3.0, 3.0, 4.0, 4.0]
        );
        assert_eq!(up.mean(), img.mean());
        assert!(upsample_nearest(&img, 0).is_err());
    }
}
