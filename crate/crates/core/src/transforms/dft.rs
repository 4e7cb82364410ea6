use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::BlockSize;
use crate::error::{Error, Result};
use crate::image::PlanarImage;

/// Row and column plans for one block shape.
struct BlockPlan {
    rows: Arc<dyn Fft<f64>>,
    cols: Arc<dyn Fft<f64>>,
}

impl BlockPlan {
    fn new(bh: usize, bw: usize, inverse: bool) -> Self {
        let mut planner = FftPlanner::new();
        if inverse {
            BlockPlan {
                rows: planner.plan_fft_inverse(bw),
                cols: planner.plan_fft_inverse(bh),
            }
        } else {
            BlockPlan {
                rows: planner.plan_fft_forward(bw),
                cols: planner.plan_fft_forward(bh),
            }
        }
    }

    /// Unnormalized 2-D transform of a row-major `bh x bw` block, in place.
    fn transform(&self, block: &mut [Complex64], bh: usize, bw: usize, column: &mut [Complex64]) {
        for row in block.chunks_exact_mut(bw) {
            self.rows.process(row);
        }
        for x in 0..bw {
            for y in 0..bh {
                column[y] = block[y * bw + x];
            }
            self.cols.process(column);
            for y in 0..bh {
                block[y * bw + x] = column[y];
            }
        }
    }
}

/// Forward 2-D DFT applied independently to each non-overlapping block.
///
/// Coefficient `X[v, u]` of a block (vertical frequency `v`, horizontal
/// frequency `u`) is written at the block's pixel `(v, u)`. The forward
/// transform is unnormalized.
pub fn blockwise_dft(
    channel: &PlanarImage,
    block_size: BlockSize,
) -> Result<(PlanarImage, PlanarImage)> {
    channel.require_channels(1)?;
    let (h, w, _) = channel.dims();
    let (bh, bw) = block_size.check_tiling(h, w)?;
    let plan = BlockPlan::new(bh, bw, false);

    let mut real = PlanarImage::zeros(h, w, 1);
    let mut imag = PlanarImage::zeros(h, w, 1);
    let mut block = vec![Complex64::default(); bh * bw];
    let mut column = vec![Complex64::default(); bh];
    let src = channel.data();
    for by in (0..h).step_by(bh) {
        for bx in (0..w).step_by(bw) {
            for y in 0..bh {
                for x in 0..bw {
                    block[y * bw + x] = Complex64::new(src[(by + y) * w + bx + x], 0.0);
                }
            }
            plan.transform(&mut block, bh, bw, &mut column);
            for y in 0..bh {
                for x in 0..bw {
                    let i = (by + y) * w + bx + x;
                    real.data_mut()[i] = block[y * bw + x].re;
                    imag.data_mut()[i] = block[y * bw + x].im;
                }
            }
        }
    }
    Ok((real, imag))
}

/// Inverse of [`blockwise_dft`], normalized by `1 / (bh * bw)`.
///
/// Returns the real part of the reconstruction.
pub fn blockwise_idft(
    real: &PlanarImage,
    imag: &PlanarImage,
    block_size: BlockSize,
) -> Result<PlanarImage> {
    real.require_channels(1)?;
    imag.require_channels(1)?;
    if real.dims() != imag.dims() {
        return Err(Error::invalid_input(format!(
            "real {:?} and imaginary {:?} planes differ in shape",
            real.dims(),
            imag.dims()
        )));
    }
    let (h, w, _) = real.dims();
    let (bh, bw) = block_size.check_tiling(h, w)?;
    let plan = BlockPlan::new(bh, bw, true);
    let scale = 1.0 / (bh * bw) as f64;

    let mut out = PlanarImage::zeros(h, w, 1);
    let mut block = vec![Complex64::default(); bh * bw];
    let mut column = vec![Complex64::default(); bh];
    for by in (0..h).step_by(bh) {
        for bx in (0..w).step_by(bw) {
            for y in 0..bh {
                for x in 0..bw {
                    let i = (by + y) * w + bx + x;
                    block[y * bw + x] = Complex64::new(real.data()[i], imag.data()[i]);
                }
            }
            plan.transform(&mut block, bh, bw, &mut column);
            for y in 0..bh {
                for x in 0..bw {
                    out.data_mut()[(by + y) * w + bx + x] = block[y * bw + x].re * scale;
                }
            }
        }
    }
    Ok(out)
}
