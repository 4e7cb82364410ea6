//! Benchmark fixtures shared by the criterion benches.

use tsnet_core::PlanarImage;

/// A deterministic RGB test pattern in `[0, 1]`.
pub fn test_image(size: usize) -> PlanarImage {
    PlanarImage::from_fn(size, size, 3, |y, x, c| {
        let v = ((y * 31 + x * 17 + c * 7) % 97) as f64 / 96.0;
        0.25 + 0.5 * v
    })
}
