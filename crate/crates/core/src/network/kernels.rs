//! Convolution and dense kernels over `f32` or `f64`, built on im2col and
//! a blocked GEMM. Activations are channel-last (`H x W x C`); weights are
//! held in "row" layout `(Cout, kh, kw, Cin)` so that one im2col row lines
//! up with one weight row.

use std::ops::{Add, AddAssign, Mul, Sub};

pub trait Scalar:
    Copy
    + Default
    + Send
    + Sync
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + AddAssign
    + 'static
{
    const ZERO: Self;
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;

    /// `C = alpha * A * B + beta * C` with arbitrary strides.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: &[Self],
        rsa: isize,
        csa: isize,
        b: &[Self],
        rsb: isize,
        csb: isize,
        beta: Self,
        c: &mut [Self],
        rsc: isize,
        csc: isize,
    );
}

macro_rules! scalar_impl {
    ($t:ty, $gemm:path) => {
        impl Scalar for $t {
            const ZERO: Self = 0.0;

            #[inline]
            fn from_f64(v: f64) -> Self {
                v as $t
            }

            #[inline]
            fn to_f64(self) -> f64 {
                self as f64
            }

            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                a: &[Self],
                rsa: isize,
                csa: isize,
                b: &[Self],
                rsb: isize,
                csb: isize,
                beta: Self,
                c: &mut [Self],
                rsc: isize,
                csc: isize,
            ) {
                let extent = |rows: usize, cols: usize, rs: isize, cs: isize| {
                    if rows == 0 || cols == 0 {
                        0
                    } else {
                        (rows as isize - 1) * rs + (cols as isize - 1) * cs + 1
                    }
                };
                assert!(
                    a.len() as isize >= extent(m, k, rsa, csa),
                    "gemm: A too small"
                );
                assert!(
                    b.len() as isize >= extent(k, n, rsb, csb),
                    "gemm: B too small"
                );
                assert!(
                    c.len() as isize >= extent(m, n, rsc, csc),
                    "gemm: C too small"
                );
                // SAFETY: the asserts above bound every strided access.
                unsafe {
                    $gemm(
                        m,
                        k,
                        n,
                        1.0,
                        a.as_ptr(),
                        rsa,
                        csa,
                        b.as_ptr(),
                        rsb,
                        csb,
                        beta,
                        c.as_mut_ptr(),
                        rsc,
                        csc,
                    )
                }
            }
        }
    };
}

scalar_impl!(f32, matrixmultiply::sgemm);
scalar_impl!(f64, matrixmultiply::dgemm);

/// A convolution with its weights in row layout.
#[derive(Debug, Clone)]
pub struct Conv<T> {
    pub cin: usize,
    pub cout: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    /// `(cout, kernel, kernel, cin)`
    pub weight: Vec<T>,
    /// Empty when the convolution has no bias.
    pub bias: Vec<T>,
}

/// Gradients of one convolution, in the same layout as [`Conv`].
#[derive(Debug, Clone)]
pub struct ConvGrad<T> {
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Conv<T> {
    /// Converts an `(cout, cin, kh, kw)` weight into row layout.
    pub fn from_oihw(
        weight: &[f64],
        bias: Option<&[f64]>,
        cin: usize,
        cout: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
    ) -> Self {
        let kk = kernel * kernel;
        let mut row = vec![T::ZERO; cout * kk * cin];
        for o in 0..cout {
            for i in 0..cin {
                for k in 0..kk {
                    row[(o * kk + k) * cin + i] = T::from_f64(weight[(o * cin + i) * kk + k]);
                }
            }
        }
        Conv {
            cin,
            cout,
            kernel,
            stride,
            pad,
            weight: row,
            bias: bias
                .map(|b| b.iter().map(|&v| T::from_f64(v)).collect())
                .unwrap_or_default(),
        }
    }

    pub fn out_dims(&self, h: usize, w: usize) -> (usize, usize) {
        (
            (h + 2 * self.pad - self.kernel) / self.stride + 1,
            (w + 2 * self.pad - self.kernel) / self.stride + 1,
        )
    }

    fn row_len(&self) -> usize {
        self.kernel * self.kernel * self.cin
    }

    fn im2col(&self, input: &[T], h: usize, w: usize, col: &mut Vec<T>) {
        let (ho, wo) = self.out_dims(h, w);
        let k = self.row_len();
        col.clear();
        col.resize(ho * wo * k, T::ZERO);
        let cin = self.cin;
        for oy in 0..ho {
            for ox in 0..wo {
                let row = &mut col[(oy * wo + ox) * k..(oy * wo + ox + 1) * k];
                for ky in 0..self.kernel {
                    let iy = (oy * self.stride + ky) as isize - self.pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for kx in 0..self.kernel {
                        let ix = (ox * self.stride + kx) as isize - self.pad as isize;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let src = (iy as usize * w + ix as usize) * cin;
                        let dst = (ky * self.kernel + kx) * cin;
                        row[dst..dst + cin].copy_from_slice(&input[src..src + cin]);
                    }
                }
            }
        }
    }

    fn col2im(&self, col: &[T], h: usize, w: usize) -> Vec<T> {
        let (ho, wo) = self.out_dims(h, w);
        let k = self.row_len();
        let cin = self.cin;
        let mut out = vec![T::ZERO; h * w * cin];
        for oy in 0..ho {
            for ox in 0..wo {
                let row = &col[(oy * wo + ox) * k..(oy * wo + ox + 1) * k];
                for ky in 0..self.kernel {
                    let iy = (oy * self.stride + ky) as isize - self.pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for kx in 0..self.kernel {
                        let ix = (ox * self.stride + kx) as isize - self.pad as isize;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let dst = (iy as usize * w + ix as usize) * cin;
                        let src = (ky * self.kernel + kx) * cin;
                        for (o, &v) in out[dst..dst + cin].iter_mut().zip(&row[src..src + cin]) {
                            *o += v;
                        }
                    }
                }
            }
        }
        out
    }

    /// Output `(ho * wo, cout)` for an `(h, w, cin)` input.
    pub fn forward(&self, input: &[T], h: usize, w: usize, col: &mut Vec<T>) -> Vec<T> {
        let (ho, wo) = self.out_dims(h, w);
        let p = ho * wo;
        let k = self.row_len();
        self.im2col(input, h, w, col);
        let mut out = vec![T::ZERO; p * self.cout];
        if !self.bias.is_empty() {
            for px in out.chunks_exact_mut(self.cout) {
                px.copy_from_slice(&self.bias);
            }
        }
        let beta = if self.bias.is_empty() {
            T::ZERO
        } else {
            T::from_f64(1.0)
        };
        // out (p x cout) = col (p x k) * weight^T (k x cout)
        T::gemm(
            p,
            k,
            self.cout,
            col,
            k as isize,
            1,
            &self.weight,
            1,
            k as isize,
            beta,
            &mut out,
            self.cout as isize,
            1,
        );
        out
    }

    /// Weight/bias gradients and, if requested, the input gradient.
    pub fn backward(
        &self,
        input: &[T],
        h: usize,
        w: usize,
        dout: &[T],
        need_input_grad: bool,
        col: &mut Vec<T>,
    ) -> (ConvGrad<T>, Option<Vec<T>>) {
        let (ho, wo) = self.out_dims(h, w);
        let p = ho * wo;
        let k = self.row_len();
        self.im2col(input, h, w, col);

        // dW (cout x k) = dout^T (cout x p) * col (p x k)
        let mut dw = vec![T::ZERO; self.cout * k];
        T::gemm(
            self.cout,
            p,
            k,
            dout,
            1,
            self.cout as isize,
            col,
            k as isize,
            1,
            T::ZERO,
            &mut dw,
            k as isize,
            1,
        );
        let db = if self.bias.is_empty() {
            Vec::new()
        } else {
            let mut db = vec![T::ZERO; self.cout];
            for px in dout.chunks_exact(self.cout) {
                for (d, &g) in db.iter_mut().zip(px) {
                    *d += g;
                }
            }
            db
        };

        let dinput = need_input_grad.then(|| {
            // dcol (p x k) = dout (p x cout) * W (cout x k)
            let mut dcol = std::mem::take(col);
            T::gemm(
                p,
                self.cout,
                k,
                dout,
                self.cout as isize,
                1,
                &self.weight,
                k as isize,
                1,
                T::ZERO,
                &mut dcol,
                k as isize,
                1,
            );
            let dx = self.col2im(&dcol, h, w);
            *col = dcol;
            dx
        });
        (
            ConvGrad {
                weight: dw,
                bias: db,
            },
            dinput,
        )
    }
}

impl<T: Scalar> ConvGrad<T> {
    /// Converts a row-layout weight gradient back to `(cout, cin, kh, kw)`.
    pub fn weight_oihw(&self, cin: usize, cout: usize, kernel: usize) -> Vec<f64> {
        let kk = kernel * kernel;
        let mut out = vec![0.0; cout * cin * kk];
        for o in 0..cout {
            for i in 0..cin {
                for k in 0..kk {
                    out[(o * cin + i) * kk + k] = self.weight[(o * kk + k) * cin + i].to_f64();
                }
            }
        }
        out
    }
}

#[inline]
pub fn relu_in_place<T: Scalar>(v: &mut [T]) {
    for x in v {
        if *x < T::ZERO {
            *x = T::ZERO;
        }
    }
}

/// Zeroes gradient entries where the forward activation was clipped.
#[inline]
pub fn relu_backward_in_place<T: Scalar>(grad: &mut [T], activation: &[T]) {
    for (g, &a) in grad.iter_mut().zip(activation) {
        if !(a > T::ZERO) {
            *g = T::ZERO;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Direct 4-loop convolution in `(cout, cin, kh, kw)` layout.
    fn naive_conv(
        input: &[f64],
        h: usize,
        w: usize,
        cin: usize,
        weight: &[f64],
        bias: &[f64],
        cout: usize,
        k: usize,
        stride: usize,
        pad: usize,
    ) -> Vec<f64> {
        let ho = (h + 2 * pad - k) / stride + 1;
        let wo = (w + 2 * pad - k) / stride + 1;
        let mut out = vec![0.0; ho * wo * cout];
        for oy in 0..ho {
            for ox in 0..wo {
                for o in 0..cout {
                    let mut acc = bias.get(o).copied().unwrap_or(0.0);
                    for i in 0..cin {
                        for ky in 0..k {
                            for kx in 0..k {
                                let iy = (oy * stride + ky) as isize - pad as isize;
                                let ix = (ox * stride + kx) as isize - pad as isize;
                                if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < w {
                                    acc += input[(iy as usize * w + ix as usize) * cin + i]
                                        * weight[((o * cin + i) * k + ky) * k + kx];
                                }
                            }
                        }
                    }
                    out[(oy * wo + ox) * cout + o] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn forward_matches_naive_convolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (h, w, cin, cout, k, stride, pad) in [
            (6, 5, 3, 4, 3, 1, 1),
            (8, 8, 2, 5, 3, 2, 1),
            (8, 6, 4, 3, 1, 2, 0),
        ] {
            let input: Vec<f64> = (0..h * w * cin)
                .map(|_| rng.random::<f64>() - 0.5)
                .collect();
            let weight: Vec<f64> = (0..cout * cin * k * k)
                .map(|_| rng.random::<f64>() - 0.5)
                .collect();
            let bias: Vec<f64> = (0..cout).map(|_| rng.random::<f64>()).collect();
            let conv = Conv::<f64>::from_oihw(&weight, Some(&bias), cin, cout, k, stride, pad);
            let got = conv.forward(&input, h, w, &mut Vec::new());
            let want = naive_conv(&input, h, w, cin, &weight, &bias, cout, k, stride, pad);
            assert_eq!(got.len(), want.len());
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).abs() < 1e-12);
            }
            let conv32 = Conv::<f32>::from_oihw(&weight, Some(&bias), cin, cout, k, stride, pad);
            let input32: Vec<f32> = input.iter().map(|&v| v as f32).collect();
            let got32 = conv32.forward(&input32, h, w, &mut Vec::new());
            for (a, b) in got32.iter().zip(&want) {
                assert!((f64::from(*a) - b).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn backward_is_the_adjoint_of_forward() {
        // <dout, conv(x)> is bilinear in (x, W): its gradients are the
        // backward outputs, checked here against the forward pass directly.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (h, w, cin, cout, k, stride, pad) = (7, 6, 3, 4, 3, 2, 1);
        let input: Vec<f64> = (0..h * w * cin)
            .map(|_| rng.random::<f64>() - 0.5)
            .collect();
        let weight: Vec<f64> = (0..cout * cin * k * k)
            .map(|_| rng.random::<f64>() - 0.5)
            .collect();
        let conv =
            Conv::<f64>::from_oihw(&weight, Some(&vec![0.0; cout]), cin, cout, k, stride, pad);
        let (ho, wo) = conv.out_dims(h, w);
        let dout: Vec<f64> = (0..ho * wo * cout)
            .map(|_| rng.random::<f64>() - 0.5)
            .collect();
        let (grad, dx) = conv.backward(&input, h, w, &dout, true, &mut Vec::new());
        let dx = dx.unwrap();
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let y = conv.forward(&input, h, w, &mut Vec::new());
        // bilinearity: <dout, y> = <dx, x> = <dW, W>
        assert!((dot(&dout, &y) - dot(&dx, &input)).abs() < 1e-10);
        let dw = grad.weight_oihw(cin, cout, k);
        assert!((dot(&dout, &y) - dot(&dw, &weight)).abs() < 1e-10);
        let db_expected: Vec<f64> = (0..cout)
            .map(|o| dout.iter().skip(o).step_by(cout).sum())
            .collect();
        for (a, b) in grad.bias.iter().zip(&db_expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
