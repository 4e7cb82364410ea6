//! Forward pass, softmax cross-entropy and exact backpropagation.
//!
//! Samples are processed independently (no batch statistics), so row `i`
//! of the logits depends only on sample `i`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernels::{relu_backward_in_place, relu_in_place, Conv, Scalar};
use super::spec::{is_decayed, NetworkSpec, NUM_CLASSES};
use super::tensor::{ParamSet, Tensor};
use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::image::PlanarImage;
use crate::seeding::{derive_rng, PURPOSE_INIT};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F64,
    F32,
}

/// A `(B, H, W, C)` batch of network inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub len: usize,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl Batch {
    pub fn from_images<'a>(images: impl IntoIterator<Item = &'a PlanarImage>) -> Result<Batch> {
        let mut iter = images.into_iter().peekable();
        let first = iter
            .peek()
            .ok_or_else(|| Error::invalid_input("empty batch"))?;
        let (height, width, channels) = first.dims();
        let mut data = Vec::new();
        let mut len = 0;
        for img in iter {
            if img.dims() != (height, width, channels) {
                return Err(Error::invalid_input(format!(
                    "batch mixes shapes {:?} and {:?}",
                    (height, width, channels),
                    img.dims()
                )));
            }
            data.extend_from_slice(img.data());
            len += 1;
        }
        Ok(Batch {
            len,
            height,
            width,
            channels,
            data,
        })
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        let n = self.height * self.width * self.channels;
        &self.data[i * n..(i + 1) * n]
    }
}

/// Network topology plus its weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub spec: NetworkSpec,
    pub params: ParamSet,
}

/// Scalar loss and its gradient with respect to every parameter.
#[derive(Debug, Clone)]
pub struct LossAndGrad {
    pub loss: f64,
    pub grads: ParamSet,
}

struct BlockLayers<T> {
    conv1: Conv<T>,
    conv2: Conv<T>,
    proj: Option<Conv<T>>,
}

struct Layers<T> {
    stem: Conv<T>,
    blocks: Vec<BlockLayers<T>>,
    /// `(2, features)`
    head_w: Vec<T>,
    head_b: Vec<T>,
}

struct BlockTrace<T> {
    h_in: usize,
    w_in: usize,
    h_out: usize,
    w_out: usize,
    a1: Vec<T>,
    out: Vec<T>,
}

struct Trace<T> {
    stem_out: Vec<T>,
    blocks: Vec<BlockTrace<T>>,
    pooled: Vec<T>,
    logits: [f64; NUM_CLASSES],
}

impl Network {
    /// Fan-in scaled uniform weights `U(-sqrt(6/fan_in), sqrt(6/fan_in))`,
    /// zero biases; deterministic in `seed`.
    pub fn init(spec: NetworkSpec, seed: u64) -> Result<Network> {
        use rand::Rng;
        spec.validate()?;
        let mut params = ParamSet::new();
        for (i, (name, shape)) in spec.param_shapes().into_iter().enumerate() {
            let mut t = Tensor::zeros(&shape);
            if is_decayed(&name) {
                let fan_in: usize = shape[1..].iter().product();
                let bound = (6.0 / fan_in as f64).sqrt();
                let mut rng = derive_rng(seed, &[PURPOSE_INIT, i as u64]);
                for v in &mut t.data {
                    *v = rng.random_range(-bound..bound);
                }
            }
            params.insert(name, t);
        }
        Ok(Network { spec, params })
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        let shapes = self.spec.param_shapes();
        if shapes.len() != self.params.len() {
            return Err(Error::invalid_input(format!(
                "expected {} parameter tensors, found {}",
                shapes.len(),
                self.params.len()
            )));
        }
        for (name, shape) in shapes {
            match self.params.get(&name) {
                Some(t) if t.shape == shape && t.data.len() == shape.iter().product::<usize>() => {}
                Some(t) => {
                    return Err(Error::invalid_input(format!(
                        "parameter {name} has shape {:?}, expected {shape:?}",
                        t.shape
                    )))
                }
                None => return Err(Error::invalid_input(format!("parameter {name} is missing"))),
            }
        }
        Ok(())
    }

    fn check_batch(&self, batch: &Batch) -> Result<()> {
        if batch.channels != self.spec.input_channels {
            return Err(Error::invalid_input(format!(
                "network expects {} input channels, batch has {}",
                self.spec.input_channels, batch.channels
            )));
        }
        let f = self.spec.downsampling();
        if batch.height == 0 || batch.width == 0 || batch.height % f != 0 || batch.width % f != 0 {
            return Err(Error::invalid_input(format!(
                "input {}x{} must be a positive multiple of {f}",
                batch.height, batch.width
            )));
        }
        if batch.data.len() != batch.len * batch.height * batch.width * batch.channels {
            return Err(Error::invalid_input("batch buffer length mismatch"));
        }
        Ok(())
    }

    fn layers<T: Scalar>(&self) -> Layers<T> {
        let p = &self.params;
        let conv = |name: &str, cin, cout, k, stride, pad, bias: bool| {
            Conv::from_oihw(
                &p.expect(&format!("{name}.weight")).data,
                bias.then(|| p.expect(&format!("{name}.bias")).data.as_slice()),
                cin,
                cout,
                k,
                stride,
                pad,
            )
        };
        let stem = conv(
            "stem",
            self.spec.input_channels,
            self.spec.stem_width,
            3,
            1,
            1,
            true,
        );
        let blocks = self
            .spec
            .blocks()
            .iter()
            .enumerate()
            .map(|(i, b)| BlockLayers {
                conv1: conv(
                    &format!("blocks.{i}.conv1"),
                    b.cin,
                    b.cout,
                    3,
                    b.stride,
                    1,
                    true,
                ),
                conv2: conv(&format!("blocks.{i}.conv2"), b.cout, b.cout, 3, 1, 1, true),
                proj: b.projection.then(|| {
                    conv(
                        &format!("blocks.{i}.proj"),
                        b.cin,
                        b.cout,
                        1,
                        b.stride,
                        0,
                        false,
                    )
                }),
            })
            .collect();
        let cast = |name: &str| {
            p.expect(name)
                .data
                .iter()
                .map(|&v| T::from_f64(v))
                .collect()
        };
        Layers {
            stem,
            blocks,
            head_w: cast("head.weight"),
            head_b: cast("head.bias"),
        }
    }

    /// Logits `(B, 2)` in 64-bit arithmetic.
    pub fn forward(&self, batch: &Batch) -> Result<Vec<[f64; NUM_CLASSES]>> {
        self.forward_with(batch, Precision::F64)
    }

    pub fn forward_with(
        &self,
        batch: &Batch,
        precision: Precision,
    ) -> Result<Vec<[f64; NUM_CLASSES]>> {
        self.validate()?;
        self.check_batch(batch)?;
        Ok(match precision {
            Precision::F64 => self.forward_typed::<f64>(batch),
            Precision::F32 => self.forward_typed::<f32>(batch),
        })
    }

    fn forward_typed<T: Scalar>(&self, batch: &Batch) -> Vec<[f64; NUM_CLASSES]> {
        let layers = self.layers::<T>();
        (0..batch.len)
            .into_par_iter()
            .map(|i| {
                let x: Vec<T> = batch.sample(i).iter().map(|&v| T::from_f64(v)).collect();
                layers.trace(&x, batch.height, batch.width).logits
            })
            .collect()
    }

    /// Mean softmax cross-entropy plus `weight_decay / 2 * sum ||W||^2`
    /// over weight tensors, with exact gradients.
    pub fn loss_and_grad(
        &self,
        batch: &Batch,
        labels: &[Label],
        weight_decay: f64,
    ) -> Result<LossAndGrad> {
        self.loss_and_grad_with(batch, labels, weight_decay, Precision::F64)
    }

    pub fn loss_and_grad_with(
        &self,
        batch: &Batch,
        labels: &[Label],
        weight_decay: f64,
        precision: Precision,
    ) -> Result<LossAndGrad> {
        self.validate()?;
        self.check_batch(batch)?;
        if labels.len() != batch.len {
            return Err(Error::invalid_input(format!(
                "{} labels for a batch of {}",
                labels.len(),
                batch.len
            )));
        }
        if batch.len == 0 {
            return Err(Error::invalid_input("empty batch"));
        }
        let per_sample: Vec<(f64, ParamSet)> = match precision {
            Precision::F64 => self.sample_grads::<f64>(batch, labels),
            Precision::F32 => self.sample_grads::<f32>(batch, labels),
        };

        // Summed in sample order so the result is independent of scheduling.
        let scale = 1.0 / batch.len as f64;
        let mut grads = self.params.zeros_like();
        let mut loss = 0.0;
        for (l, g) in &per_sample {
            loss += l;
            for ((_, acc), (_, t)) in grads.iter_mut().zip(g.iter()) {
                for (a, v) in acc.data.iter_mut().zip(&t.data) {
                    *a += v;
                }
            }
        }
        loss *= scale;
        for (name, g) in grads.iter_mut() {
            let w = self.params.expect(name);
            let decayed = is_decayed(name) && weight_decay != 0.0;
            if decayed {
                loss += 0.5 * weight_decay * w.sum_squares();
            }
            for (gv, wv) in g.data.iter_mut().zip(&w.data) {
                *gv *= scale;
                if decayed {
                    *gv += weight_decay * wv;
                }
            }
        }
        Ok(LossAndGrad { loss, grads })
    }

    fn sample_grads<T: Scalar>(&self, batch: &Batch, labels: &[Label]) -> Vec<(f64, ParamSet)> {
        let layers = self.layers::<T>();
        (0..batch.len)
            .into_par_iter()
            .map(|i| {
                let x: Vec<T> = batch.sample(i).iter().map(|&v| T::from_f64(v)).collect();
                let trace = layers.trace(&x, batch.height, batch.width);
                let (loss, dlogits) = cross_entropy(&trace.logits, labels[i]);
                let grads =
                    layers.backprop(&self.spec, &x, batch.height, batch.width, &trace, dlogits);
                (loss, grads)
            })
            .collect()
    }
}

/// Loss and logit gradient for one sample.
fn cross_entropy(logits: &[f64; NUM_CLASSES], label: Label) -> (f64, [f64; NUM_CLASSES]) {
    let p = softmax(logits);
    let m = logits[0].max(logits[1]);
    let lse = m + ((logits[0] - m).exp() + (logits[1] - m).exp()).ln();
    let y = label.index();
    let mut d = p;
    d[y] -= 1.0;
    (lse - logits[y], d)
}

pub fn softmax(logits: &[f64; NUM_CLASSES]) -> [f64; NUM_CLASSES] {
    let m = logits[0].max(logits[1]);
    let e0 = (logits[0] - m).exp();
    let e1 = (logits[1] - m).exp();
    let s = e0 + e1;
    [e0 / s, e1 / s]
}

impl<T: Scalar> Layers<T> {
    fn trace(&self, x: &[T], h: usize, w: usize) -> Trace<T> {
        let mut col = Vec::new();
        let mut stem_out = self.stem.forward(x, h, w, &mut col);
        relu_in_place(&mut stem_out);

        let mut blocks: Vec<BlockTrace<T>> = Vec::with_capacity(self.blocks.len());
        let (mut hc, mut wc) = (h, w);
        for layer in &self.blocks {
            let input: &[T] = blocks.last().map_or(&stem_out, |b| &b.out);
            let (ho, wo) = layer.conv1.out_dims(hc, wc);
            let mut a1 = layer.conv1.forward(input, hc, wc, &mut col);
            relu_in_place(&mut a1);
            let mut out = layer.conv2.forward(&a1, ho, wo, &mut col);
            match &layer.proj {
                Some(proj) => {
                    let skip = proj.forward(input, hc, wc, &mut col);
                    for (o, s) in out.iter_mut().zip(skip) {
                        *o += s;
                    }
                }
                None => {
                    for (o, &s) in out.iter_mut().zip(input) {
                        *o += s;
                    }
                }
            }
            relu_in_place(&mut out);
            blocks.push(BlockTrace {
                h_in: hc,
                w_in: wc,
                h_out: ho,
                w_out: wo,
                a1,
                out,
            });
            (hc, wc) = (ho, wo);
        }

        let last: &[T] = blocks.last().map_or(&stem_out, |b| &b.out);
        let c = self.head_w.len() / NUM_CLASSES;
        let mut pooled = vec![0.0f64; c];
        for px in last.chunks_exact(c) {
            for (p, &v) in pooled.iter_mut().zip(px) {
                *p += v.to_f64();
            }
        }
        let pooled: Vec<T> = pooled
            .iter()
            .map(|&s| T::from_f64(s / (hc * wc) as f64))
            .collect();
        let mut logits = [0.0; NUM_CLASSES];
        for (j, l) in logits.iter_mut().enumerate() {
            let mut acc = self.head_b[j];
            for (wv, &p) in self.head_w[j * c..(j + 1) * c].iter().zip(&pooled) {
                acc += *wv * p;
            }
            *l = acc.to_f64();
        }
        Trace {
            stem_out,
            blocks,
            pooled,
            logits,
        }
    }

    fn backprop(
        &self,
        spec: &NetworkSpec,
        x: &[T],
        h: usize,
        w: usize,
        trace: &Trace<T>,
        dlogits: [f64; NUM_CLASSES],
    ) -> ParamSet {
        let mut grads = ParamSet::new();
        let c = trace.pooled.len();
        let mut head_w = vec![0.0; NUM_CLASSES * c];
        let mut dpooled = vec![0.0f64; c];
        for j in 0..NUM_CLASSES {
            for k in 0..c {
                head_w[j * c + k] = dlogits[j] * trace.pooled[k].to_f64();
                dpooled[k] += self.head_w[j * c + k].to_f64() * dlogits[j];
            }
        }
        grads.insert(
            "head.weight",
            Tensor {
                shape: vec![NUM_CLASSES, c],
                data: head_w,
            },
        );
        grads.insert(
            "head.bias",
            Tensor {
                shape: vec![NUM_CLASSES],
                data: dlogits.to_vec(),
            },
        );

        let (hl, wl) = trace.blocks.last().map_or((h, w), |b| (b.h_out, b.w_out));
        let inv = 1.0 / (hl * wl) as f64;
        let dp: Vec<T> = dpooled.iter().map(|&d| T::from_f64(d * inv)).collect();
        let mut dcur: Vec<T> = Vec::with_capacity(hl * wl * c);
        for _ in 0..hl * wl {
            dcur.extend_from_slice(&dp);
        }

        let mut col = Vec::new();
        let put = |grads: &mut ParamSet,
                   name: String,
                   conv: &Conv<T>,
                   g: &super::kernels::ConvGrad<T>| {
            let shape = vec![conv.cout, conv.cin, conv.kernel, conv.kernel];
            grads.insert(
                format!("{name}.weight"),
                Tensor {
                    shape,
                    data: g.weight_oihw(conv.cin, conv.cout, conv.kernel),
                },
            );
            if !g.bias.is_empty() {
                grads.insert(
                    format!("{name}.bias"),
                    Tensor {
                        shape: vec![conv.cout],
                        data: g.bias.iter().map(|v| v.to_f64()).collect(),
                    },
                );
            }
        };

        for (i, (layer, bt)) in self.blocks.iter().zip(&trace.blocks).enumerate().rev() {
            let input: &[T] = if i == 0 {
                &trace.stem_out
            } else {
                &trace.blocks[i - 1].out
            };
            relu_backward_in_place(&mut dcur, &bt.out);
            let (g2, da1) = layer
                .conv2
                .backward(&bt.a1, bt.h_out, bt.w_out, &dcur, true, &mut col);
            let mut da1 = da1.expect("requested");
            relu_backward_in_place(&mut da1, &bt.a1);
            let (g1, dx) = layer
                .conv1
                .backward(input, bt.h_in, bt.w_in, &da1, true, &mut col);
            let mut dx = dx.expect("requested");
            match &layer.proj {
                Some(proj) => {
                    let (gp, dskip) = proj.backward(input, bt.h_in, bt.w_in, &dcur, true, &mut col);
                    for (d, s) in dx.iter_mut().zip(dskip.expect("requested")) {
                        *d += s;
                    }
                    put(&mut grads, format!("blocks.{i}.proj"), proj, &gp);
                }
                None => {
                    for (d, &s) in dx.iter_mut().zip(&dcur) {
                        *d += s;
                    }
                }
            }
            put(&mut grads, format!("blocks.{i}.conv1"), &layer.conv1, &g1);
            put(&mut grads, format!("blocks.{i}.conv2"), &layer.conv2, &g2);
            dcur = dx;
        }

        relu_backward_in_place(&mut dcur, &trace.stem_out);
        let (gs, _) = self.stem.backward(x, h, w, &dcur, false, &mut col);
        put(&mut grads, "stem".to_string(), &self.stem, &gs);
        debug_assert_eq!(grads.len(), spec.param_shapes().len());
        grads
    }
}
