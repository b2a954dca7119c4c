//! Reference convolution kernels and n:m fine-grained weight sparsity.
//!
//! Convolution is cross-correlation (no kernel flip) with zero padding.
//! The int8 path quantizes inputs with a per-tensor scale and weights with
//! per-output-channel scales, accumulates in i32 and rescales the result;
//! layer construction bounds `I*kh*kw` so the accumulator cannot overflow.

use crate::error::{Error, Result};
use crate::quantize::{quantize_int8, quantize_int8_weights, Int8Scales};
use crate::tensor::{Tensor, WeightTensor};

/// Largest `I*kh*kw` for which `127 * 127 * I*kh*kw` stays below `i32::MAX`.
const MAX_ACC_TAPS: usize = (i32::MAX / (127 * 127)) as usize;

/// A convolution layer: weights O×I×kh×kw, per-output bias, stride/padding
/// and an optional fused ReLU.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    weights: WeightTensor<f32>,
    bias: Vec<f32>,
    stride: usize,
    padding: usize,
    relu: bool,
}

impl ConvLayer {
    pub fn new(
        weights: WeightTensor<f32>,
        bias: Vec<f32>,
        stride: usize,
        padding: usize,
        relu: bool,
    ) -> Result<Self> {
        let (o, _, _, _) = weights.dims();
        if bias.len() != o {
            return Err(Error::shape(format!("{} bias values for {o} output channels", bias.len())));
        }
        if stride == 0 {
            return Err(Error::config("stride must be at least 1"));
        }
        if weights.filter_len() > MAX_ACC_TAPS {
            return Err(Error::config(format!(
                "filter size {} exceeds the int8 accumulator bound {MAX_ACC_TAPS}",
                weights.filter_len()
            )));
        }
        Ok(ConvLayer {
            weights,
            bias,
            stride,
            padding,
            relu,
        })
    }

    pub fn weights(&self) -> &WeightTensor<f32> {
        &self.weights
    }

    pub fn bias(&self) -> &[f32] {
        &self.bias
    }

    pub fn relu(&self) -> bool {
        self.relu
    }

    fn output_dims(&self, x: &Tensor<f32>) -> Result<(usize, usize, usize)> {
        let (o, i, kh, kw) = self.weights.dims();
        if x.channels() != i {
            return Err(Error::shape(format!(
                "layer expects {i} input channels, tensor has {}",
                x.channels()
            )));
        }
        let h_in = x.height() + 2 * self.padding;
        let w_in = x.width() + 2 * self.padding;
        if h_in < kh || w_in < kw {
            return Err(Error::shape(format!(
                "kernel {kh}x{kw} does not fit padded input {h_in}x{w_in}"
            )));
        }
        Ok((o, (h_in - kh) / self.stride + 1, (w_in - kw) / self.stride + 1))
    }

    /// Number of multiply-accumulates one forward pass performs.
    pub fn mac_count(&self, x: &Tensor<f32>) -> Result<u64> {
        let (o, h, w) = self.output_dims(x)?;
        Ok((o * h * w) as u64 * self.weights.filter_len() as u64)
    }
}

/// Float reference convolution with optional fused ReLU.
pub fn conv_f32(layer: &ConvLayer, x: &Tensor<f32>) -> Result<Tensor<f32>> {
    let (out_c, out_h, out_w) = layer.output_dims(x)?;
    let (_, in_c, kh, kw) = layer.weights.dims();
    let mut out = Vec::with_capacity(out_c * out_h * out_w);
    for oc in 0..out_c {
        for oh in 0..out_h {
            for ow in 0..out_w {
                let mut acc = 0.0f32;
                for ic in 0..in_c {
                    for dy in 0..kh {
                        let y = (oh * layer.stride + dy) as isize - layer.padding as isize;
                        if y < 0 || y as usize >= x.height() {
                            continue;
                        }
                        for dx in 0..kw {
                            let xx = (ow * layer.stride + dx) as isize - layer.padding as isize;
                            if xx < 0 || xx as usize >= x.width() {
                                continue;
                            }
                            acc += layer.weights.get(oc, ic, dy, dx) * x.get(ic, y as usize, xx as usize);
                        }
                    }
                }
                acc += layer.bias[oc];
                if layer.relu {
                    acc = acc.max(0.0);
                }
                out.push(acc);
            }
        }
    }
    Tensor::new((out_c, out_h, out_w), out)
}

/// Int8 convolution: quantize input and weights, convolve in i32, rescale
/// per output channel and add the float bias.
pub fn conv_int8(layer: &ConvLayer, x: &Tensor<f32>, scales: &Int8Scales) -> Result<Tensor<f32>> {
    let (out_c, out_h, out_w) = layer.output_dims(x)?;
    if scales.weight.len() != out_c {
        return Err(Error::shape(format!(
            "{} weight scales for {out_c} output channels",
            scales.weight.len()
        )));
    }
    let xq = quantize_int8(x, scales.input)?;
    let wq = quantize_int8_weights(&layer.weights, &scales.weight)?;
    let (_, in_c, kh, kw) = layer.weights.dims();
    let mut out = Vec::with_capacity(out_c * out_h * out_w);
    for oc in 0..out_c {
        let rescale = scales.weight[oc] * scales.input;
        for oh in 0..out_h {
            for ow in 0..out_w {
                let mut acc = 0i32;
                for ic in 0..in_c {
                    for dy in 0..kh {
                        let y = (oh * layer.stride + dy) as isize - layer.padding as isize;
                        if y < 0 || y as usize >= x.height() {
                            continue;
                        }
                        for dx in 0..kw {
                            let xx = (ow * layer.stride + dx) as isize - layer.padding as isize;
                            if xx < 0 || xx as usize >= x.width() {
                                continue;
                            }
                            acc += wq.get(oc, ic, dy, dx) as i32 * xq.get(ic, y as usize, xx as usize) as i32;
                        }
                    }
                }
                let mut v = acc as f32 / rescale + layer.bias[oc];
                if layer.relu {
                    v = v.max(0.0);
                }
                out.push(v);
            }
        }
    }
    Tensor::new((out_c, out_h, out_w), out)
}

/// Boolean keep-mask produced by n:m sparsification, same shape as the
/// weights it was derived from.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMask {
    mask: Vec<bool>,
    dims: (usize, usize, usize, usize),
    n: usize,
    m: usize,
}

impl SparseMask {
    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn dims(&self) -> (usize, usize, usize, usize) {
        self.dims
    }

    pub fn group_params(&self) -> (usize, usize) {
        (self.n, self.m)
    }

    pub fn kept(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }
}

/// Project weights onto the n:m sparsity pattern.
///
/// Along each output filter's flattened I·kh·kw axis, every contiguous
/// group of `m` keeps its `n` largest-magnitude entries and zeroes the
/// rest; ties keep the lower index. A trailing group shorter than `m` is
/// exempt from the constraint and kept dense.
pub fn apply_nm_sparsity(w: &WeightTensor<f32>, n: usize, m: usize) -> Result<(WeightTensor<f32>, SparseMask)> {
    if m == 0 || n > m {
        return Err(Error::config(format!("invalid sparsity pattern {n}:{m}")));
    }
    let filter_len = w.filter_len();
    let mut data = w.data().to_vec();
    let mut mask = vec![true; data.len()];
    if n < m {
        for o in 0..w.output_channels() {
            let base = o * filter_len;
            let mut start = 0;
            while start + m <= filter_len {
                let group = base + start..base + start + m;
                let mut order: Vec<usize> = (0..m).collect();
                // sort by |w| descending, index ascending on ties
                order.sort_by(|&a, &b| {
                    let wa = data[group.start + a].abs();
                    let wb = data[group.start + b].abs();
                    wb.partial_cmp(&wa).unwrap().then(a.cmp(&b))
                });
                for &idx in order.iter().skip(n) {
                    data[group.start + idx] = 0.0;
                    mask[group.start + idx] = false;
                }
                start += m;
            }
        }
    }
    let sparse = WeightTensor::new(w.dims(), data)?;
    Ok((
        sparse,
        SparseMask {
            mask,
            dims: w.dims(),
            n,
            m,
        },
    ))
}
