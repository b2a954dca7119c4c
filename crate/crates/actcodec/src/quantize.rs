//! Uniform activation quantization and symmetric int8 quantization.
//!
//! Uniform quantization maps a float tensor onto `[0, 2^q - 1]` using the
//! tensor-wide min/max; int8 quantization uses a per-tensor input scale and
//! per-output-channel weight scales with clamping to ±127.
//!
//! Rounding is half-away-from-zero everywhere (`f64::round`), so encoder and
//! decoder sides and any external reimplementation agree bit-exactly.

use crate::error::{Error, Result};
use crate::tensor::{Tensor, WeightTensor};

/// Uniform quantizer parameters: the coded range and bit depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantParams {
    pub y_min: f32,
    pub y_max: f32,
    pub q: u8,
}

impl QuantParams {
    pub fn new(y_min: f32, y_max: f32, q: u8) -> Result<Self> {
        check_bit_depth(q)?;
        if !(y_min.is_finite() && y_max.is_finite()) {
            return Err(Error::domain("quantizer range must be finite"));
        }
        if y_min > y_max {
            return Err(Error::domain(format!("y_min {y_min} > y_max {y_max}")));
        }
        Ok(QuantParams { y_min, y_max, q })
    }

    /// Largest symbol value, `2^q - 1`.
    pub fn max_symbol(&self) -> u32 {
        (1u32 << self.q) - 1
    }

    /// Width of one quantization step; zero for a degenerate range.
    pub fn step(&self) -> f32 {
        (self.y_max - self.y_min) / self.max_symbol() as f32
    }
}

pub(crate) fn check_bit_depth(q: u8) -> Result<()> {
    if !(2..=16).contains(&q) {
        return Err(Error::config(format!("bit depth q must be in [2, 16], got {q}")));
    }
    Ok(())
}

/// Quantize a float tensor to unsigned symbols in `[0, 2^q - 1]`.
///
/// A constant tensor (`y_max == y_min`) degenerates to all-zero symbols and
/// decodes back to the constant exactly.
pub fn quantize_uniform(y: &Tensor<f32>, q: u8) -> Result<(Tensor<u16>, QuantParams)> {
    check_bit_depth(q)?;
    if y.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("tensor contains non-finite values"));
    }
    let mut y_min = f32::INFINITY;
    let mut y_max = f32::NEG_INFINITY;
    for &v in y.data() {
        y_min = y_min.min(v);
        y_max = y_max.max(v);
    }
    let params = QuantParams { y_min, y_max, q };
    let levels = params.max_symbol() as f64;
    let range = (y_max - y_min) as f64;
    let symbols = if range == 0.0 {
        y.map(|_| 0u16)
    } else {
        y.map(|v| {
            let s = ((v as f64 - y_min as f64) / range * levels).round();
            (s as u32).min(params.max_symbol()) as u16
        })
    };
    Ok((symbols, params))
}

/// Map symbols back to float values: `s * (y_max - y_min) / (2^q - 1) + y_min`.
pub fn dequantize_uniform(symbols: &Tensor<u16>, params: &QuantParams) -> Result<Tensor<f32>> {
    check_bit_depth(params.q)?;
    let max_symbol = params.max_symbol();
    if let Some(&bad) = symbols.data().iter().find(|&&s| s as u32 > max_symbol) {
        return Err(Error::domain(format!(
            "symbol {bad} exceeds alphabet max {max_symbol}"
        )));
    }
    let range = (params.y_max - params.y_min) as f64;
    if range == 0.0 {
        return Ok(symbols.map(|_| params.y_min));
    }
    let scale = range / max_symbol as f64;
    Ok(symbols.map(|s| (s as f64 * scale + params.y_min as f64) as f32))
}

/// Per-tensor input scale and per-output-channel weight scales for int8.
#[derive(Debug, Clone, PartialEq)]
pub struct Int8Scales {
    pub input: f32,
    pub weight: Vec<f32>,
}

impl Int8Scales {
    pub fn new(input: f32, weight: Vec<f32>) -> Result<Self> {
        if !(input.is_finite() && input > 0.0) {
            return Err(Error::domain(format!("input scale must be positive, got {input}")));
        }
        if let Some(&bad) = weight.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::domain(format!("weight scale must be positive, got {bad}")));
        }
        Ok(Int8Scales { input, weight })
    }

    /// Compute both scales from an input tensor and a weight tensor.
    pub fn compute(x: &Tensor<f32>, w: &WeightTensor<f32>) -> Result<Self> {
        Ok(Int8Scales {
            input: int8_input_scale(x)?,
            weight: int8_weight_scales(w)?,
        })
    }
}

fn max_abs(values: &[f32]) -> f32 {
    values.iter().fold(0.0f32, |m, &v| m.max(v.abs()))
}

/// Input scale `127 / max(abs(x))`.
pub fn int8_input_scale(x: &Tensor<f32>) -> Result<f32> {
    let m = max_abs(x.data());
    if m == 0.0 {
        return Err(Error::domain("all-zero tensor has no int8 scale"));
    }
    if !m.is_finite() {
        return Err(Error::domain("tensor contains non-finite values"));
    }
    Ok(127.0 / m)
}

/// Per-output-channel weight scales `127 / max(abs(w_o))`.
pub fn int8_weight_scales(w: &WeightTensor<f32>) -> Result<Vec<f32>> {
    (0..w.output_channels())
        .map(|o| {
            let m = max_abs(w.filter(o));
            if m == 0.0 {
                return Err(Error::domain(format!("weight channel {o} is all zeros")));
            }
            if !m.is_finite() {
                return Err(Error::domain(format!("weight channel {o} has non-finite values")));
            }
            Ok(127.0 / m)
        })
        .collect()
}

#[inline]
fn quantize_value(v: f32, scale: f32) -> i8 {
    let q = (scale as f64 * v as f64).round();
    q.clamp(-127.0, 127.0) as i8
}

/// Quantize a tensor with a single scale: `clamp(round(scale * x), -127, 127)`.
pub fn quantize_int8(x: &Tensor<f32>, scale: f32) -> Result<Tensor<i8>> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::domain(format!("scale must be positive, got {scale}")));
    }
    Ok(x.map(|v| quantize_value(v, scale)))
}

/// Quantize weights with one scale per output channel.
pub fn quantize_int8_weights(w: &WeightTensor<f32>, scales: &[f32]) -> Result<WeightTensor<i8>> {
    if scales.len() != w.output_channels() {
        return Err(Error::shape(format!(
            "{} scales for {} output channels",
            scales.len(),
            w.output_channels()
        )));
    }
    if let Some(&bad) = scales.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
        return Err(Error::domain(format!("scale must be positive, got {bad}")));
    }
    let filter_len = w.filter_len();
    let data = w
        .data()
        .iter()
        .enumerate()
        .map(|(idx, &v)| quantize_value(v, scales[idx / filter_len]))
        .collect();
    WeightTensor::new(w.dims(), data)
}
