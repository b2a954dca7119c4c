//! The latent transform: per-pixel 1×1 channel mixing with independent
//! forward and inverse parameters, plus a PCA calibration utility that fits
//! a decorrelating rotation from sample activations.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::tensor::{self, Tensor};

/// A channel transform applied independently at every (h, w) position.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelTransform {
    /// Exact pass-through.
    Identity,
    /// y[:, h, w] = M · x[:, h, w] + b, with an independently parameterized
    /// inverse map.
    Conv1x1(Box<Conv1x1>),
}

/// Parameters of a conv1x1 transform; matrices are C×C row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1x1 {
    channels: usize,
    forward: Vec<f32>,
    forward_bias: Vec<f32>,
    inverse: Vec<f32>,
    inverse_bias: Vec<f32>,
}

impl Conv1x1 {
    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn forward_matrix(&self) -> &[f32] {
        &self.forward
    }

    pub fn inverse_matrix(&self) -> &[f32] {
        &self.inverse
    }
}

impl ChannelTransform {
    pub fn identity() -> Self {
        ChannelTransform::Identity
    }

    /// Build a conv1x1 transform from explicit parameters.
    pub fn conv1x1(
        channels: usize,
        forward: Vec<f32>,
        forward_bias: Vec<f32>,
        inverse: Vec<f32>,
        inverse_bias: Vec<f32>,
    ) -> Result<Self> {
        if channels == 0 {
            return Err(Error::shape("transform needs at least one channel"));
        }
        if forward.len() != channels * channels || inverse.len() != channels * channels {
            return Err(Error::shape(format!(
                "matrix size must be {channels}x{channels}"
            )));
        }
        if forward_bias.len() != channels || inverse_bias.len() != channels {
            return Err(Error::shape(format!("bias length must be {channels}")));
        }
        Ok(ChannelTransform::Conv1x1(Box::new(Conv1x1 {
            channels,
            forward,
            forward_bias,
            inverse,
            inverse_bias,
        })))
    }

    /// Channel count the transform applies to; `None` for identity.
    pub fn channels(&self) -> Option<usize> {
        match self {
            ChannelTransform::Identity => None,
            ChannelTransform::Conv1x1(t) => Some(t.channels),
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, ChannelTransform::Identity)
    }

    /// Apply the forward map; dims are unchanged.
    pub fn apply_forward(&self, x: &Tensor<f32>) -> Result<Tensor<f32>> {
        match self {
            ChannelTransform::Identity => Ok(x.clone()),
            ChannelTransform::Conv1x1(t) => apply_mix(x, t.channels, &t.forward, &t.forward_bias),
        }
    }

    /// Apply the independent inverse map; dims are unchanged.
    pub fn apply_inverse(&self, y: &Tensor<f32>) -> Result<Tensor<f32>> {
        match self {
            ChannelTransform::Identity => Ok(y.clone()),
            ChannelTransform::Conv1x1(t) => apply_mix(y, t.channels, &t.inverse, &t.inverse_bias),
        }
    }

    /// Fit a decorrelating rotation from sample activations.
    ///
    /// The forward matrix holds the orthonormal eigenvectors of the channel
    /// covariance as rows (sorted by decreasing eigenvalue, sign-normalized
    /// so the dominant entry of each row is positive); the forward bias
    /// removes the channel mean and the inverse restores it via the
    /// transpose. Rank-deficient covariances are fine — zero-variance
    /// directions simply keep unit eigenvectors; if the eigensolve ever
    /// yields non-finite vectors the fit degrades to identity rows.
    pub fn fit_pca(samples: &[Tensor<f32>]) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::domain("PCA calibration needs at least 2 sample tensors"));
        }
        let channels = samples[0].channels();
        if samples.iter().any(|s| s.channels() != channels) {
            return Err(Error::shape("calibration samples must share the channel count"));
        }
        let total_pixels: usize = samples.iter().map(|s| s.height() * s.width()).sum();
        if total_pixels <= channels {
            return Err(Error::domain(format!(
                "PCA calibration needs more than {channels} total pixels, got {total_pixels}"
            )));
        }
        if samples.iter().any(|s| s.data().iter().any(|v| !v.is_finite())) {
            return Err(Error::domain("calibration samples contain non-finite values"));
        }

        let mut mean = vec![0.0f64; channels];
        for s in samples {
            for c in 0..channels {
                mean[c] += s.channel(c).iter().map(|&v| v as f64).sum::<f64>();
            }
        }
        for m in &mut mean {
            *m /= total_pixels as f64;
        }

        let mut cov = DMatrix::<f64>::zeros(channels, channels);
        for s in samples {
            let plane = s.height() * s.width();
            for p in 0..plane {
                for a in 0..channels {
                    let da = s.channel(a)[p] as f64 - mean[a];
                    for b in a..channels {
                        let db = s.channel(b)[p] as f64 - mean[b];
                        cov[(a, b)] += da * db;
                    }
                }
            }
        }
        let denom = (total_pixels - 1) as f64;
        for a in 0..channels {
            for b in a..channels {
                cov[(a, b)] /= denom;
                cov[(b, a)] = cov[(a, b)];
            }
        }

        let eigen = cov.symmetric_eigen();
        let mut order: Vec<usize> = (0..channels).collect();
        order.sort_by(|&a, &b| eigen.eigenvalues[b].partial_cmp(&eigen.eigenvalues[a]).unwrap());

        let mut forward = vec![0.0f32; channels * channels];
        let mut degenerate = false;
        for (row, &col) in order.iter().enumerate() {
            let v: DVector<f64> = eigen.eigenvectors.column(col).into();
            if v.iter().any(|e| !e.is_finite()) {
                degenerate = true;
                break;
            }
            // canonical sign: dominant component positive
            let dominant = v
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
                .map(|(i, _)| i)
                .unwrap_or(0);
            let sign = if v[dominant] < 0.0 { -1.0 } else { 1.0 };
            for c in 0..channels {
                forward[row * channels + c] = (sign * v[c]) as f32;
            }
        }
        if degenerate {
            forward = vec![0.0f32; channels * channels];
            for c in 0..channels {
                forward[c * channels + c] = 1.0;
            }
        }

        let mut inverse = vec![0.0f32; channels * channels];
        for r in 0..channels {
            for c in 0..channels {
                inverse[c * channels + r] = forward[r * channels + c];
            }
        }
        let forward_bias: Vec<f32> = (0..channels)
            .map(|r| {
                let dot: f64 = (0..channels).map(|c| forward[r * channels + c] as f64 * mean[c]).sum();
                (-dot) as f32
            })
            .collect();
        let inverse_bias: Vec<f32> = mean.iter().map(|&m| m as f32).collect();

        ChannelTransform::conv1x1(channels, forward, forward_bias, inverse, inverse_bias)
    }

    /// Write the four parameter files `<prefix>.fwd.atns`,
    /// `<prefix>.fwd_bias.atns`, `<prefix>.inv.atns`, `<prefix>.inv_bias.atns`.
    /// Matrices are stored as C×C×1 tensors and biases as C×1×1.
    pub fn save_prefix(&self, prefix: &str) -> Result<()> {
        let t = match self {
            ChannelTransform::Identity => {
                return Err(Error::config("identity transform has no parameters to save"))
            }
            ChannelTransform::Conv1x1(t) => t,
        };
        let c = t.channels;
        let matrix = |m: &[f32]| Tensor::new((c, c, 1), m.to_vec());
        let bias = |b: &[f32]| Tensor::new((c, 1, 1), b.to_vec());
        tensor::write_tensor(&matrix(&t.forward)?, format!("{prefix}.fwd.atns"))?;
        tensor::write_tensor(&bias(&t.forward_bias)?, format!("{prefix}.fwd_bias.atns"))?;
        tensor::write_tensor(&matrix(&t.inverse)?, format!("{prefix}.inv.atns"))?;
        tensor::write_tensor(&bias(&t.inverse_bias)?, format!("{prefix}.inv_bias.atns"))?;
        Ok(())
    }

    /// Load transform parameters saved by [`ChannelTransform::save_prefix`].
    ///
    /// Only the forward matrix is required: a missing inverse matrix
    /// defaults to the forward transpose (exact for rotations) and missing
    /// bias files default to zero.
    pub fn load_prefix(prefix: &str) -> Result<Self> {
        let fwd = load_matrix(format!("{prefix}.fwd.atns").as_ref())?;
        let c = fwd.0;
        let forward = fwd.1;
        let forward_bias = load_bias_opt(format!("{prefix}.fwd_bias.atns").as_ref(), c)?;
        let inv_path = format!("{prefix}.inv.atns");
        let inverse = if Path::new(&inv_path).exists() {
            let (ci, m) = load_matrix(inv_path.as_ref())?;
            if ci != c {
                return Err(Error::shape(format!("inverse matrix is {ci}x{ci}, forward is {c}x{c}")));
            }
            m
        } else {
            let mut m = vec![0.0f32; c * c];
            for r in 0..c {
                for col in 0..c {
                    m[col * c + r] = forward[r * c + col];
                }
            }
            m
        };
        let inverse_bias = load_bias_opt(format!("{prefix}.inv_bias.atns").as_ref(), c)?;
        ChannelTransform::conv1x1(c, forward, forward_bias, inverse, inverse_bias)
    }
}

fn load_matrix(path: &Path) -> Result<(usize, Vec<f32>)> {
    let t = tensor::read_tensor_as::<f32>(path)?;
    let (c, h, w) = t.dims();
    if c != h || w != 1 {
        return Err(Error::shape(format!(
            "transform matrix file must be CxCx1, got {c}x{h}x{w}"
        )));
    }
    Ok((c, t.into_data()))
}

fn load_bias_opt(path: &Path, channels: usize) -> Result<Vec<f32>> {
    if !path.exists() {
        return Ok(vec![0.0; channels]);
    }
    let t = tensor::read_tensor_as::<f32>(path)?;
    let (c, h, w) = t.dims();
    if c != channels || h != 1 || w != 1 {
        return Err(Error::shape(format!(
            "bias file must be {channels}x1x1, got {c}x{h}x{w}"
        )));
    }
    Ok(t.into_data())
}

fn apply_mix(x: &Tensor<f32>, channels: usize, matrix: &[f32], bias: &[f32]) -> Result<Tensor<f32>> {
    if x.channels() != channels {
        return Err(Error::shape(format!(
            "transform is {channels}-channel, tensor has {}",
            x.channels()
        )));
    }
    let (c, h, w) = x.dims();
    let plane = h * w;
    let mut out = vec![0.0f32; c * plane];
    for row in 0..c {
        let weights = &matrix[row * c..(row + 1) * c];
        let b = bias[row] as f64;
        let dst = &mut out[row * plane..(row + 1) * plane];
        for (p, slot) in dst.iter_mut().enumerate() {
            let mut acc = b;
            for (col, &wgt) in weights.iter().enumerate() {
                acc += wgt as f64 * x.channel(col)[p] as f64;
            }
            *slot = acc as f32;
        }
    }
    Tensor::new((c, h, w), out)
}
