//! Bandwidth and energy accounting.
//!
//! Bandwidth reduction is the byte size of the uncompressed 32-bit float
//! activation maps divided by the container size including all coder
//! overhead. Energy is a configurable linear cost over DRAM bytes and MAC
//! counts; the shipped defaults are representative accelerator figures, not
//! measurements, and every report echoes the cost model it used.

use std::path::Path;

use super::container::CompressedActivation;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Linear energy cost table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyModel {
    pub dram_pj_per_byte: f32,
    pub mac_pj_fp32: f32,
    pub mac_pj_int8: f32,
}

impl Default for EnergyModel {
    fn default() -> Self {
        EnergyModel {
            dram_pj_per_byte: 20.0,
            mac_pj_fp32: 4.6,
            mac_pj_int8: 0.23,
        }
    }
}

impl EnergyModel {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("dram_pj_per_byte", self.dram_pj_per_byte),
            ("mac_pj_fp32", self.mac_pj_fp32),
            ("mac_pj_int8", self.mac_pj_int8),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(format!("{name} must be a nonnegative number, got {v}")));
            }
        }
        Ok(())
    }

    /// Parse a `key = value` config file. Keys not present keep their
    /// default value; unknown keys are rejected. `#` starts a comment.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut model = EnergyModel::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}: expected key = value", lineno + 1)))?;
            let value: f32 = value
                .trim()
                .parse()
                .map_err(|_| Error::config(format!("line {}: bad number '{}'", lineno + 1, value.trim())))?;
            match key.trim() {
                "dram_pj_per_byte" => model.dram_pj_per_byte = value,
                "mac_pj_fp32" => model.mac_pj_fp32 = value,
                "mac_pj_int8" => model.mac_pj_int8 = value,
                other => return Err(Error::config(format!("line {}: unknown key '{other}'", lineno + 1))),
            }
        }
        model.validate()?;
        Ok(model)
    }
}

/// Per-layer bandwidth numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerBandwidth {
    pub uncompressed_bytes: u64,
    pub compressed_bytes: u64,
    pub ratio: f64,
}

/// Bandwidth report over a set of layers.
#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthReport {
    pub layers: Vec<LayerBandwidth>,
    pub total_uncompressed: u64,
    pub total_compressed: u64,
    /// Byte-weighted aggregate, not an average of per-layer ratios.
    pub aggregate_ratio: f64,
}

/// Compare original activation maps against their containers.
///
/// The numerator charges four bytes per element (the 32-bit float
/// baseline); the denominator is the full container size including
/// overhead.
pub fn bandwidth_report(
    tensors: &[Tensor<f32>],
    containers: &[CompressedActivation],
) -> Result<BandwidthReport> {
    if tensors.len() != containers.len() {
        return Err(Error::config(format!(
            "{} tensors but {} containers",
            tensors.len(),
            containers.len()
        )));
    }
    let mut layers = Vec::with_capacity(tensors.len());
    let mut total_uncompressed = 0u64;
    let mut total_compressed = 0u64;
    for (t, c) in tensors.iter().zip(containers) {
        let uncompressed = 4 * t.len() as u64;
        let compressed = c.total_bytes();
        total_uncompressed += uncompressed;
        total_compressed += compressed;
        layers.push(LayerBandwidth {
            uncompressed_bytes: uncompressed,
            compressed_bytes: compressed,
            ratio: uncompressed as f64 / compressed as f64,
        });
    }
    Ok(BandwidthReport {
        layers,
        total_uncompressed,
        total_compressed,
        aggregate_ratio: total_uncompressed as f64 / total_compressed as f64,
    })
}

/// One layer's contribution to the energy model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LayerCost {
    pub dram_bytes: u64,
    pub fp32_macs: u64,
    pub int8_macs: u64,
}

/// Energy comparison between a baseline and the compressed pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    pub baseline_pj: f64,
    pub pipeline_pj: f64,
    /// baseline / pipeline.
    pub ratio: f64,
    pub model: EnergyModel,
}

/// Total energy of a set of layers under the cost model.
pub fn energy_cost(layers: &[LayerCost], model: &EnergyModel) -> f64 {
    layers
        .iter()
        .map(|l| {
            l.dram_bytes as f64 * model.dram_pj_per_byte as f64
                + l.fp32_macs as f64 * model.mac_pj_fp32 as f64
                + l.int8_macs as f64 * model.mac_pj_int8 as f64
        })
        .sum()
}

/// Energy ratio of a baseline configuration to the compressed pipeline.
pub fn energy_report(
    baseline: &[LayerCost],
    pipeline: &[LayerCost],
    model: &EnergyModel,
) -> Result<EnergyReport> {
    model.validate()?;
    let baseline_pj = energy_cost(baseline, model);
    let pipeline_pj = energy_cost(pipeline, model);
    if pipeline_pj == 0.0 {
        return Err(Error::domain("pipeline energy is zero, ratio undefined"));
    }
    Ok(EnergyReport {
        baseline_pj,
        pipeline_pj,
        ratio: baseline_pj / pipeline_pj,
        model: *model,
    })
}
