//! The full activation codec: transform → quantize → entropy-code into a
//! self-describing container, its inverse, the closed-form/cross-entropy
//! size estimators used as training penalties, and bandwidth/energy
//! accounting.

mod container;
mod report;

pub use container::{CoderId, CompressedActivation, Overhead, CONTAINER_FIXED_BYTES};
pub use report::{
    bandwidth_report, energy_cost, energy_report, BandwidthReport, EnergyModel, EnergyReport,
    LayerBandwidth, LayerCost,
};

use crate::error::{Error, Result};
use crate::gaussian::{estimate_bits_gaussian, CdfTable, ChannelGaussian, SIGMA_FLOOR};
use crate::golomb::{self, BitCursor, ReferenceSelector};
use crate::quantize::{check_bit_depth, dequantize_uniform, quantize_uniform, QuantParams};
use crate::rans;
use crate::tensor::Tensor;
use crate::transform::ChannelTransform;

/// Entropy coder selection, with its coder-specific parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoderConfig {
    /// Symmetric exp-Golomb with a per-channel reference statistic.
    SymEg { selector: ReferenceSelector },
    /// Plain k-th order exp-Golomb.
    EgK { k: u8 },
    /// rANS with the data-dependent channel-wise Gaussian model.
    RansGaussian,
}

impl CoderConfig {
    pub fn coder_id(&self) -> CoderId {
        match self {
            CoderConfig::SymEg { .. } => CoderId::SymEg,
            CoderConfig::EgK { .. } => CoderId::EgK,
            CoderConfig::RansGaussian => CoderId::RansGaussian,
        }
    }

    fn aux(&self) -> u8 {
        match self {
            CoderConfig::SymEg { selector } => selector.code(),
            CoderConfig::EgK { k } => *k,
            CoderConfig::RansGaussian => 0,
        }
    }
}

/// Everything the compressor needs: transform, bit depth, coder, penalty
/// weight.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub transform: ChannelTransform,
    pub q: u8,
    pub coder: CoderConfig,
    pub gamma: f32,
}

impl PipelineConfig {
    pub fn new(transform: ChannelTransform, q: u8, coder: CoderConfig, gamma: f32) -> Result<Self> {
        let cfg = PipelineConfig {
            transform,
            q,
            coder,
            gamma,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Identity transform, symeg coder with the median reference.
    pub fn symeg_median(q: u8) -> Self {
        PipelineConfig {
            transform: ChannelTransform::identity(),
            q,
            coder: CoderConfig::SymEg {
                selector: ReferenceSelector::Median,
            },
            gamma: 0.0,
        }
    }

    /// Identity transform, rANS coder with the Gaussian model.
    pub fn rans_gaussian(q: u8) -> Self {
        PipelineConfig {
            transform: ChannelTransform::identity(),
            q,
            coder: CoderConfig::RansGaussian,
            gamma: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_bit_depth(self.q)?;
        if let CoderConfig::EgK { k } = self.coder {
            if k > 16 {
                return Err(Error::config(format!("exp-Golomb order k={k} outside [0, 16]")));
            }
        }
        if !self.gamma.is_finite() || self.gamma < 0.0 {
            return Err(Error::config(format!("gamma must be nonnegative, got {}", self.gamma)));
        }
        Ok(())
    }
}

/// CDF tables for every channel, built from the f32 parameters exactly as
/// they travel in the container so encoder and decoder tables are
/// bit-identical.
fn gaussian_tables(pairs: &[(f32, f32)], q: u8) -> Result<Vec<CdfTable>> {
    pairs
        .iter()
        .map(|&(mu, sigma)| CdfTable::from_gaussian(mu, sigma, q))
        .collect()
}

/// Compress an activation map into a container.
pub fn compress(x: &Tensor<f32>, cfg: &PipelineConfig) -> Result<CompressedActivation> {
    cfg.validate()?;
    let y = cfg.transform.apply_forward(x)?;
    let (symbols, params) = quantize_uniform(&y, cfg.q)?;
    let (overhead, payload) = match cfg.coder {
        CoderConfig::SymEg { selector } => {
            let (bits, refs) = golomb::symeg_encode_tensor(&symbols, selector)?;
            (Overhead::References(refs), bits.into_bytes())
        }
        CoderConfig::EgK { k } => {
            let bits = golomb::eg_encode_tensor(&symbols, k as u32);
            (Overhead::None, bits.into_bytes())
        }
        CoderConfig::RansGaussian => {
            let model = ChannelGaussian::fit(&symbols)?;
            let pairs: Vec<(f32, f32)> = model.mu.iter().copied().zip(model.sigma.iter().copied()).collect();
            let tables = gaussian_tables(&pairs, cfg.q)?;
            let payload = rans::rans_encode(&symbols, &tables)?;
            (Overhead::Gaussian(pairs), payload)
        }
    };
    Ok(CompressedActivation {
        coder: cfg.coder.coder_id(),
        q: cfg.q,
        aux: cfg.coder.aux(),
        dims: symbols.dims(),
        y_min: params.y_min,
        y_max: params.y_max,
        overhead,
        payload,
    })
}

/// Decode the container back to symbols (exactly the encoder's) and map
/// them through the inverse quantizer and the config's inverse transform.
///
/// The container is self-describing (coder, q, overhead); the config only
/// contributes the inverse transform parameters, which must match the
/// encoder's transform. Payload checksums are verified when the container
/// is parsed from bytes, so any corrupted file fails before reaching here.
pub fn decompress(c: &CompressedActivation, cfg: &PipelineConfig) -> Result<Tensor<f32>> {
    let symbols = decode_symbols(c)?;
    let params = QuantParams::new(c.y_min, c.y_max, c.q)?;
    let y = dequantize_uniform(&symbols, &params)?;
    cfg.transform.apply_inverse(&y)
}

/// Entropy-decode a container's payload to the symbol tensor.
pub fn decode_symbols(c: &CompressedActivation) -> Result<Tensor<u16>> {
    check_bit_depth(c.q).map_err(|_| Error::corrupt(format!("container bit depth {} invalid", c.q)))?;
    match (&c.coder, &c.overhead) {
        (CoderId::SymEg, Overhead::References(refs)) => {
            let cursor_bytes = &c.payload;
            let mut cursor = BitCursor::new(cursor_bytes);
            let symbols = golomb::symeg_decode_tensor(&mut cursor, refs, c.dims)?;
            check_padding(&cursor, cursor_bytes.len())?;
            check_symbol_range(&symbols, c.q)?;
            Ok(symbols)
        }
        (CoderId::EgK, Overhead::None) => {
            let mut cursor = BitCursor::new(&c.payload);
            let symbols = golomb::eg_decode_tensor(&mut cursor, c.aux as u32, c.dims)?;
            check_padding(&cursor, c.payload.len())?;
            check_symbol_range(&symbols, c.q)?;
            Ok(symbols)
        }
        (CoderId::RansGaussian, Overhead::Gaussian(pairs)) => {
            if pairs.iter().any(|&(mu, sigma)| !mu.is_finite() || !(sigma >= SIGMA_FLOOR)) {
                return Err(Error::corrupt("gaussian overhead parameters out of range"));
            }
            let tables = gaussian_tables(pairs, c.q)?;
            let symbols = rans::rans_decode(&c.payload, &tables, c.dims)?;
            check_symbol_range(&symbols, c.q)?;
            Ok(symbols)
        }
        _ => Err(Error::corrupt("overhead block does not match coder id")),
    }
}

fn check_padding(cursor: &BitCursor<'_>, payload_bytes: usize) -> Result<()> {
    // codewords must fill the payload up to final-byte padding
    if payload_bytes * 8 - cursor.pos() >= 8 {
        return Err(Error::corrupt(format!(
            "{} unused payload bits after decoding",
            payload_bytes * 8 - cursor.pos()
        )));
    }
    Ok(())
}

fn check_symbol_range(symbols: &Tensor<u16>, q: u8) -> Result<()> {
    let max = (1u32 << q) - 1;
    if symbols.data().iter().any(|&s| s as u32 > max) {
        return Err(Error::corrupt(format!("decoded symbol exceeds alphabet max {max}")));
    }
    Ok(())
}

/// The size estimate that doubles as the training penalty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyEstimate {
    /// Estimated payload bits for the whole tensor.
    pub total_bits: f64,
    /// total_bits / (C·H·W).
    pub bits_per_element: f64,
    /// total_bits / (H·W) — the channel dimension is deliberately not
    /// averaged out.
    pub normalized_bits: f64,
    /// gamma · normalized_bits.
    pub penalty: f64,
}

/// Estimate the coded size of `x` under the config without producing a
/// payload.
///
/// symeg and eg use their closed-form code lengths (for symeg the estimate
/// equals the real payload bit count exactly); rANS uses the Gaussian
/// cross-entropy, which the real coder tracks within a couple of percent.
pub fn estimate_penalty(x: &Tensor<f32>, cfg: &PipelineConfig) -> Result<PenaltyEstimate> {
    cfg.validate()?;
    let y = cfg.transform.apply_forward(x)?;
    let (symbols, _) = quantize_uniform(&y, cfg.q)?;
    let total_bits = match cfg.coder {
        CoderConfig::SymEg { selector } => golomb::symeg_length_tensor(&symbols, selector)? as f64,
        CoderConfig::EgK { k } => golomb::eg_length_tensor(&symbols, k as u32) as f64,
        CoderConfig::RansGaussian => {
            let model = ChannelGaussian::fit(&symbols)?;
            estimate_bits_gaussian(&symbols, &model, cfg.q)?
        }
    };
    let (c, h, w) = symbols.dims();
    let normalized_bits = total_bits / (h * w) as f64;
    Ok(PenaltyEstimate {
        total_bits,
        bits_per_element: total_bits / (c * h * w) as f64,
        normalized_bits,
        penalty: cfg.gamma as f64 * normalized_bits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn random_tensor(rng: &mut ChaCha8Rng, dims: (usize, usize, usize)) -> Tensor<f32> {
        Tensor::from_fn(dims, |_, _, _| rng.random_range(-4.0..4.0f32)).unwrap()
    }

    fn all_coders() -> Vec<CoderConfig> {
        vec![
            CoderConfig::SymEg {
                selector: ReferenceSelector::Median,
            },
            CoderConfig::SymEg {
                selector: ReferenceSelector::Mean,
            },
            CoderConfig::SymEg {
                selector: ReferenceSelector::Mode,
            },
            CoderConfig::EgK { k: 4 },
            CoderConfig::EgK { k: 0 },
            CoderConfig::RansGaussian,
        ]
    }

    #[test]
    fn constant_tensor_symeg_container_size_closed_form() {
        let (c, h, w) = (3, 5, 7);
        let t = Tensor::filled((c, h, w), 2.5f32).unwrap();
        let cfg = PipelineConfig::symeg_median(8);
        let packed = compress(&t, &cfg).unwrap();
        let expect = CONTAINER_FIXED_BYTES + 4 * c as u64 + ((c * h * w) as u64).div_ceil(8);
        assert_eq!(packed.total_bytes(), expect);
        // payload is exactly one bit per symbol
        let back = decompress(&packed, &cfg).unwrap();
        assert_eq!(back.data(), t.data());
    }

    #[test]
    fn symbol_level_round_trip_all_coders() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        for coder in all_coders() {
            for _ in 0..10 {
                let dims = (
                    rng.random_range(1..4usize),
                    rng.random_range(2..7usize),
                    rng.random_range(2..7usize),
                );
                let q = rng.random_range(2..=10u8);
                let t = random_tensor(&mut rng, dims);
                let cfg = PipelineConfig::new(ChannelTransform::identity(), q, coder, 0.0).unwrap();
                let packed = compress(&t, &cfg).unwrap();
                let symbols = decode_symbols(&packed).unwrap();
                let (expect, _) = quantize_uniform(&t, q).unwrap();
                assert_eq!(symbols, expect, "coder {coder:?} q={q}");
            }
        }
    }

    #[test]
    fn reconstruction_error_bounded_by_half_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(72);
        for coder in all_coders() {
            let t = random_tensor(&mut rng, (2, 6, 6));
            let cfg = PipelineConfig::new(ChannelTransform::identity(), 8, coder, 0.0).unwrap();
            let packed = compress(&t, &cfg).unwrap();
            let back = decompress(&packed, &cfg).unwrap();
            let params = QuantParams::new(packed.y_min, packed.y_max, packed.q).unwrap();
            let half = params.step() / 2.0;
            for (a, b) in t.data().iter().zip(back.data()) {
                assert!((a - b).abs() <= half + 1e-6);
            }
        }
    }

    #[test]
    fn container_serialization_round_trip_through_bytes() {
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        for coder in all_coders() {
            let t = random_tensor(&mut rng, (3, 4, 4));
            let cfg = PipelineConfig::new(ChannelTransform::identity(), 8, coder, 0.0).unwrap();
            let packed = compress(&t, &cfg).unwrap();
            let bytes = packed.to_bytes().unwrap();
            assert_eq!(bytes.len() as u64, packed.total_bytes());
            let parsed = CompressedActivation::from_bytes(&bytes).unwrap();
            assert_eq!(parsed, packed);
            assert_eq!(decompress(&parsed, &cfg).unwrap(), decompress(&packed, &cfg).unwrap());
        }
    }

    #[test]
    fn symeg_estimate_equals_payload_bits_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(74);
        for _ in 0..10 {
            let t = random_tensor(&mut rng, (3, 5, 5));
            let cfg = PipelineConfig::symeg_median(8);
            let est = estimate_penalty(&t, &cfg).unwrap();
            let packed = compress(&t, &cfg).unwrap();
            // the payload is byte-padded; the estimate counts exact bits
            let payload_bits = packed.payload.len() * 8;
            let est_bits = est.total_bits as usize;
            assert!(est_bits <= payload_bits && payload_bits - est_bits < 8);
        }
    }

    #[test]
    fn constant_tensor_penalty_normalization() {
        let (c, h, w) = (4, 6, 6);
        let t = Tensor::filled((c, h, w), 1.0f32).unwrap();
        let mut cfg = PipelineConfig::symeg_median(8);
        cfg.gamma = 0.5;
        let est = estimate_penalty(&t, &cfg).unwrap();
        assert_eq!(est.total_bits, (c * h * w) as f64);
        assert_eq!(est.bits_per_element, 1.0);
        assert_eq!(est.normalized_bits, c as f64);
        assert_eq!(est.penalty, 0.5 * c as f64);

        cfg.gamma = 0.0;
        let est = estimate_penalty(&t, &cfg).unwrap();
        assert_eq!(est.penalty, 0.0);
    }

    #[test]
    fn rans_payload_tracks_gaussian_estimate() {
        // model-matched synthetic data, >= 1e5 symbols
        let mut rng = ChaCha8Rng::seed_from_u64(75);
        let (c, h, w) = (8, 112, 112);
        let t = Tensor::from_fn((c, h, w), |ci, _, _| {
            let normal = Normal::new(ci as f64 * 0.3, 1.0 + ci as f64 * 0.2).unwrap();
            normal.sample(&mut rng) as f32
        })
        .unwrap();
        let cfg = PipelineConfig::rans_gaussian(8);
        let est = estimate_penalty(&t, &cfg).unwrap();
        let packed = compress(&t, &cfg).unwrap();
        let payload_bits = (packed.payload.len() * 8) as f64;
        let gap = (payload_bits - est.total_bits).abs() / est.total_bits;
        assert!(gap <= 0.02, "gap {gap}");
        // container size = estimate + overhead within 2% + 64 bytes
        let overhead = CONTAINER_FIXED_BYTES + packed.overhead.byte_len();
        let expect_bytes = est.total_bits / 8.0 + overhead as f64;
        assert!((packed.total_bytes() as f64 - expect_bytes).abs() <= 0.02 * expect_bytes + 64.0);
    }

    #[test]
    fn transform_round_trip_through_pipeline() {
        let mut rng = ChaCha8Rng::seed_from_u64(76);
        // orthonormal rotation as both forward and inverse-transpose
        let s = std::f32::consts::FRAC_1_SQRT_2;
        let transform = ChannelTransform::conv1x1(
            2,
            vec![s, s, s, -s],
            vec![0.0, 0.0],
            vec![s, s, s, -s],
            vec![0.0, 0.0],
        )
        .unwrap();
        let t = random_tensor(&mut rng, (2, 8, 8));
        let cfg = PipelineConfig::new(transform, 10, CoderConfig::RansGaussian, 0.0).unwrap();
        let packed = compress(&t, &cfg).unwrap();
        let back = decompress(&packed, &cfg).unwrap();
        // quantization in the rotated space, plus the rotation round trip
        let params = QuantParams::new(packed.y_min, packed.y_max, packed.q).unwrap();
        let tol = params.step() * 1.5 + 1e-4;
        for (a, b) in t.data().iter().zip(back.data()) {
            assert!((a - b).abs() <= tol, "error {}", (a - b).abs());
        }
    }

    #[test]
    fn invalid_q_is_config_error() {
        let t = Tensor::filled((1, 2, 2), 0.0f32).unwrap();
        let cfg = PipelineConfig::symeg_median(40);
        assert!(matches!(compress(&t, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn corrupted_payload_byte_fails_parse() {
        let t = Tensor::filled((2, 3, 3), 5.0f32).unwrap();
        let cfg = PipelineConfig::symeg_median(8);
        let packed = compress(&t, &cfg).unwrap();
        let mut bytes = packed.to_bytes().unwrap();
        let payload_start = bytes.len() - 4 - packed.payload.len();
        bytes[payload_start] ^= 0xFF;
        assert!(matches!(
            CompressedActivation::from_bytes(&bytes),
            Err(Error::Corrupt(_))
        ));
    }

    #[test]
    fn rans_needs_two_pixels_per_channel() {
        let t = Tensor::filled((2, 1, 1), 1.0f32).unwrap();
        let cfg = PipelineConfig::rans_gaussian(8);
        assert!(matches!(compress(&t, &cfg), Err(Error::Domain(_))));
        // golomb coders handle single-pixel maps fine
        let cfg = PipelineConfig::symeg_median(8);
        let packed = compress(&t, &cfg).unwrap();
        assert_eq!(decompress(&packed, &cfg).unwrap().data(), t.data());
    }
}
