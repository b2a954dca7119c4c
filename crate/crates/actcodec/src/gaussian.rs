//! Data-dependent channel-wise Gaussian entropy model.
//!
//! Each channel of a symbol tensor gets a (mu, sigma) pair computed from the
//! channel's own data and broadcast to every pixel. The continuous Gaussian
//! is discretized by integrating over unit bins centered on symbols, with
//! the distribution tails folded into the first and last symbol so the
//! probabilities sum to one. The same pair drives the closed-form bit
//! estimate and the integer CDF tables the range coder consumes, so the
//! estimate tracks the coded size.

use crate::error::{Error, Result};
use crate::quantize::check_bit_depth;
use crate::tensor::Tensor;

/// Smallest admissible channel standard deviation, in symbol units.
/// Keeps constant channels codable at ~0.1 bits/symbol without degenerate
/// tables.
pub const SIGMA_FLOOR: f32 = 0.05;

/// Per-channel Gaussian parameters, sigma floored at [`SIGMA_FLOOR`].
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelGaussian {
    pub mu: Vec<f32>,
    pub sigma: Vec<f32>,
}

impl ChannelGaussian {
    pub fn new(mu: Vec<f32>, sigma: Vec<f32>) -> Result<Self> {
        if mu.len() != sigma.len() {
            return Err(Error::shape(format!(
                "{} means for {} sigmas",
                mu.len(),
                sigma.len()
            )));
        }
        if sigma.iter().any(|&s| !s.is_finite() || s < SIGMA_FLOOR) {
            return Err(Error::domain(format!("sigma below floor {SIGMA_FLOOR}")));
        }
        if mu.iter().any(|m| !m.is_finite()) {
            return Err(Error::domain("non-finite mu"));
        }
        Ok(ChannelGaussian { mu, sigma })
    }

    /// Fit per-channel statistics from a symbol tensor.
    pub fn fit(symbols: &Tensor<u16>) -> Result<Self> {
        let mut mu = Vec::with_capacity(symbols.channels());
        let mut sigma = Vec::with_capacity(symbols.channels());
        for c in 0..symbols.channels() {
            let (m, s) = channel_stats(symbols, c)?;
            mu.push(m);
            sigma.push(s);
        }
        Ok(ChannelGaussian { mu, sigma })
    }

    pub fn channels(&self) -> usize {
        self.mu.len()
    }
}

/// Mean and (sigma-floored) sample standard deviation of one channel.
///
/// The deviation uses the H·W - 1 denominator, so channels need at least
/// two elements.
pub fn channel_stats(symbols: &Tensor<u16>, c: usize) -> Result<(f32, f32)> {
    let channel = symbols.channel(c);
    let n = channel.len();
    if n < 2 {
        return Err(Error::domain(format!(
            "channel needs H*W >= 2 elements for a standard deviation, got {n}"
        )));
    }
    let sum: f64 = channel.iter().map(|&s| s as f64).sum();
    let mu = sum / n as f64;
    let ss: f64 = channel.iter().map(|&s| (s as f64 - mu) * (s as f64 - mu)).sum();
    let sigma = (ss / (n - 1) as f64).sqrt();
    Ok((mu as f32, (sigma as f32).max(SIGMA_FLOOR)))
}

/// Standard normal CDF.
///
/// Evaluated as `0.5 * (1 + erf(z / sqrt(2)))` with `libm`'s erf (the musl
/// port, error around 1 ulp). The implementation is pure software
/// arithmetic, so CDF tables built from transmitted (mu, sigma) are
/// bit-identical across platforms — a hard requirement for the range coder.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + libm::erf(z / std::f64::consts::SQRT_2))
}

/// Probability of one symbol under the discretized Gaussian.
///
/// Integrates the density over the unit bin `[s - 0.5, s + 0.5)`, with the
/// lower tail folded into symbol 0 and the upper tail into `2^q - 1`.
pub fn symbol_probability(s: u16, mu: f32, sigma: f32, q: u8) -> f64 {
    let last = alphabet_size(q) - 1;
    debug_assert!((s as usize) <= last);
    let mu = mu as f64;
    let sigma = sigma as f64;
    let upper = if s as usize == last {
        1.0
    } else {
        normal_cdf((s as f64 + 0.5 - mu) / sigma)
    };
    let lower = if s == 0 {
        0.0
    } else {
        normal_cdf((s as f64 - 0.5 - mu) / sigma)
    };
    upper - lower
}

/// Probabilities of the whole alphabet; sums to one by tail folding.
pub fn symbol_distribution(mu: f32, sigma: f32, q: u8) -> Vec<f64> {
    let size = alphabet_size(q);
    let mu = mu as f64;
    let sigma = sigma as f64;
    // Shared bin edges so adjacent bins telescope.
    let mut upper_edges = Vec::with_capacity(size);
    for s in 0..size - 1 {
        upper_edges.push(normal_cdf((s as f64 + 0.5 - mu) / sigma));
    }
    upper_edges.push(1.0);
    let mut probs = Vec::with_capacity(size);
    let mut lower = 0.0;
    for &upper in &upper_edges {
        probs.push((upper - lower).max(0.0));
        lower = upper;
    }
    probs
}

fn alphabet_size(q: u8) -> usize {
    debug_assert!((1..=16).contains(&q));
    1usize << q
}

/// Cross-entropy bit count of a symbol tensor under a channel-wise model.
///
/// Probabilities are clamped at 2^-32 so a single mismatched outlier cannot
/// blow the estimate up to infinity.
pub fn estimate_bits_gaussian(symbols: &Tensor<u16>, model: &ChannelGaussian, q: u8) -> Result<f64> {
    check_bit_depth(q)?;
    if model.channels() != symbols.channels() {
        return Err(Error::shape(format!(
            "model has {} channels, tensor has {}",
            model.channels(),
            symbols.channels()
        )));
    }
    let min_prob = (2.0f64).powi(-32);
    let mut bits = 0.0;
    for c in 0..symbols.channels() {
        let probs = symbol_distribution(model.mu[c], model.sigma[c], q);
        for &s in symbols.channel(c) {
            let p = probs
                .get(s as usize)
                .copied()
                .ok_or_else(|| Error::domain(format!("symbol {s} outside alphabet for q={q}")))?;
            bits -= p.max(min_prob).log2();
        }
    }
    Ok(bits)
}

/// Integer cumulative-frequency table over a `2^q` alphabet, total 2^16.
///
/// Every symbol keeps a frequency of at least one, so any symbol stays
/// codable; construction is deterministic for identical (mu, sigma, q).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CdfTable {
    cum: Vec<u32>,
}

impl CdfTable {
    /// Total frequency mass, 2^16.
    pub const TOTAL: u32 = 1 << Self::SCALE_BITS;
    /// Fixed-point precision of the table.
    pub const SCALE_BITS: u32 = 16;

    /// Build the table for one channel's (mu, sigma) at bit depth `q`.
    ///
    /// Frequencies follow the discretized Gaussian via largest-remainder
    /// apportionment on top of the guaranteed one unit per symbol.
    pub fn from_gaussian(mu: f32, sigma: f32, q: u8) -> Result<CdfTable> {
        check_bit_depth(q)?;
        if !(sigma.is_finite() && sigma >= SIGMA_FLOOR) {
            return Err(Error::domain(format!("sigma {sigma} below floor {SIGMA_FLOOR}")));
        }
        let mut probs = symbol_distribution(mu, sigma, q);
        let total: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= total;
        }
        let size = probs.len();
        let spare = Self::TOTAL as u64 - size as u64;
        let mut freqs = vec![1u32; size];
        let mut assigned = 0u64;
        let mut remainders: Vec<(f64, usize)> = Vec::with_capacity(size);
        for (s, &p) in probs.iter().enumerate() {
            let share = p * spare as f64;
            let base = share.floor() as u64;
            freqs[s] += base as u32;
            assigned += base;
            remainders.push((share - base as f64, s));
        }
        let leftover = (spare - assigned) as usize;
        remainders.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        for &(_, s) in remainders.iter().take(leftover) {
            freqs[s] += 1;
        }
        Self::from_frequencies(&freqs)
    }

    /// Build a table from raw frequencies; they must be positive and sum to
    /// [`CdfTable::TOTAL`].
    pub fn from_frequencies(freqs: &[u32]) -> Result<CdfTable> {
        if freqs.is_empty() {
            return Err(Error::domain("empty frequency table"));
        }
        let mut cum = Vec::with_capacity(freqs.len() + 1);
        cum.push(0u32);
        let mut running = 0u64;
        for (s, &f) in freqs.iter().enumerate() {
            if f == 0 {
                return Err(Error::domain(format!("symbol {s} has zero frequency")));
            }
            running += f as u64;
            if running > Self::TOTAL as u64 {
                return Err(Error::domain("frequencies exceed table total"));
            }
            cum.push(running as u32);
        }
        if running != Self::TOTAL as u64 {
            return Err(Error::domain(format!(
                "frequencies sum to {running}, expected {}",
                Self::TOTAL
            )));
        }
        Ok(CdfTable { cum })
    }

    pub fn alphabet_size(&self) -> usize {
        self.cum.len() - 1
    }

    /// Cumulative frequency below symbol `s`.
    #[inline]
    pub fn cum(&self, s: u16) -> u32 {
        self.cum[s as usize]
    }

    #[inline]
    pub fn freq(&self, s: u16) -> u32 {
        self.cum[s as usize + 1] - self.cum[s as usize]
    }

    /// The symbol whose cumulative slot contains `value` (< TOTAL).
    #[inline]
    pub fn lookup(&self, value: u32) -> u16 {
        debug_assert!(value < Self::TOTAL);
        // partition_point: first index with cum > value, minus one.
        (self.cum.partition_point(|&c| c <= value) - 1) as u16
    }

    /// Table probability of a symbol, `freq / TOTAL`.
    pub fn probability(&self, s: u16) -> f64 {
        self.freq(s) as f64 / Self::TOTAL as f64
    }
}
