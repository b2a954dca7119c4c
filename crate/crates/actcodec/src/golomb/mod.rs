//! Exponential Golomb coding: the k-th order baseline coder and the
//! symmetric variant that codes signed differences from a per-channel
//! reference number.
//!
//! The symmetric coder maps a residual `res = x - x_ref` onto an unsigned
//! value by interleaving signs (`z = 2|res|` for `res >= 0`, `2|res| + 1`
//! for `res < 0`) and emits `z` as an order-0 exponential Golomb codeword:
//! `floor(log2(z + 1))` zero bits followed by the binary digits of `z + 1`.
//! Codeword lengths are always odd, and a symbol equal to its reference
//! costs exactly one bit. The matching closed-form length is available
//! without touching a bit stream, which is what makes the coder usable as a
//! differentiable-size penalty.

mod bits;

pub use bits::{BitCursor, BitString};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Symbols legitimately reach 2^16 - 1 (q = 16); guard codeword parsing
/// well above that so corrupt streams fail fast instead of overflowing.
const MAX_CODE_BITS: u32 = 40;

/// Statistic used as the per-channel reference number for symmetric coding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceSelector {
    Mean,
    Mode,
    Median,
}

impl ReferenceSelector {
    pub fn code(self) -> u8 {
        match self {
            ReferenceSelector::Mean => 0,
            ReferenceSelector::Mode => 1,
            ReferenceSelector::Median => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(ReferenceSelector::Mean),
            1 => Some(ReferenceSelector::Mode),
            2 => Some(ReferenceSelector::Median),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ReferenceSelector::Mean => "mean",
            ReferenceSelector::Mode => "mode",
            ReferenceSelector::Median => "median",
        }
    }
}

impl std::str::FromStr for ReferenceSelector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(ReferenceSelector::Mean),
            "mode" => Ok(ReferenceSelector::Mode),
            "median" => Ok(ReferenceSelector::Median),
            other => Err(Error::config(format!("unknown reference selector '{other}'"))),
        }
    }
}

/// Append the symmetric exp-Golomb codeword for `x` against `x_ref`.
pub fn symeg_encode_into(out: &mut BitString, x: u32, x_ref: u32) {
    let res = x as i64 - x_ref as i64;
    let z = if res < 0 {
        2 * res.unsigned_abs() + 1
    } else {
        2 * res.unsigned_abs()
    };
    let code = z + 1;
    let code_bits = 64 - code.leading_zeros();
    out.push_bits(0, code_bits - 1);
    out.push_bits(code, code_bits);
}

/// Codeword for a single symbol; see [`symeg_encode_into`].
pub fn symeg_encode(x: u32, x_ref: u32) -> BitString {
    let mut out = BitString::new();
    symeg_encode_into(&mut out, x, x_ref);
    out
}

/// Decode one symmetric exp-Golomb codeword, advancing the cursor past it.
pub fn symeg_decode(cursor: &mut BitCursor<'_>, x_ref: u32) -> Result<u32> {
    let mut zeros = 0u32;
    while !cursor.read_bit()? {
        zeros += 1;
        if zeros > MAX_CODE_BITS {
            return Err(Error::corrupt("symmetric exp-Golomb prefix too long"));
        }
    }
    let code = (1u64 << zeros) | cursor.read_bits(zeros)?;
    let z = code - 1;
    let res = if z % 2 == 0 {
        (z / 2) as i64
    } else {
        -(((z - 1) / 2) as i64)
    };
    let x = x_ref as i64 + res;
    if x < 0 || x > u32::MAX as i64 {
        return Err(Error::corrupt(format!("decoded symbol {x} out of range")));
    }
    Ok(x as u32)
}

/// Closed-form bit length of the symmetric codeword.
///
/// `2*floor(log2(2(x - x_ref) + 1)) + 1` when `x >= x_ref`, else
/// `2*floor(log2(2(x_ref - x) + 2)) + 1`; identical to the length
/// [`symeg_encode`] produces for every pair.
pub fn symeg_length(x: u32, x_ref: u32) -> u32 {
    let arg = if x >= x_ref {
        2 * (x as u64 - x_ref as u64) + 1
    } else {
        2 * (x_ref as u64 - x as u64) + 2
    };
    let floor_log2 = 63 - arg.leading_zeros();
    2 * floor_log2 + 1
}

/// Append the k-th order exp-Golomb codeword for `x`: `floor(log2(x + 2^k)) - k`
/// zero bits followed by the binary digits of `x + 2^k`.
pub fn eg_encode_into(out: &mut BitString, x: u32, k: u32) {
    debug_assert!(k < 32);
    let v = x as u64 + (1u64 << k);
    let v_bits = 64 - v.leading_zeros();
    out.push_bits(0, v_bits - 1 - k);
    out.push_bits(v, v_bits);
}

pub fn eg_encode(x: u32, k: u32) -> BitString {
    let mut out = BitString::new();
    eg_encode_into(&mut out, x, k);
    out
}

/// Decode one k-th order exp-Golomb codeword.
pub fn eg_decode(cursor: &mut BitCursor<'_>, k: u32) -> Result<u32> {
    let mut zeros = 0u32;
    while !cursor.read_bit()? {
        zeros += 1;
        if zeros > MAX_CODE_BITS {
            return Err(Error::corrupt("exp-Golomb prefix too long"));
        }
    }
    let tail = zeros + k;
    let v = (1u64 << tail) | cursor.read_bits(tail)?;
    let x = v - (1u64 << k);
    if x > u32::MAX as u64 {
        return Err(Error::corrupt(format!("decoded symbol {x} out of range")));
    }
    Ok(x as u32)
}

/// Closed-form bit length of the k-th order codeword.
pub fn eg_length(x: u32, k: u32) -> u32 {
    let v = x as u64 + (1u64 << k);
    let floor_log2 = 63 - v.leading_zeros();
    2 * floor_log2 + 1 - k
}

/// Pick a reference number from a channel's symbols.
///
/// Mean rounds half away from zero; mode breaks ties toward the smallest
/// symbol; median takes the lower middle element of the sorted slice. All
/// three are deterministic so encoder and decoder sides agree bit-exactly.
pub fn select_reference(symbols: &[u16], selector: ReferenceSelector) -> Result<u32> {
    if symbols.is_empty() {
        return Err(Error::domain("cannot select a reference from an empty slice"));
    }
    Ok(match selector {
        ReferenceSelector::Mean => {
            let sum: u64 = symbols.iter().map(|&s| s as u64).sum();
            (sum as f64 / symbols.len() as f64).round() as u32
        }
        ReferenceSelector::Mode => {
            let mut counts = std::collections::HashMap::new();
            for &s in symbols {
                *counts.entry(s).or_insert(0u64) += 1;
            }
            let mut best = (0u64, u16::MAX);
            for (&sym, &count) in &counts {
                if count > best.0 || (count == best.0 && sym < best.1) {
                    best = (count, sym);
                }
            }
            best.1 as u32
        }
        ReferenceSelector::Median => {
            let mut sorted = symbols.to_vec();
            sorted.sort_unstable();
            sorted[(sorted.len() - 1) / 2] as u32
        }
    })
}

/// Encode a symbol tensor channel by channel against per-channel references.
///
/// Returns the concatenated payload and the references that must travel as
/// container overhead for the decoder.
pub fn symeg_encode_tensor(symbols: &Tensor<u16>, selector: ReferenceSelector) -> Result<(BitString, Vec<u32>)> {
    let mut payload = BitString::with_capacity(symbols.len() * 2);
    let mut references = Vec::with_capacity(symbols.channels());
    for c in 0..symbols.channels() {
        let channel = symbols.channel(c);
        let x_ref = select_reference(channel, selector)?;
        references.push(x_ref);
        for &s in channel {
            symeg_encode_into(&mut payload, s as u32, x_ref);
        }
    }
    Ok((payload, references))
}

/// Decode a payload produced by [`symeg_encode_tensor`].
pub fn symeg_decode_tensor(
    cursor: &mut BitCursor<'_>,
    references: &[u32],
    dims: (usize, usize, usize),
) -> Result<Tensor<u16>> {
    let (c, h, w) = dims;
    if references.len() != c {
        return Err(Error::shape(format!("{} references for {c} channels", references.len())));
    }
    let plane = h * w;
    let mut data = Vec::with_capacity(c * plane);
    for &x_ref in references {
        for _ in 0..plane {
            let x = symeg_decode(cursor, x_ref)?;
            if x > u16::MAX as u32 {
                return Err(Error::corrupt(format!("decoded symbol {x} exceeds u16")));
            }
            data.push(x as u16);
        }
    }
    Tensor::new(dims, data)
}

/// Encode a symbol tensor with the k-th order coder (no overhead needed).
pub fn eg_encode_tensor(symbols: &Tensor<u16>, k: u32) -> BitString {
    let mut payload = BitString::with_capacity(symbols.len() * 2);
    for &s in symbols.data() {
        eg_encode_into(&mut payload, s as u32, k);
    }
    payload
}

/// Decode a payload produced by [`eg_encode_tensor`].
pub fn eg_decode_tensor(cursor: &mut BitCursor<'_>, k: u32, dims: (usize, usize, usize)) -> Result<Tensor<u16>> {
    let (c, h, w) = dims;
    let mut data = Vec::with_capacity(c * h * w);
    for _ in 0..c * h * w {
        let x = eg_decode(cursor, k)?;
        if x > u16::MAX as u32 {
            return Err(Error::corrupt(format!("decoded symbol {x} exceeds u16")));
        }
        data.push(x as u16);
    }
    Tensor::new(dims, data)
}

/// Total symmetric-coder bits for a tensor, via the closed form; the
/// references are chosen exactly as [`symeg_encode_tensor`] chooses them.
pub fn symeg_length_tensor(symbols: &Tensor<u16>, selector: ReferenceSelector) -> Result<u64> {
    let mut total = 0u64;
    for c in 0..symbols.channels() {
        let channel = symbols.channel(c);
        let x_ref = select_reference(channel, selector)?;
        total += channel.iter().map(|&s| symeg_length(s as u32, x_ref) as u64).sum::<u64>();
    }
    Ok(total)
}

/// Total k-th order coder bits for a tensor, via the closed form.
pub fn eg_length_tensor(symbols: &Tensor<u16>, k: u32) -> u64 {
    symbols.data().iter().map(|&s| eg_length(s as u32, k) as u64).sum()
}
