//! Bit string with MSB-first byte packing.
//!
//! The first bit pushed becomes the most significant bit of the first byte;
//! the final byte is zero-padded. This packing order is part of the container
//! format contract.

use crate::error::{Error, Result};

/// A growable bit sequence.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BitString {
    bytes: Vec<u8>,
    bit_len: usize,
}

impl BitString {
    pub fn new() -> Self {
        BitString::default()
    }

    pub fn with_capacity(bits: usize) -> Self {
        BitString {
            bytes: Vec::with_capacity(bits.div_ceil(8)),
            bit_len: 0,
        }
    }

    /// Reinterpret packed bytes as a bit string of `bit_len` bits.
    pub fn from_bytes(bytes: Vec<u8>, bit_len: usize) -> Result<Self> {
        if bit_len > bytes.len() * 8 || bytes.len() * 8 - bit_len >= 8 {
            return Err(Error::domain(format!(
                "bit length {bit_len} does not fit {} bytes",
                bytes.len()
            )));
        }
        Ok(BitString { bytes, bit_len })
    }

    pub fn len(&self) -> usize {
        self.bit_len
    }

    pub fn is_empty(&self) -> bool {
        self.bit_len == 0
    }

    pub fn clear(&mut self) {
        self.bytes.clear();
        self.bit_len = 0;
    }

    #[inline]
    pub fn push_bit(&mut self, bit: bool) {
        let offset = self.bit_len % 8;
        if offset == 0 {
            self.bytes.push(0);
        }
        if bit {
            let last = self.bytes.len() - 1;
            self.bytes[last] |= 0x80 >> offset;
        }
        self.bit_len += 1;
    }

    /// Push the low `count` bits of `value`, most significant first.
    pub fn push_bits(&mut self, value: u64, count: u32) {
        debug_assert!(count <= 64);
        for i in (0..count).rev() {
            self.push_bit((value >> i) & 1 == 1);
        }
    }

    /// Append another bit string.
    pub fn extend(&mut self, other: &BitString) {
        for i in 0..other.bit_len {
            self.push_bit(other.bit(i));
        }
    }

    #[inline]
    pub fn bit(&self, index: usize) -> bool {
        debug_assert!(index < self.bit_len);
        (self.bytes[index / 8] >> (7 - index % 8)) & 1 == 1
    }

    /// Packed bytes, final byte zero-padded.
    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }

    pub fn byte_len(&self) -> usize {
        self.bytes.len()
    }

    /// Render as "0"/"1" characters; handy in tests.
    pub fn to_bit_string(&self) -> String {
        (0..self.bit_len).map(|i| if self.bit(i) { '1' } else { '0' }).collect()
    }
}

/// A read cursor over packed bits.
#[derive(Debug, Clone)]
pub struct BitCursor<'a> {
    bytes: &'a [u8],
    bit_len: usize,
    pos: usize,
}

impl<'a> BitCursor<'a> {
    /// Cursor over all bits of `bytes`.
    pub fn new(bytes: &'a [u8]) -> Self {
        BitCursor {
            bytes,
            bit_len: bytes.len() * 8,
            pos: 0,
        }
    }

    pub fn from_bitstring(bits: &'a BitString) -> Self {
        BitCursor {
            bytes: bits.as_bytes(),
            bit_len: bits.len(),
            pos: 0,
        }
    }

    /// Current position in bits from the start.
    pub fn pos(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.bit_len - self.pos
    }

    #[inline]
    pub fn read_bit(&mut self) -> Result<bool> {
        if self.pos >= self.bit_len {
            return Err(Error::corrupt("bit stream exhausted"));
        }
        let bit = (self.bytes[self.pos / 8] >> (7 - self.pos % 8)) & 1 == 1;
        self.pos += 1;
        Ok(bit)
    }

    /// Read `count` bits MSB-first into the low bits of a u64.
    pub fn read_bits(&mut self, count: u32) -> Result<u64> {
        debug_assert!(count <= 64);
        let mut value = 0u64;
        for _ in 0..count {
            value = (value << 1) | self.read_bit()? as u64;
        }
        Ok(value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn msb_first_packing() {
        let mut bits = BitString::new();
        bits.push_bit(true);
        bits.push_bit(false);
        bits.push_bit(true);
        assert_eq!(bits.len(), 3);
        assert_eq!(bits.as_bytes(), &[0b1010_0000]);
        assert_eq!(bits.to_bit_string(), "101");
    }

    #[test]
    fn push_bits_matches_binary_msb_first() {
        let mut bits = BitString::new();
        bits.push_bits(0b101, 3);
        bits.push_bits(0b01, 2);
        assert_eq!(bits.to_bit_string(), "10101");
        assert_eq!(bits.as_bytes(), &[0b1010_1000]);
    }

    #[test]
    fn cursor_reads_back_pushed_bits() {
        let mut bits = BitString::new();
        bits.push_bits(0x2_D5, 10);
        let mut cursor = BitCursor::from_bitstring(&bits);
        assert_eq!(cursor.read_bits(10).unwrap(), 0x2_D5);
        assert_eq!(cursor.remaining(), 0);
        assert!(matches!(cursor.read_bit(), Err(Error::Corrupt(_))));
    }

    #[test]
    fn final_byte_zero_padded() {
        let mut bits = BitString::new();
        bits.push_bits(0b11, 2);
        assert_eq!(bits.as_bytes(), &[0b1100_0000]);
        assert_eq!(bits.byte_len(), 1);
    }

    #[test]
    fn from_bytes_validates_length() {
        assert!(BitString::from_bytes(vec![0xFF], 9).is_err());
        assert!(BitString::from_bytes(vec![0xFF, 0x00], 3).is_err());
        let bits = BitString::from_bytes(vec![0b1010_0000], 3).unwrap();
        assert_eq!(bits.to_bit_string(), "101");
    }
}
