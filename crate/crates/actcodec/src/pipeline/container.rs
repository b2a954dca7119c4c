//! The compressed-activation container format.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic      4 bytes  "ACTC"
//! version    u8       1
//! coder id   u8       0 = symeg, 1 = eg_k, 2 = rans
//! q          u8       bit depth
//! aux        u8       reference-selector code (symeg) or k (eg_k), else 0
//! dims       3 × u16  C, H, W
//! y_min      f32
//! y_max      f32
//! overhead   coder-specific block (see below)
//! length     u64      payload byte count
//! payload    entropy-coded bytes
//! checksum   u32      CRC-32 of the payload
//! ```
//!
//! The fixed fields total 34 bytes, so `total_bytes = 34 + overhead +
//! payload`. Overhead per coder: symeg stores one u32 reference per channel,
//! eg_k stores nothing, rans stores (mu, sigma) per channel as two f32s in
//! channel order. Dims are u16 here (activation maps comfortably fit);
//! the tensor file format keeps u32 dims.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::golomb::ReferenceSelector;

pub(crate) const MAGIC: [u8; 4] = *b"ACTC";
pub(crate) const VERSION: u8 = 1;

/// Byte count of the fixed container fields (everything except the
/// overhead block and the payload).
pub const CONTAINER_FIXED_BYTES: u64 = 34;

/// Entropy coder identifier stored in the container.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoderId {
    SymEg = 0,
    EgK = 1,
    RansGaussian = 2,
}

impl CoderId {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<CoderId> {
        match code {
            0 => Some(CoderId::SymEg),
            1 => Some(CoderId::EgK),
            2 => Some(CoderId::RansGaussian),
            _ => None,
        }
    }
}

/// Coder-specific side information the decoder needs.
#[derive(Debug, Clone, PartialEq)]
pub enum Overhead {
    /// Per-channel reference numbers (symeg).
    References(Vec<u32>),
    /// No side information (eg_k).
    None,
    /// Per-channel (mu, sigma) Gaussian parameters (rans).
    Gaussian(Vec<(f32, f32)>),
}

impl Overhead {
    pub fn byte_len(&self) -> u64 {
        match self {
            Overhead::References(r) => 4 * r.len() as u64,
            Overhead::None => 0,
            Overhead::Gaussian(g) => 8 * g.len() as u64,
        }
    }
}

/// A compressed activation map: header, side information and entropy-coded
/// payload.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressedActivation {
    pub coder: CoderId,
    pub q: u8,
    /// Selector code for symeg, k for eg_k, 0 for rans.
    pub aux: u8,
    pub dims: (usize, usize, usize),
    pub y_min: f32,
    pub y_max: f32,
    pub overhead: Overhead,
    pub payload: Vec<u8>,
}

impl CompressedActivation {
    /// Serialized size: fixed fields + overhead + payload.
    pub fn total_bytes(&self) -> u64 {
        CONTAINER_FIXED_BYTES + self.overhead.byte_len() + self.payload.len() as u64
    }

    /// The symeg reference selector recorded in `aux`.
    pub fn selector(&self) -> Result<ReferenceSelector> {
        ReferenceSelector::from_code(self.aux)
            .ok_or_else(|| Error::corrupt(format!("unknown reference selector code {}", self.aux)))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let (c, h, w) = self.dims;
        for (name, v) in [("C", c), ("H", h), ("W", w)] {
            if v == 0 || v > u16::MAX as usize {
                return Err(Error::config(format!(
                    "container dim {name}={v} outside [1, {}]",
                    u16::MAX
                )));
            }
        }
        let channels = c;
        match &self.overhead {
            Overhead::References(r) if r.len() != channels => {
                return Err(Error::shape(format!("{} references for {channels} channels", r.len())))
            }
            Overhead::Gaussian(g) if g.len() != channels => {
                return Err(Error::shape(format!("{} gaussian pairs for {channels} channels", g.len())))
            }
            _ => {}
        }
        let mut out = Vec::with_capacity(self.total_bytes() as usize);
        out.extend_from_slice(&MAGIC);
        out.push(VERSION);
        out.push(self.coder.code());
        out.push(self.q);
        out.push(self.aux);
        out.extend_from_slice(&(c as u16).to_le_bytes());
        out.extend_from_slice(&(h as u16).to_le_bytes());
        out.extend_from_slice(&(w as u16).to_le_bytes());
        out.extend_from_slice(&self.y_min.to_le_bytes());
        out.extend_from_slice(&self.y_max.to_le_bytes());
        match &self.overhead {
            Overhead::References(refs) => {
                for &r in refs {
                    out.extend_from_slice(&r.to_le_bytes());
                }
            }
            Overhead::None => {}
            Overhead::Gaussian(pairs) => {
                for &(mu, sigma) in pairs {
                    out.extend_from_slice(&mu.to_le_bytes());
                    out.extend_from_slice(&sigma.to_le_bytes());
                }
            }
        }
        out.extend_from_slice(&(self.payload.len() as u64).to_le_bytes());
        out.extend_from_slice(&self.payload);
        out.extend_from_slice(&crc32fast::hash(&self.payload).to_le_bytes());
        debug_assert_eq!(out.len() as u64, self.total_bytes());
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        let magic = r.take(4)?;
        if magic != MAGIC {
            return Err(Error::format(format!("bad magic {magic:02x?}")));
        }
        let version = r.u8()?;
        if version != VERSION {
            return Err(Error::unsupported(format!("unknown container version {version}")));
        }
        let coder_code = r.u8()?;
        let coder = CoderId::from_code(coder_code)
            .ok_or_else(|| Error::unsupported(format!("unknown coder id {coder_code}")))?;
        let q = r.u8()?;
        let aux = r.u8()?;
        let c = r.u16()? as usize;
        let h = r.u16()? as usize;
        let w = r.u16()? as usize;
        if c == 0 || h == 0 || w == 0 {
            return Err(Error::corrupt(format!("zero dimension {c}x{h}x{w}")));
        }
        let y_min = r.f32()?;
        let y_max = r.f32()?;
        let overhead = match coder {
            CoderId::SymEg => {
                let mut refs = Vec::with_capacity(c);
                for _ in 0..c {
                    refs.push(r.u32()?);
                }
                Overhead::References(refs)
            }
            CoderId::EgK => Overhead::None,
            CoderId::RansGaussian => {
                let mut pairs = Vec::with_capacity(c);
                for _ in 0..c {
                    let mu = r.f32()?;
                    let sigma = r.f32()?;
                    pairs.push((mu, sigma));
                }
                Overhead::Gaussian(pairs)
            }
        };
        let payload_len = r.u64()?;
        let payload = r.take(payload_len as usize)?.to_vec();
        let stored_crc = r.u32()?;
        if r.pos != bytes.len() {
            return Err(Error::corrupt(format!(
                "{} trailing bytes after checksum",
                bytes.len() - r.pos
            )));
        }
        let actual_crc = crc32fast::hash(&payload);
        if stored_crc != actual_crc {
            return Err(Error::corrupt(format!(
                "payload checksum mismatch: stored {stored_crc:08x}, computed {actual_crc:08x}"
            )));
        }
        Ok(CompressedActivation {
            coder,
            q,
            aux,
            dims: (c, h, w),
            y_min,
            y_max,
            overhead,
            payload,
        })
    }

    pub fn write_to(&self, path: impl AsRef<Path>) -> Result<u64> {
        let bytes = self.to_bytes()?;
        File::create(path)?.write_all(&bytes)?;
        Ok(bytes.len() as u64)
    }

    pub fn read_from(path: impl AsRef<Path>) -> Result<Self> {
        let mut bytes = Vec::new();
        File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    /// Recompute the payload CRC; used by decode before trusting the payload.
    pub fn payload_crc(&self) -> u32 {
        crc32fast::hash(&self.payload)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::corrupt(format!(
                "container truncated at byte {} (wanted {n} more)",
                self.pos
            )));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}
