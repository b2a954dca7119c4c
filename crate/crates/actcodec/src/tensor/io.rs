//! Binary tensor file format.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic   4 bytes  "ATNS"
//! version u8       1 (ndim = 3) or 2 (adds ndim = 4 for weight tensors)
//! dtype   u8       0 = f32, 1 = u8, 2 = u16, 3 = i8, 4 = i32
//! ndim    u8       3 or 4
//! dims    ndim × u32
//! payload raw row-major little-endian elements
//! ```
//!
//! Round trips are bit-exact; the format itself applies no compression.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{AnyTensor, DType, Element, Tensor, WeightTensor};
use crate::error::{Error, Result};

pub(crate) const MAGIC: [u8; 4] = *b"ATNS";

/// Header size of a 3-D (version 1) tensor file.
pub const TENSOR_HEADER_BYTES: u64 = 19;
/// Header size of a 4-D (version 2) weight file.
pub const WEIGHTS_HEADER_BYTES: u64 = 23;

fn write_header(out: &mut Vec<u8>, version: u8, dtype: DType, dims: &[u32]) {
    out.extend_from_slice(&MAGIC);
    out.push(version);
    out.push(dtype.code());
    out.push(dims.len() as u8);
    for &d in dims {
        out.extend_from_slice(&d.to_le_bytes());
    }
}

fn encode_payload<T: Element>(data: &[T], out: &mut Vec<u8>) {
    out.reserve(data.len() * T::DTYPE.size());
    for &v in data {
        v.write_le(out);
    }
}

/// Serialize a tensor to `writer`. Returns the byte count written.
pub fn write_tensor_to<T: Element>(t: &Tensor<T>, writer: &mut impl Write) -> Result<u64> {
    let (c, h, w) = t.dims();
    let mut buf = Vec::with_capacity(TENSOR_HEADER_BYTES as usize + t.len() * T::DTYPE.size());
    write_header(&mut buf, 1, T::DTYPE, &[c as u32, h as u32, w as u32]);
    encode_payload(t.data(), &mut buf);
    writer.write_all(&buf)?;
    Ok(buf.len() as u64)
}

/// Write a tensor file. Returns the byte count written.
pub fn write_tensor<T: Element>(t: &Tensor<T>, path: impl AsRef<Path>) -> Result<u64> {
    let mut writer = BufWriter::new(File::create(path)?);
    let n = write_tensor_to(t, &mut writer)?;
    writer.flush()?;
    Ok(n)
}

/// Serialize a 4-D weight tensor (version 2) to `writer`.
pub fn write_weights_to<T: Element>(w: &WeightTensor<T>, writer: &mut impl Write) -> Result<u64> {
    let (o, i, kh, kw) = w.dims();
    let mut buf = Vec::with_capacity(WEIGHTS_HEADER_BYTES as usize + w.len() * T::DTYPE.size());
    write_header(&mut buf, 2, T::DTYPE, &[o as u32, i as u32, kh as u32, kw as u32]);
    encode_payload(w.data(), &mut buf);
    writer.write_all(&buf)?;
    Ok(buf.len() as u64)
}

/// Write a 4-D weight tensor file. Returns the byte count written.
pub fn write_weights<T: Element>(w: &WeightTensor<T>, path: impl AsRef<Path>) -> Result<u64> {
    let mut writer = BufWriter::new(File::create(path)?);
    let n = write_weights_to(w, &mut writer)?;
    writer.flush()?;
    Ok(n)
}

struct Header {
    dtype: DType,
    dims: Vec<u32>,
}

fn read_header(reader: &mut impl Read) -> Result<Header> {
    let mut magic = [0u8; 4];
    reader
        .read_exact(&mut magic)
        .map_err(|_| Error::format("file too short for header"))?;
    if magic != MAGIC {
        return Err(Error::format(format!("bad magic {magic:02x?}")));
    }
    let mut fixed = [0u8; 3];
    reader
        .read_exact(&mut fixed)
        .map_err(|_| Error::format("file too short for header"))?;
    let (version, dtype_code, ndim) = (fixed[0], fixed[1], fixed[2]);
    let dtype = DType::from_code(dtype_code)
        .ok_or_else(|| Error::unsupported(format!("unknown dtype code {dtype_code}")))?;
    match (version, ndim) {
        (1, 3) | (2, 3) | (2, 4) => {}
        (1, n) => return Err(Error::format(format!("version 1 requires ndim 3, got {n}"))),
        (2, n) => return Err(Error::format(format!("version 2 supports ndim 3 or 4, got {n}"))),
        (v, _) => return Err(Error::unsupported(format!("unknown version {v}"))),
    }
    let mut dims = Vec::with_capacity(ndim as usize);
    for _ in 0..ndim {
        let mut b = [0u8; 4];
        reader
            .read_exact(&mut b)
            .map_err(|_| Error::format("file too short for dims"))?;
        dims.push(u32::from_le_bytes(b));
    }
    Ok(Header { dtype, dims })
}

fn read_payload<T: Element>(reader: &mut impl Read, count: usize) -> Result<Vec<T>> {
    let size = T::DTYPE.size();
    let mut bytes = vec![0u8; count * size];
    reader
        .read_exact(&mut bytes)
        .map_err(|_| Error::corrupt(format!("payload truncated, expected {} bytes", count * size)))?;
    // A well-formed file ends exactly at the payload.
    let mut probe = [0u8; 1];
    if reader.read(&mut probe)? != 0 {
        return Err(Error::corrupt("trailing bytes after payload"));
    }
    Ok(bytes.chunks_exact(size).map(T::read_le).collect())
}

fn dims3(dims: &[u32]) -> Result<(usize, usize, usize)> {
    if dims.len() != 3 {
        return Err(Error::format(format!("expected 3 dims, file holds {}", dims.len())));
    }
    Ok((dims[0] as usize, dims[1] as usize, dims[2] as usize))
}

/// Read a tensor file of any supported dtype.
pub fn read_tensor(path: impl AsRef<Path>) -> Result<AnyTensor> {
    let mut reader = BufReader::new(File::open(path)?);
    let header = read_header(&mut reader)?;
    let (c, h, w) = dims3(&header.dims)?;
    let count = c * h * w;
    Ok(match header.dtype {
        DType::F32 => AnyTensor::F32(Tensor::new((c, h, w), read_payload(&mut reader, count)?)?),
        DType::U8 => AnyTensor::U8(Tensor::new((c, h, w), read_payload(&mut reader, count)?)?),
        DType::U16 => AnyTensor::U16(Tensor::new((c, h, w), read_payload(&mut reader, count)?)?),
        DType::I8 => AnyTensor::I8(Tensor::new((c, h, w), read_payload(&mut reader, count)?)?),
        DType::I32 => AnyTensor::I32(Tensor::new((c, h, w), read_payload(&mut reader, count)?)?),
    })
}

/// Read a tensor file that must hold elements of type `T`.
pub fn read_tensor_as<T: Element>(path: impl AsRef<Path>) -> Result<Tensor<T>> {
    let mut reader = BufReader::new(File::open(path)?);
    let header = read_header(&mut reader)?;
    if header.dtype != T::DTYPE {
        return Err(Error::unsupported(format!(
            "expected {:?} tensor, file holds {:?}",
            T::DTYPE,
            header.dtype
        )));
    }
    let (c, h, w) = dims3(&header.dims)?;
    Tensor::new((c, h, w), read_payload(&mut reader, c * h * w)?)
}

/// Read a 4-D weight file that must hold elements of type `T`.
pub fn read_weights_as<T: Element>(path: impl AsRef<Path>) -> Result<WeightTensor<T>> {
    let mut reader = BufReader::new(File::open(path)?);
    let header = read_header(&mut reader)?;
    if header.dtype != T::DTYPE {
        return Err(Error::unsupported(format!(
            "expected {:?} weights, file holds {:?}",
            T::DTYPE,
            header.dtype
        )));
    }
    if header.dims.len() != 4 {
        return Err(Error::format(format!(
            "expected 4 dims for weights, file holds {}",
            header.dims.len()
        )));
    }
    let (o, i, kh, kw) = (
        header.dims[0] as usize,
        header.dims[1] as usize,
        header.dims[2] as usize,
        header.dims[3] as usize,
    );
    WeightTensor::new((o, i, kh, kw), read_payload(&mut reader, o * i * kh * kw)?)
}
