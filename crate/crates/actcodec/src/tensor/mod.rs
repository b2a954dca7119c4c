//! C×H×W tensors, element types and the binary tensor file format.
//!
//! Data is stored row-major with the channel dimension outermost and the
//! width dimension innermost, so `channel(c)` is always a contiguous slice.

mod io;

pub use io::{
    read_tensor, read_tensor_as, read_weights_as, write_tensor, write_tensor_to, write_weights,
    write_weights_to, TENSOR_HEADER_BYTES, WEIGHTS_HEADER_BYTES,
};

use crate::error::{Error, Result};

/// Element type of a stored tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DType {
    F32,
    U8,
    U16,
    I8,
    I32,
}

impl DType {
    /// Code used in the file header.
    pub fn code(self) -> u8 {
        match self {
            DType::F32 => 0,
            DType::U8 => 1,
            DType::U16 => 2,
            DType::I8 => 3,
            DType::I32 => 4,
        }
    }

    pub fn from_code(code: u8) -> Option<DType> {
        match code {
            0 => Some(DType::F32),
            1 => Some(DType::U8),
            2 => Some(DType::U16),
            3 => Some(DType::I8),
            4 => Some(DType::I32),
            _ => None,
        }
    }

    /// Size of one element in bytes.
    pub fn size(self) -> usize {
        match self {
            DType::F32 | DType::I32 => 4,
            DType::U16 => 2,
            DType::U8 | DType::I8 => 1,
        }
    }
}

/// A scalar that can live in a [`Tensor`] and be serialized little-endian.
pub trait Element: Copy + PartialEq + std::fmt::Debug + Default + 'static {
    const DTYPE: DType;

    fn write_le(self, out: &mut Vec<u8>);
    fn read_le(bytes: &[u8]) -> Self;
}

macro_rules! impl_element {
    ($ty:ty, $dtype:expr) => {
        impl Element for $ty {
            const DTYPE: DType = $dtype;

            fn write_le(self, out: &mut Vec<u8>) {
                out.extend_from_slice(&self.to_le_bytes());
            }

            fn read_le(bytes: &[u8]) -> Self {
                <$ty>::from_le_bytes(bytes.try_into().expect("element byte width"))
            }
        }
    };
}

impl_element!(f32, DType::F32);
impl_element!(u8, DType::U8);
impl_element!(u16, DType::U16);
impl_element!(i8, DType::I8);
impl_element!(i32, DType::I32);

/// A dense C×H×W feature map.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T: Element> {
    dims: (usize, usize, usize),
    data: Vec<T>,
}

impl<T: Element> Tensor<T> {
    /// Build a tensor from row-major data. Fails unless `data.len() == C·H·W`
    /// and all dims are positive.
    pub fn new(dims: (usize, usize, usize), data: Vec<T>) -> Result<Self> {
        let (c, h, w) = dims;
        if c == 0 || h == 0 || w == 0 {
            return Err(Error::shape(format!("dims must be positive, got {c}x{h}x{w}")));
        }
        let expect = c
            .checked_mul(h)
            .and_then(|ch| ch.checked_mul(w))
            .ok_or_else(|| Error::shape("dims overflow"))?;
        if data.len() != expect {
            return Err(Error::shape(format!(
                "data length {} does not match {c}x{h}x{w} = {expect}",
                data.len()
            )));
        }
        Ok(Tensor { dims, data })
    }

    /// Tensor filled with a constant value.
    pub fn filled(dims: (usize, usize, usize), value: T) -> Result<Self> {
        let n = dims.0 * dims.1 * dims.2;
        Tensor::new(dims, vec![value; n])
    }

    /// Tensor built element-wise from `(c, h, w)` coordinates.
    pub fn from_fn(dims: (usize, usize, usize), mut f: impl FnMut(usize, usize, usize) -> T) -> Result<Self> {
        let (c, h, w) = dims;
        let mut data = Vec::with_capacity(c * h * w);
        for ci in 0..c {
            for hi in 0..h {
                for wi in 0..w {
                    data.push(f(ci, hi, wi));
                }
            }
        }
        Tensor::new(dims, data)
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn channels(&self) -> usize {
        self.dims.0
    }

    pub fn height(&self) -> usize {
        self.dims.1
    }

    pub fn width(&self) -> usize {
        self.dims.2
    }

    /// Total element count C·H·W.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dtype(&self) -> DType {
        T::DTYPE
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, c: usize, h: usize, w: usize) -> T {
        self.data[(c * self.dims.1 + h) * self.dims.2 + w]
    }

    /// Contiguous H·W slice of one channel.
    pub fn channel(&self, c: usize) -> &[T] {
        let plane = self.dims.1 * self.dims.2;
        &self.data[c * plane..(c + 1) * plane]
    }

    /// Same-shape tensor with every element mapped through `f`.
    pub fn map<U: Element>(&self, f: impl Fn(T) -> U) -> Tensor<U> {
        Tensor {
            dims: self.dims,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// A 4-D O×I×kh×kw convolution weight tensor (output channel outermost).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTensor<T: Element> {
    dims: (usize, usize, usize, usize),
    data: Vec<T>,
}

impl<T: Element> WeightTensor<T> {
    pub fn new(dims: (usize, usize, usize, usize), data: Vec<T>) -> Result<Self> {
        let (o, i, kh, kw) = dims;
        if o == 0 || i == 0 || kh == 0 || kw == 0 {
            return Err(Error::shape(format!("weight dims must be positive, got {o}x{i}x{kh}x{kw}")));
        }
        let expect = o * i * kh * kw;
        if data.len() != expect {
            return Err(Error::shape(format!(
                "weight data length {} does not match {o}x{i}x{kh}x{kw} = {expect}",
                data.len()
            )));
        }
        Ok(WeightTensor { dims, data })
    }

    pub fn dims(&self) -> (usize, usize, usize, usize) {
        self.dims
    }

    pub fn output_channels(&self) -> usize {
        self.dims.0
    }

    /// Elements feeding one output channel: I·kh·kw.
    pub fn filter_len(&self) -> usize {
        self.dims.1 * self.dims.2 * self.dims.3
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    /// Contiguous I·kh·kw slice of one output filter.
    pub fn filter(&self, o: usize) -> &[T] {
        let len = self.filter_len();
        &self.data[o * len..(o + 1) * len]
    }

    #[inline]
    pub fn get(&self, o: usize, i: usize, kh: usize, kw: usize) -> T {
        let (_, ic, khs, kws) = self.dims;
        self.data[((o * ic + i) * khs + kh) * kws + kw]
    }
}

/// A tensor read from disk, carrying whichever element type the file declared.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyTensor {
    F32(Tensor<f32>),
    U8(Tensor<u8>),
    U16(Tensor<u16>),
    I8(Tensor<i8>),
    I32(Tensor<i32>),
}

impl AnyTensor {
    pub fn dtype(&self) -> DType {
        match self {
            AnyTensor::F32(_) => DType::F32,
            AnyTensor::U8(_) => DType::U8,
            AnyTensor::U16(_) => DType::U16,
            AnyTensor::I8(_) => DType::I8,
            AnyTensor::I32(_) => DType::I32,
        }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        match self {
            AnyTensor::F32(t) => t.dims(),
            AnyTensor::U8(t) => t.dims(),
            AnyTensor::U16(t) => t.dims(),
            AnyTensor::I8(t) => t.dims(),
            AnyTensor::I32(t) => t.dims(),
        }
    }

    /// The f32 tensor inside, or an `Unsupported` error naming the actual type.
    pub fn into_f32(self) -> Result<Tensor<f32>> {
        match self {
            AnyTensor::F32(t) => Ok(t),
            other => Err(Error::unsupported(format!(
                "expected f32 tensor, file holds {:?}",
                other.dtype()
            ))),
        }
    }
}
