//! Bit-exact activation-map compression for CNN inference.
//!
//! Feature maps are channel-transformed, uniformly quantized and entropy
//! coded into a self-describing container, cutting the bytes that cross the
//! DRAM boundary. Two coder families are provided: symmetric exponential
//! Golomb against per-channel reference numbers (with an exact closed-form
//! length usable as a training penalty) and rANS driven by a data-dependent
//! channel-wise Gaussian model. Reference int8 and n:m-sparse convolution
//! kernels plus bandwidth/energy accounting round out the inference-side
//! story.
//!
//! ```
//! use actcodec::pipeline::{compress, decompress, PipelineConfig};
//! use actcodec::tensor::Tensor;
//!
//! let x = Tensor::from_fn((4, 16, 16), |c, h, w| (c + h + w) as f32 * 0.1).unwrap();
//! let cfg = PipelineConfig::rans_gaussian(8);
//! let packed = compress(&x, &cfg).unwrap();
//! let restored = decompress(&packed, &cfg).unwrap();
//! assert_eq!(restored.dims(), x.dims());
//! ```

pub mod error;
pub mod gaussian;
pub mod golomb;
pub mod kernels;
pub mod pipeline;
pub mod quantize;
pub mod rans;
pub mod tensor;
pub mod transform;

pub use error::{Error, Result};
pub use tensor::{AnyTensor, DType, Tensor, WeightTensor};
