//! Header-indexed binary checkpoint containers.
//!
//! A container is `[8-byte LE u64 header_len][header_len bytes of UTF-8
//! JSON][data region]`. The header maps each tensor name to its dtype, shape,
//! and `[begin, end)` byte offsets relative to the start of the data region;
//! the optional `"__metadata__"` key carries free-form string pairs. Sharded
//! checkpoints add a JSON index file with a `"weight_map"` from tensor name
//! to shard filename.

mod dtype;
mod reader;
mod writer;

pub use dtype::{convert_dtype, decode_f32, encode_f32, DType};
pub use reader::CheckpointReader;
pub use writer::{write_checkpoint, CheckpointWriter, WriteSummary};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("malformed header: {detail}")]
    MalformedHeader { detail: String },
    #[error("tensors {first} and {second} have overlapping data offsets")]
    OffsetOverlap { first: String, second: String },
    #[error("truncated file: {detail}")]
    TruncatedFile { detail: String },
    #[error("unknown tensor {name:?}")]
    UnknownTensor { name: String },
    #[error("duplicate tensor name {name:?}")]
    DuplicateName { name: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Name, element type, shape, and data placement of one stored tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorSpec {
    pub name: String,
    pub dtype: DType,
    pub shape: Vec<usize>,
    /// Byte range `[begin, end)` relative to the start of the data region.
    pub data_offsets: (u64, u64),
}

impl TensorSpec {
    pub fn num_elements(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn byte_len(&self) -> usize {
        self.num_elements() * self.dtype.element_size()
    }

    fn check_span(&self) -> Result<(), CheckpointError> {
        let (begin, end) = self.data_offsets;
        if end < begin {
            return Err(CheckpointError::MalformedHeader {
                detail: format!("tensor {:?} has end offset before begin", self.name),
            });
        }
        if end - begin != self.byte_len() as u64 {
            return Err(CheckpointError::MalformedHeader {
                detail: format!(
                    "tensor {:?} spans {} bytes but dtype/shape imply {}",
                    self.name,
                    end - begin,
                    self.byte_len()
                ),
            });
        }
        Ok(())
    }
}

/// A tensor with its contiguous row-major little-endian element buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub spec: TensorSpec,
    pub data: Vec<u8>,
}

impl Tensor {
    /// Build a tensor from a raw element buffer. Panics if the buffer length
    /// does not match the dtype/shape byte span.
    pub fn new(name: &str, dtype: DType, shape: Vec<usize>, data: Vec<u8>) -> Self {
        let expected = shape.iter().product::<usize>() * dtype.element_size();
        assert_eq!(
            data.len(),
            expected,
            "tensor {name:?}: buffer is {} bytes, dtype/shape imply {expected}",
            data.len()
        );
        Tensor {
            spec: TensorSpec {
                name: name.to_string(),
                dtype,
                shape,
                data_offsets: (0, expected as u64),
            },
            data,
        }
    }

    /// F32 tensor from values.
    pub fn from_f32(name: &str, shape: Vec<usize>, values: &[f32]) -> Self {
        Tensor::new(name, DType::F32, shape, dtype::encode_f32(DType::F32, values))
    }

    /// Values from a given dtype, encoded with round-to-nearest-even.
    pub fn from_f32_as(name: &str, dtype: DType, shape: Vec<usize>, values: &[f32]) -> Self {
        assert_eq!(shape.iter().product::<usize>(), values.len());
        Tensor::new(name, dtype, shape, dtype::encode_f32(dtype, values))
    }

    /// Decode the buffer into f32 working precision.
    pub fn to_f32(&self) -> Vec<f32> {
        dtype::decode_f32(self.spec.dtype, &self.data)
    }
}
