use half::{bf16, f16};
use serde::{Deserialize, Serialize};

use super::{CheckpointError, Tensor};

/// Element type of a stored tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DType {
    F32,
    F16,
    BF16,
}

impl DType {
    pub fn element_size(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::F16 | DType::BF16 => 2,
        }
    }

    /// Container header spelling ("F32", "F16", "BF16").
    pub fn as_str(self) -> &'static str {
        match self {
            DType::F32 => "F32",
            DType::F16 => "F16",
            DType::BF16 => "BF16",
        }
    }

    pub fn from_header_str(s: &str) -> Result<Self, CheckpointError> {
        match s {
            "F32" => Ok(DType::F32),
            "F16" => Ok(DType::F16),
            "BF16" => Ok(DType::BF16),
            other => Err(CheckpointError::MalformedHeader {
                detail: format!("unknown dtype {other:?}"),
            }),
        }
    }
}

impl std::fmt::Display for DType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

// Canonical quiet NaN bit patterns per target type. All NaN inputs collapse
// to these so converted containers are byte-deterministic.
const CANONICAL_NAN_F32: u32 = 0x7FC0_0000;
const CANONICAL_NAN_F16: u16 = 0x7E00;
const CANONICAL_NAN_BF16: u16 = 0x7FC0;

#[inline]
pub fn f32_to_bf16_bits(x: f32) -> u16 {
    if x.is_nan() {
        return CANONICAL_NAN_BF16;
    }
    bf16::from_f32(x).to_bits()
}

#[inline]
pub fn bf16_bits_to_f32(bits: u16) -> f32 {
    bf16::from_bits(bits).to_f32()
}

#[inline]
pub fn f32_to_f16_bits(x: f32) -> u16 {
    if x.is_nan() {
        return CANONICAL_NAN_F16;
    }
    f16::from_f32(x).to_bits()
}

#[inline]
pub fn f16_bits_to_f32(bits: u16) -> f32 {
    f16::from_bits(bits).to_f32()
}

/// Decode a raw little-endian element buffer into f32 working precision.
pub fn decode_f32(dtype: DType, data: &[u8]) -> Vec<f32> {
    match dtype {
        DType::F32 => data
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect(),
        DType::F16 => data
            .chunks_exact(2)
            .map(|b| f16_bits_to_f32(u16::from_le_bytes([b[0], b[1]])))
            .collect(),
        DType::BF16 => data
            .chunks_exact(2)
            .map(|b| bf16_bits_to_f32(u16::from_le_bytes([b[0], b[1]])))
            .collect(),
    }
}

/// Encode f32 values into the little-endian buffer of `dtype`, rounding to
/// nearest-even for the 16-bit targets.
pub fn encode_f32(dtype: DType, values: &[f32]) -> Vec<u8> {
    match dtype {
        DType::F32 => {
            let mut out = Vec::with_capacity(values.len() * 4);
            for v in values {
                let v = if v.is_nan() {
                    f32::from_bits(CANONICAL_NAN_F32)
                } else {
                    *v
                };
                out.extend_from_slice(&v.to_le_bytes());
            }
            out
        }
        DType::F16 => {
            let mut out = Vec::with_capacity(values.len() * 2);
            for v in values {
                out.extend_from_slice(&f32_to_f16_bits(*v).to_le_bytes());
            }
            out
        }
        DType::BF16 => {
            let mut out = Vec::with_capacity(values.len() * 2);
            for v in values {
                out.extend_from_slice(&f32_to_bf16_bits(*v).to_le_bytes());
            }
            out
        }
    }
}

/// Convert a tensor to `target`, preserving shape and element count.
///
/// Same-dtype conversion returns the input bit-for-bit. Narrowing rounds to
/// nearest-even; widening to F32 is exact. NaNs become the canonical quiet
/// NaN of the target.
pub fn convert_dtype(t: &Tensor, target: DType) -> Tensor {
    if t.spec.dtype == target {
        return t.clone();
    }
    let values = decode_f32(t.spec.dtype, &t.data);
    let data = encode_f32(target, &values);
    Tensor::new(&t.spec.name, target, t.spec.shape.clone(), data)
}
