//! Binary tensor interchange format.
//!
//! Layout (all integers little-endian):
//!
//! | bytes        | field                                                   |
//! |--------------|---------------------------------------------------------|
//! | 4            | magic `b"OTFS"`                                         |
//! | 1            | version, currently `1`                                  |
//! | 1            | dtype: 0 f32, 1 f64, 2 complex f32, 3 complex f64       |
//! | 1            | rank                                                    |
//! | 4 × rank     | dims as `u32`                                           |
//! | rest         | row-major payload; complex values are interleaved re/im |
//!
//! The payload must be exactly `product(dims) × element size` bytes.

use std::fs;
use std::path::Path;

use num_complex::{Complex32, Complex64};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"OTFS";
pub const VERSION: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum DType {
    F32 = 0,
    F64 = 1,
    C32 = 2,
    C64 = 3,
}

impl DType {
    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(DType::F32),
            1 => Ok(DType::F64),
            2 => Ok(DType::C32),
            3 => Ok(DType::C64),
            other => Err(Error::Format(format!("unknown dtype code {other}"))),
        }
    }

    /// Bytes per element.
    pub fn size(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::F64 | DType::C32 => 8,
            DType::C64 => 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    F64(Vec<f64>),
    C32(Vec<Complex32>),
    C64(Vec<Complex64>),
}

impl TensorData {
    pub fn dtype(&self) -> DType {
        match self {
            TensorData::F32(_) => DType::F32,
            TensorData::F64(_) => DType::F64,
            TensorData::C32(_) => DType::C32,
            TensorData::C64(_) => DType::C64,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            TensorData::F32(v) => v.len(),
            TensorData::F64(v) => v.len(),
            TensorData::C32(v) => v.len(),
            TensorData::C64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A dense row-major tensor with its shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: TensorData,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: TensorData) -> Result<Self> {
        if dims.is_empty() || dims.len() > u8::MAX as usize {
            return Err(Error::Dimension(format!("rank {} not supported", dims.len())));
        }
        if dims.iter().any(|&d| d == 0 || d > u32::MAX as usize) {
            return Err(Error::Dimension(format!("dims {dims:?} must be nonzero u32 values")));
        }
        let count: usize = dims.iter().product();
        if count != data.len() {
            return Err(Error::Dimension(format!(
                "dims {dims:?} hold {count} values, data has {}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn from_f64(dims: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        Self::new(dims, TensorData::F64(values))
    }

    pub fn from_c64(dims: Vec<usize>, values: Vec<Complex64>) -> Result<Self> {
        Self::new(dims, TensorData::C64(values))
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &TensorData {
        &self.data
    }

    pub fn dtype(&self) -> DType {
        self.data.dtype()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Real payload widened to `f64`. Complex tensors are rejected.
    pub fn to_f64(&self) -> Result<Vec<f64>> {
        match &self.data {
            TensorData::F32(v) => Ok(v.iter().map(|&x| x as f64).collect()),
            TensorData::F64(v) => Ok(v.clone()),
            _ => Err(Error::Format("expected a real-valued tensor".into())),
        }
    }

    /// Complex payload widened to `Complex64`; real tensors get zero imaginary parts.
    pub fn to_c64(&self) -> Vec<Complex64> {
        match &self.data {
            TensorData::F32(v) => v.iter().map(|&x| Complex64::new(x as f64, 0.0)).collect(),
            TensorData::F64(v) => v.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
            TensorData::C32(v) => v.iter().map(|z| Complex64::new(z.re as f64, z.im as f64)).collect(),
            TensorData::C64(v) => v.clone(),
        }
    }

    /// Serializes header and payload.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(7 + 4 * self.dims.len() + self.len() * self.dtype().size());
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.push(self.dtype() as u8);
        out.push(self.dims.len() as u8);
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        match &self.data {
            TensorData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            TensorData::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            TensorData::C32(v) => v.iter().for_each(|z| {
                out.extend_from_slice(&z.re.to_le_bytes());
                out.extend_from_slice(&z.im.to_le_bytes());
            }),
            TensorData::C64(v) => v.iter().for_each(|z| {
                out.extend_from_slice(&z.re.to_le_bytes());
                out.extend_from_slice(&z.im.to_le_bytes());
            }),
        }
        out
    }

    /// Parses a complete tensor file image.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 7 {
            return Err(Error::Format(format!("header needs 7 bytes, file has {}", bytes.len())));
        }
        if &bytes[..4] != MAGIC {
            return Err(Error::Format(format!("bad magic {:?}", &bytes[..4])));
        }
        if bytes[4] != VERSION {
            return Err(Error::Format(format!("unsupported version {}", bytes[4])));
        }
        let dtype = DType::from_code(bytes[5])?;
        let rank = bytes[6] as usize;
        if rank == 0 {
            return Err(Error::Format("rank must be at least 1".into()));
        }
        let header_len = 7 + 4 * rank;
        if bytes.len() < header_len {
            return Err(Error::Format(format!("header truncated: {rank} dims announced")));
        }
        let dims: Vec<usize> = bytes[7..header_len]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()) as usize)
            .collect();
        if dims.contains(&0) {
            return Err(Error::Format(format!("zero-sized dimension in {dims:?}")));
        }
        let count = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::Format(format!("dims {dims:?} overflow")))?;
        let expected = count
            .checked_mul(dtype.size())
            .ok_or_else(|| Error::Format(format!("dims {dims:?} overflow")))?;
        let payload = &bytes[header_len..];
        if payload.len() < expected {
            return Err(Error::Truncation {
                expected,
                found: payload.len(),
            });
        }
        if payload.len() > expected {
            return Err(Error::Format(format!(
                "{} trailing bytes after payload",
                payload.len() - expected
            )));
        }
        let data = match dtype {
            DType::F32 => TensorData::F32(payload.chunks_exact(4).map(le_f32).collect()),
            DType::F64 => TensorData::F64(payload.chunks_exact(8).map(le_f64).collect()),
            DType::C32 => TensorData::C32(
                payload
                    .chunks_exact(8)
                    .map(|c| Complex32::new(le_f32(&c[..4]), le_f32(&c[4..])))
                    .collect(),
            ),
            DType::C64 => TensorData::C64(
                payload
                    .chunks_exact(16)
                    .map(|c| Complex64::new(le_f64(&c[..8]), le_f64(&c[8..])))
                    .collect(),
            ),
        };
        Tensor::new(dims, data)
    }
}

fn le_f32(c: &[u8]) -> f32 {
    f32::from_le_bytes(c.try_into().unwrap())
}

fn le_f64(c: &[u8]) -> f64 {
    f64::from_le_bytes(c.try_into().unwrap())
}

pub fn write_tensor(path: impl AsRef<Path>, tensor: &Tensor) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, tensor.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Tensor::from_bytes(&bytes)
}
