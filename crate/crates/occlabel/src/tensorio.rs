//! `VXT1` dense tensor files.
//!
//! Layout, all little-endian:
//!
//! ```text
//! "VXT1" | dtype: u8 (0 = u8, 1 = f32, 2 = u64) | ndim: u8 | dims: ndim × u32 | payload
//! ```
//!
//! The payload is row-major and exactly `product(dims) × element size` bytes.

use std::fs;
use std::path::Path;

use occlabel_core::losses::LogitsGrid;
use occlabel_core::visibility::CameraMask;
use occlabel_core::voxelizer::{GridSpec, LabelGrid};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"VXT1";

/// Element storage of a tensor.
#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    U8(Vec<u8>),
    F32(Vec<f32>),
    U64(Vec<u64>),
}

impl TensorData {
    pub fn dtype_code(&self) -> u8 {
        match self {
            TensorData::U8(_) => 0,
            TensorData::F32(_) => 1,
            TensorData::U64(_) => 2,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            TensorData::U8(v) => v.len(),
            TensorData::F32(v) => v.len(),
            TensorData::U64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn element_size(dtype: u8) -> Result<usize> {
    match dtype {
        0 => Ok(1),
        1 => Ok(4),
        2 => Ok(8),
        d => Err(Error::UnsupportedDtype(d)),
    }
}

/// A dense row-major tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<u32>,
    data: TensorData,
}

impl Tensor {
    /// Checks that every dim is at least 1 and that the element count matches.
    pub fn new(dims: Vec<u32>, data: TensorData) -> Result<Self> {
        if dims.is_empty() || dims.len() > u8::MAX as usize {
            return Err(Error::SizeMismatch(format!("{} dims", dims.len())));
        }
        if dims.contains(&0) {
            return Err(Error::SizeMismatch(format!("zero dim in {dims:?}")));
        }
        let count = element_count(&dims)?;
        if count != data.len() {
            return Err(Error::SizeMismatch(format!(
                "dims {dims:?} hold {count} elements, data has {}",
                data.len()
            )));
        }
        Ok(Tensor { dims, data })
    }

    pub fn dims(&self) -> &[u32] {
        &self.dims
    }

    pub fn data(&self) -> &TensorData {
        &self.data
    }

    pub fn into_data(self) -> TensorData {
        self.data
    }

    /// Serialized bytes.
    pub fn encode(&self) -> Vec<u8> {
        let n = self.data.len();
        let mut out = Vec::with_capacity(6 + 4 * self.dims.len() + n * 8);
        out.extend_from_slice(MAGIC);
        out.push(self.data.dtype_code());
        out.push(self.dims.len() as u8);
        for d in &self.dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
        match &self.data {
            TensorData::U8(v) => out.extend_from_slice(v),
            TensorData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            TensorData::U64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        }
        out
    }

    /// Parses serialized bytes; the buffer must hold exactly one tensor.
    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return Err(Error::BadMagic);
        }
        if bytes.len() < 6 {
            return Err(Error::Truncated);
        }
        let (dtype, ndim) = (bytes[4], bytes[5] as usize);
        let size = element_size(dtype)?;
        let header = 6 + 4 * ndim;
        if bytes.len() < header {
            return Err(Error::Truncated);
        }
        let dims: Vec<u32> = bytes[6..header]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if ndim == 0 || dims.contains(&0) {
            return Err(Error::SizeMismatch(format!("invalid dims {dims:?}")));
        }
        let count = element_count(&dims)?;
        let payload = &bytes[header..];
        let expected = count
            .checked_mul(size)
            .ok_or_else(|| Error::SizeMismatch(format!("dims {dims:?} overflow")))?;
        if payload.len() < expected {
            return Err(Error::Truncated);
        }
        if payload.len() > expected {
            return Err(Error::SizeMismatch(format!(
                "{} trailing bytes after payload",
                payload.len() - expected
            )));
        }
        let data = match dtype {
            0 => TensorData::U8(payload.to_vec()),
            1 => TensorData::F32(
                payload
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            ),
            _ => TensorData::U64(
                payload
                    .chunks_exact(8)
                    .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            ),
        };
        Ok(Tensor { dims, data })
    }
}

fn element_count(dims: &[u32]) -> Result<usize> {
    dims.iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d as usize))
        .ok_or_else(|| Error::SizeMismatch(format!("dims {dims:?} overflow")))
}

pub fn write_tensor(path: impl AsRef<Path>, tensor: &Tensor) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, tensor.encode()).map_err(|e| Error::io(path, e))
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Tensor::decode(&bytes)
}

fn dims3(spec: &GridSpec) -> Vec<u32> {
    spec.dims().iter().map(|&d| d as u32).collect()
}

fn expect_dims(tensor: &Tensor, want: &[u32], what: &str) -> Result<()> {
    if tensor.dims() != want {
        return Err(Error::Mismatch(format!(
            "{what} has dims {:?}, expected {want:?}",
            tensor.dims()
        )));
    }
    Ok(())
}

/// Label grid as a 3-D u8 tensor.
pub fn label_grid_tensor(grid: &LabelGrid) -> Tensor {
    Tensor::new(dims3(grid.spec()), TensorData::U8(grid.data().to_vec())).expect("grid dims are nonzero")
}

/// Reads a 3-D u8 tensor as a label grid over `spec`.
pub fn read_label_grid(path: impl AsRef<Path>, spec: &GridSpec) -> Result<LabelGrid> {
    let t = read_tensor(path)?;
    expect_dims(&t, &dims3(spec), "label grid")?;
    match t.into_data() {
        TensorData::U8(v) => Ok(LabelGrid::from_data(*spec, v)?),
        other => Err(Error::Mismatch(format!("label grid has dtype {}, expected u8", other.dtype_code()))),
    }
}

pub fn write_label_grid(path: impl AsRef<Path>, grid: &LabelGrid) -> Result<()> {
    write_tensor(path, &label_grid_tensor(grid))
}

/// Mask as a 3-D u8 tensor of 0/1.
pub fn write_mask(path: impl AsRef<Path>, mask: &CameraMask) -> Result<()> {
    let data = mask.data().iter().map(|&b| b as u8).collect();
    write_tensor(path, &Tensor::new(dims3(mask.spec()), TensorData::U8(data))?)
}

pub fn read_mask(path: impl AsRef<Path>, spec: &GridSpec) -> Result<CameraMask> {
    let t = read_tensor(path)?;
    expect_dims(&t, &dims3(spec), "mask")?;
    match t.into_data() {
        TensorData::U8(v) => {
            if let Some(bad) = v.iter().find(|&&b| b > 1) {
                return Err(Error::Mismatch(format!("mask value {bad}, expected 0 or 1")));
            }
            Ok(CameraMask::from_data(*spec, v.into_iter().map(|b| b == 1).collect())?)
        }
        other => Err(Error::Mismatch(format!("mask has dtype {}, expected u8", other.dtype_code()))),
    }
}

/// Logits as a 4-D f32 tensor `[C, Nx, Ny, Nz]`.
pub fn read_logits(path: impl AsRef<Path>) -> Result<LogitsGrid> {
    let t = read_tensor(path)?;
    if t.dims().len() != 4 {
        return Err(Error::Mismatch(format!("logits need 4 dims, got {:?}", t.dims())));
    }
    let d: Vec<usize> = t.dims().iter().map(|&x| x as usize).collect();
    match t.into_data() {
        TensorData::F32(v) => Ok(LogitsGrid::new(
            d[0],
            [d[1], d[2], d[3]],
            v.into_iter().map(f64::from).collect(),
        )?),
        other => Err(Error::Mismatch(format!("logits have dtype {}, expected f32", other.dtype_code()))),
    }
}

pub fn logits_tensor(logits: &LogitsGrid) -> Tensor {
    let [x, y, z] = logits.dims();
    let dims = vec![logits.classes() as u32, x as u32, y as u32, z as u32];
    Tensor::new(dims, TensorData::F32(logits.data().iter().map(|&v| v as f32).collect())).expect("logits dims")
}

/// Image as a 2-D tensor `[H, W]`.
pub fn image_dims(t: &Tensor) -> Result<(u32, u32)> {
    match t.dims() {
        &[h, w] => Ok((w, h)),
        d => Err(Error::Mismatch(format!("image needs 2 dims, got {d:?}"))),
    }
}
