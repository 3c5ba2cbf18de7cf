//! `.tns` — a minimal binary tensor container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! offset  size      field
//! 0       4         magic  b"TNS1"
//! 4       1         dtype  1 = f32, 2 = f64
//! 5       4         ndim   u32
//! 9       4·ndim    dims   u32 each
//! ...     prod·size payload, row-major, little-endian
//! ```
//!
//! Readers reject unknown magic or dtype codes and truncated payloads.

use crate::error::{io_err, Error, Result};
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"TNS1";
const DTYPE_F32: u8 = 1;
const DTYPE_F64: u8 = 2;

/// Tensor payload in either supported precision.
#[derive(Debug, Clone, PartialEq)]
pub enum TnsData {
    F32(Vec<f32>),
    F64(Vec<f64>),
}

impl TnsData {
    pub fn len(&self) -> usize {
        match self {
            TnsData::F32(v) => v.len(),
            TnsData::F64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// View as f64, converting f32 losslessly if needed.
    pub fn to_f64(&self) -> Vec<f64> {
        match self {
            TnsData::F32(v) => v.iter().map(|&x| x as f64).collect(),
            TnsData::F64(v) => v.clone(),
        }
    }
}

/// A dense row-major tensor with its dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Tns {
    pub dims: Vec<usize>,
    pub data: TnsData,
}

impl Tns {
    pub fn f64(dims: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        check_dims(&dims, values.len())?;
        Ok(Tns { dims, data: TnsData::F64(values) })
    }

    pub fn f32(dims: Vec<usize>, values: Vec<f32>) -> Result<Self> {
        check_dims(&dims, values.len())?;
        Ok(Tns { dims, data: TnsData::F32(values) })
    }
}

fn check_dims(dims: &[usize], len: usize) -> Result<()> {
    let prod: usize = dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or_else(|| {
        Error::ShapeMismatch(format!("dimension product overflows: {dims:?}"))
    })?;
    if prod != len {
        return Err(Error::ShapeMismatch(format!(
            "dims {dims:?} imply {prod} values, got {len}"
        )));
    }
    Ok(())
}

/// Encode to the container byte format.
pub fn encode(t: &Tns) -> Vec<u8> {
    let elem = match t.data {
        TnsData::F32(_) => 4,
        TnsData::F64(_) => 8,
    };
    let mut out = Vec::with_capacity(9 + 4 * t.dims.len() + elem * t.data.len());
    out.extend_from_slice(MAGIC);
    out.push(match t.data {
        TnsData::F32(_) => DTYPE_F32,
        TnsData::F64(_) => DTYPE_F64,
    });
    out.extend_from_slice(&(t.dims.len() as u32).to_le_bytes());
    for &d in &t.dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    match &t.data {
        TnsData::F32(v) => {
            for &x in v {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        TnsData::F64(v) => {
            for &x in v {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
    }
    out
}

/// Decode from the container byte format.
pub fn decode(bytes: &[u8], origin: &str) -> Result<Tns> {
    let fail = |reason: String| Error::Format { path: origin.to_string(), reason };
    if bytes.len() < 9 {
        return Err(fail(format!("too short: {} bytes", bytes.len())));
    }
    if &bytes[0..4] != MAGIC {
        return Err(fail(format!("bad magic {:?}", &bytes[0..4])));
    }
    let dtype = bytes[4];
    let ndim = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let header = 9 + 4 * ndim;
    if bytes.len() < header {
        return Err(fail("truncated dimension list".into()));
    }
    let mut dims = Vec::with_capacity(ndim);
    for i in 0..ndim {
        let off = 9 + 4 * i;
        dims.push(u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as usize);
    }
    let count: usize = dims
        .iter()
        .try_fold(1usize, |a, &d| a.checked_mul(d))
        .ok_or_else(|| fail(format!("dimension product overflows: {dims:?}")))?;
    let payload = &bytes[header..];
    match dtype {
        DTYPE_F32 => {
            if payload.len() != 4 * count {
                return Err(fail(format!(
                    "payload {} bytes, expected {} (f32 × {count})",
                    payload.len(),
                    4 * count
                )));
            }
            let v = payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            Ok(Tns { dims, data: TnsData::F32(v) })
        }
        DTYPE_F64 => {
            if payload.len() != 8 * count {
                return Err(fail(format!(
                    "payload {} bytes, expected {} (f64 × {count})",
                    payload.len(),
                    8 * count
                )));
            }
            let v = payload
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            Ok(Tns { dims, data: TnsData::F64(v) })
        }
        other => Err(fail(format!("unknown dtype code {other}"))),
    }
}

/// Write a tensor file.
pub fn write_file(path: &Path, t: &Tns) -> Result<()> {
    let bytes = encode(t);
    let mut f = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
    f.write_all(&bytes).map_err(|e| io_err(path, e))
}

/// Read a tensor file.
pub fn read_file(path: &Path) -> Result<Tns> {
    let mut f = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut bytes = Vec::new();
    f.read_to_end(&mut bytes).map_err(|e| io_err(path, e))?;
    decode(&bytes, &path.display().to_string())
}
