use std::path::Path;

use crate::error::{Result, SnnError};

pub const MAGIC_IMAGES: u32 = 0x0000_0803;
pub const MAGIC_LABELS: u32 = 0x0000_0801;

/// An unsigned-byte IDX tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxTensor {
    pub dims: Vec<usize>,
    pub data: Vec<u8>,
}

impl IdxTensor {
    pub fn magic(&self) -> u32 {
        0x0800 | self.dims.len() as u32
    }
}

pub fn read_idx(path: &Path) -> Result<IdxTensor> {
    let bytes = std::fs::read(path).map_err(|e| SnnError::io(path, e))?;
    parse_idx(&bytes, path)
}

/// Parses an IDX byte buffer. `path` only labels errors.
pub fn parse_idx(bytes: &[u8], path: &Path) -> Result<IdxTensor> {
    let err = |field: &'static str, detail: String| SnnError::Parse {
        path: path.to_path_buf(),
        field,
        detail,
    };
    if bytes.len() < 4 {
        return Err(err("magic", format!("file has only {} bytes", bytes.len())));
    }
    let magic = u32::from_be_bytes(bytes[0..4].try_into().unwrap());
    let ndim = match magic {
        MAGIC_IMAGES => 3,
        MAGIC_LABELS => 1,
        other => return Err(err("magic", format!("unsupported magic number {other:#010x}"))),
    };
    let header = 4 + 4 * ndim;
    if bytes.len() < header {
        return Err(err("dimensions", format!("header needs {header} bytes, file has {}", bytes.len())));
    }
    let dims: Vec<usize> = (0..ndim)
        .map(|d| u32::from_be_bytes(bytes[4 + 4 * d..8 + 4 * d].try_into().unwrap()) as usize)
        .collect();
    if ndim == 3 && (dims[1] != crate::IMAGE_SIDE || dims[2] != crate::IMAGE_SIDE) {
        return Err(err(
            "dimensions",
            format!("expected {0}x{0} images, found {1}x{2}", crate::IMAGE_SIDE, dims[1], dims[2]),
        ));
    }
    let expected: usize = dims.iter().product();
    let payload = &bytes[header..];
    if payload.len() != expected {
        let what = if payload.len() < expected { "truncated" } else { "has trailing bytes" };
        return Err(err(
            "payload",
            format!("{what}: expected {expected} bytes after the header, found {}", payload.len()),
        ));
    }
    Ok(IdxTensor {
        dims,
        data: payload.to_vec(),
    })
}

/// Serialises a tensor in IDX format.
pub fn encode_idx(tensor: &IdxTensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + 4 * tensor.dims.len() + tensor.data.len());
    out.extend_from_slice(&tensor.magic().to_be_bytes());
    for &d in &tensor.dims {
        out.extend_from_slice(&(d as u32).to_be_bytes());
    }
    out.extend_from_slice(&tensor.data);
    out
}

pub fn write_idx(path: &Path, tensor: &IdxTensor) -> Result<()> {
    std::fs::write(path, encode_idx(tensor)).map_err(|e| SnnError::io(path, e))
}
