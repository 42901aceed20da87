//! IDX container parsing (the MNIST distribution format).
//!
//! Layout: two zero bytes, a type code (0x08 = unsigned byte), the number of
//! dimensions, one big-endian u32 per dimension, then the payload in row-major
//! order. Gzip-compressed files are detected by their magic and inflated first.

use std::fs;
use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;

use crate::error::{RbmError, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

/// Greyscale images as stored in the file, `count x rows x cols` bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl RawImages {
    pub fn pixels_per_image(&self) -> usize {
        self.rows * self.cols
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let n = self.pixels_per_image();
        &self.pixels[i * n..(i + 1) * n]
    }

    /// The first `n` images (or all, if fewer).
    pub fn truncate(&mut self, n: usize) {
        self.count = self.count.min(n);
        self.pixels.truncate(self.count * self.pixels_per_image());
    }
}

fn idx_error(offset: usize, message: impl Into<String>) -> RbmError {
    RbmError::Idx {
        offset: offset as u64,
        message: message.into(),
    }
}

fn read_u32_be(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| idx_error(offset, "header truncated"))
}

/// Validates the header and returns `(dims, payload)`.
fn parse_header(bytes: &[u8], magic: u32) -> Result<(Vec<usize>, &[u8])> {
    let found = read_u32_be(bytes, 0)?;
    if found != magic {
        return Err(idx_error(
            0,
            format!("bad magic {found:#010x}, expected {magic:#010x}"),
        ));
    }
    let ndims = (magic & 0xff) as usize;
    let mut dims = Vec::with_capacity(ndims);
    let mut total: usize = 1;
    for d in 0..ndims {
        let offset = 4 + 4 * d;
        let dim = read_u32_be(bytes, offset)? as usize;
        total = total
            .checked_mul(dim)
            .ok_or_else(|| idx_error(offset, "dimension product overflows"))?;
        dims.push(dim);
    }
    let header = 4 + 4 * ndims;
    let payload = &bytes[header..];
    if payload.len() < total {
        return Err(idx_error(
            bytes.len(),
            format!(
                "payload truncated: expected {total} bytes after the header, found {}",
                payload.len()
            ),
        ));
    }
    if payload.len() > total {
        return Err(idx_error(
            header + total,
            format!("{} trailing bytes after payload", payload.len() - total),
        ));
    }
    Ok((dims, payload))
}

pub fn parse_images(bytes: &[u8]) -> Result<RawImages> {
    let (dims, payload) = parse_header(bytes, IMAGES_MAGIC)?;
    Ok(RawImages {
        count: dims[0],
        rows: dims[1],
        cols: dims[2],
        pixels: payload.to_vec(),
    })
}

pub fn parse_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let (_, payload) = parse_header(bytes, LABELS_MAGIC)?;
    Ok(payload.to_vec())
}

/// Reads a file, inflating it if it is gzip-compressed.
pub fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path).map_err(|e| RbmError::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| RbmError::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

pub fn load_images(path: &Path) -> Result<RawImages> {
    parse_images(&read_maybe_gz(path)?)
}

pub fn load_labels(path: &Path) -> Result<Vec<u8>> {
    parse_labels(&read_maybe_gz(path)?)
}
