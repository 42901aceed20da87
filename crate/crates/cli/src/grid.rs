//! Binary PGM (P5) tile grids.
//!
//! Tiles are laid out row-major with a 1 px border of value 128 around and
//! between them.

use anyhow::{ensure, Result};

pub const PAD: usize = 1;
pub const PAD_VALUE: u8 = 128;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TileGrid {
    pub rows: usize,
    pub cols: usize,
    pub tile_height: usize,
    pub tile_width: usize,
    tiles: Vec<Vec<u8>>,
}

impl TileGrid {
    pub fn new(rows: usize, cols: usize, tile_height: usize, tile_width: usize) -> Self {
        TileGrid {
            rows,
            cols,
            tile_height,
            tile_width,
            tiles: Vec::with_capacity(rows * cols),
        }
    }

    pub fn push(&mut self, tile: Vec<u8>) -> Result<()> {
        ensure!(
            tile.len() == self.tile_height * self.tile_width,
            "tile has {} pixels, expected {}",
            tile.len(),
            self.tile_height * self.tile_width
        );
        ensure!(self.tiles.len() < self.rows * self.cols, "grid is full");
        self.tiles.push(tile);
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.cols * self.tile_width + (self.cols + 1) * PAD
    }

    pub fn height(&self) -> usize {
        self.rows * self.tile_height + (self.rows + 1) * PAD
    }

    /// Raster of the grid; unfilled slots stay at the padding value.
    pub fn pixels(&self) -> Vec<u8> {
        let width = self.width();
        let mut out = vec![PAD_VALUE; width * self.height()];
        for (k, tile) in self.tiles.iter().enumerate() {
            let (r, c) = (k / self.cols, k % self.cols);
            let top = PAD + r * (self.tile_height + PAD);
            let left = PAD + c * (self.tile_width + PAD);
            for y in 0..self.tile_height {
                let dst = (top + y) * width + left;
                out[dst..dst + self.tile_width]
                    .copy_from_slice(&tile[y * self.tile_width..(y + 1) * self.tile_width]);
            }
        }
        out
    }

    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width(), self.height()).into_bytes();
        out.extend(self.pixels());
        out
    }
}

/// -1 -> 0, +1 -> 255.
pub fn spin_tile(spins: impl IntoIterator<Item = i8>) -> Vec<u8> {
    spins
        .into_iter()
        .map(|s| if s > 0 { 255 } else { 0 })
        .collect()
}

/// Linear rescale of `values` onto 0..=255; a constant tile becomes mid-grey.
pub fn rescaled_tile(values: impl IntoIterator<Item = f64>) -> Vec<u8> {
    let values: Vec<f64> = values.into_iter().collect();
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if range.is_nan() || range <= 0.0 {
        return vec![128; values.len()];
    }
    values
        .iter()
        .map(|&x| ((x - lo) / range * 255.0).round() as u8)
        .collect()
}

/// Parses the header of a P5 file, returning `(width, height, pixels)`.
pub fn parse_pgm(bytes: &[u8]) -> Result<(usize, usize, &[u8])> {
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        ensure!(start < pos, "truncated PGM header");
        fields.push(std::str::from_utf8(&bytes[start..pos])?.to_string());
    }
    ensure!(fields[0] == "P5", "not a binary PGM");
    let width: usize = fields[1].parse()?;
    let height: usize = fields[2].parse()?;
    let pixels = &bytes[pos + 1..];
    ensure!(pixels.len() == width * height, "PGM payload size mismatch");
    Ok((width, height, pixels))
}
