//! Binary PPM (`P6`) and PGM (`P5`) files with maxval 255.

use std::fs;
use std::path::Path;

use super::{BinaryMask, PixelGrid, ScalarField};
use crate::error::{Error, Result};

#[inline]
pub(crate) fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

fn write_pnm(path: &Path, magic: &str, width: usize, height: usize, bytes: &[u8]) -> Result<()> {
    let mut buf = format!("{magic}\n{width} {height}\n255\n").into_bytes();
    buf.extend_from_slice(bytes);
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Writes a 3-channel grid as `P6`. Values are clamped to `[0, 1]`.
pub fn write_image(grid: &PixelGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if grid.channels() != 3 {
        return Err(Error::invalid(
            "grid",
            format!("color output needs 3 channels, got {}", grid.channels()),
        ));
    }
    let bytes: Vec<u8> = grid.data().iter().map(|&v| quantize(v)).collect();
    write_pnm(path, "P6", grid.width(), grid.height(), &bytes)
}

/// Writes a mask as `P5` with set pixels at 255.
pub fn write_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    let bytes: Vec<u8> = mask.data().iter().map(|&v| v * 255).collect();
    write_pnm(path.as_ref(), "P5", mask.width(), mask.height(), &bytes)
}

/// Writes a scalar field as a `P5` grayscale heatmap, clamping to `[0, 1]`.
pub fn write_field(field: &ScalarField, path: impl AsRef<Path>) -> Result<()> {
    let bytes: Vec<u8> = field.data().iter().map(|&v| quantize(v)).collect();
    write_pnm(path.as_ref(), "P5", field.width(), field.height(), &bytes)
}

struct HeaderReader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderReader<'_> {
    fn malformed(&self, reason: impl Into<String>) -> Error {
        Error::MalformedImage {
            path: self.path.to_path_buf(),
            offset: self.pos,
            reason: reason.into(),
        }
    }

    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.malformed(format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| self.malformed(format!("{what} out of range")))
    }
}

/// Reads a `P6` file into a 3-channel grid or a `P5` file into a 1-channel grid,
/// with values `byte / 255`.
pub fn read_image(path: impl AsRef<Path>) -> Result<PixelGrid> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut rd = HeaderReader {
        path,
        bytes: &bytes,
        pos: 0,
    };
    let channels = match bytes.get(..2) {
        Some(b"P6") => 3,
        Some(b"P5") => 1,
        _ => return Err(rd.malformed("expected magic P5 or P6")),
    };
    rd.pos = 2;
    let width = rd.number("width")?;
    let height = rd.number("height")?;
    let maxval = rd.number("maxval")?;
    if maxval != 255 {
        return Err(rd.malformed(format!("unsupported maxval {maxval}")));
    }
    if width == 0 || height == 0 {
        return Err(rd.malformed("zero dimension"));
    }
    match bytes.get(rd.pos) {
        Some(b) if b.is_ascii_whitespace() => rd.pos += 1,
        _ => return Err(rd.malformed("expected single whitespace before raster")),
    }
    let need = width * height * channels;
    let raster = &bytes[rd.pos..];
    if raster.len() != need {
        return Err(rd.malformed(format!(
            "raster has {} bytes, expected {need}",
            raster.len()
        )));
    }
    let data = raster.iter().map(|&b| f64::from(b) / 255.0).collect();
    PixelGrid::from_vec(height, width, channels, data)
}
