//! Dense real-valued grids and the per-pixel primitives used by mask extraction.
//!
//! Every image, latent and noise prediction in the pipeline is a [`PixelGrid`]
//! in row-major `(row, col, channel)` order. Since the latent space is the pixel
//! space, no encoder or decoder sits between these grids and the image files.

mod filter;
mod pnm;

pub use filter::{gaussian_filter, gaussian_kernel};
pub use pnm::{read_image, write_field, write_image, write_mask};

use crate::error::{Error, Result};

/// An `height x width x channels` grid of 64-bit reals.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelGrid {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl PixelGrid {
    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self::filled(height, width, channels, 0.0)
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Self {
        assert!(height > 0 && width > 0 && channels > 0, "empty grid");
        Self {
            height,
            width,
            channels,
            data: vec![value; height * width * channels],
        }
    }

    /// Wraps `data`, checking its length and that every value is finite.
    pub fn from_vec(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::invalid("shape", "dimensions must be positive"));
        }
        if data.len() != height * width * channels {
            return Err(Error::ShapeMismatch {
                expected: format!("{} values", height * width * channels),
                actual: format!("{} values", data.len()),
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(
                "data",
                format!("non-finite value at index {i}"),
            ));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, ch: usize) -> f64 {
        self.data[(row * self.width + col) * self.channels + ch]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, ch: usize, value: f64) {
        self.data[(row * self.width + col) * self.channels + ch] = value;
    }

    /// The channel values of one pixel.
    pub fn pixel(&self, row: usize, col: usize) -> &[f64] {
        let start = (row * self.width + col) * self.channels;
        &self.data[start..start + self.channels]
    }

    pub fn set_pixel(&mut self, row: usize, col: usize, values: &[f64]) {
        let start = (row * self.width + col) * self.channels;
        self.data[start..start + self.channels].copy_from_slice(values);
    }

    pub fn ensure_same_shape(&self, other: &PixelGrid) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                expected: format!("{:?}", self.shape()),
                actual: format!("{:?}", other.shape()),
            });
        }
        Ok(())
    }

    /// Elementwise combination of two equally shaped grids.
    pub fn zip_map(&self, other: &PixelGrid, f: impl Fn(f64, f64) -> f64) -> Result<PixelGrid> {
        self.ensure_same_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(PixelGrid { data, ..*self })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> PixelGrid {
        PixelGrid {
            data: self.data.iter().map(|&v| f(v)).collect(),
            ..*self
        }
    }

    pub fn scale(&self, k: f64) -> PixelGrid {
        self.map(|v| k * v)
    }

    /// Flattened inner product.
    pub fn dot(&self, other: &PixelGrid) -> Result<f64> {
        self.ensure_same_shape(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn max_abs_diff(&self, other: &PixelGrid) -> Result<f64> {
        self.ensure_same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Per-pixel mean over channels of `|v|`.
    pub fn channel_mean_abs(&self) -> ScalarField {
        let c = self.channels as f64;
        let data = self
            .data
            .chunks_exact(self.channels)
            .map(|px| px.iter().map(|v| v.abs()).sum::<f64>() / c)
            .collect();
        ScalarField {
            height: self.height,
            width: self.width,
            data,
        }
    }

    /// Per-pixel blend `self * mask + other * (1 - mask)`.
    pub fn blend(&self, other: &PixelGrid, mask: &BinaryMask) -> Result<PixelGrid> {
        self.ensure_same_shape(other)?;
        mask.ensure_dims(self.height, self.width)?;
        let mut out = other.clone();
        for (i, px) in out.data.chunks_exact_mut(self.channels).enumerate() {
            if mask.data[i] == 1 {
                let start = i * self.channels;
                px.copy_from_slice(&self.data[start..start + self.channels]);
            }
        }
        Ok(out)
    }
}

/// One real value per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, 0.0)
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        assert!(height > 0 && width > 0, "empty field");
        Self {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    pub fn from_vec(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::invalid("shape", "dimensions must be positive"));
        }
        if data.len() != height * width {
            return Err(Error::ShapeMismatch {
                expected: format!("{} values", height * width),
                actual: format!("{} values", data.len()),
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(
                "data",
                format!("non-finite value at index {i}"),
            ));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.width + col] = value;
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn scale(&self, k: f64) -> ScalarField {
        ScalarField {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|v| k * v).collect(),
        }
    }
}

/// A per-pixel indicator whose every element is exactly 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl BinaryMask {
    pub fn empty(height: usize, width: usize) -> Self {
        assert!(height > 0 && width > 0, "empty mask");
        Self {
            height,
            width,
            data: vec![0; height * width],
        }
    }

    pub fn full(height: usize, width: usize) -> Self {
        let mut m = Self::empty(height, width);
        m.data.fill(1);
        m
    }

    pub fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut m = Self::empty(height, width);
        for r in 0..height {
            for c in 0..width {
                m.data[r * width + c] = u8::from(f(r, c));
            }
        }
        m
    }

    pub fn from_vec(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::invalid("shape", "dimensions must be positive"));
        }
        if data.len() != height * width {
            return Err(Error::ShapeMismatch {
                expected: format!("{} values", height * width),
                actual: format!("{} values", data.len()),
            });
        }
        if data.iter().any(|&v| v > 1) {
            return Err(Error::invalid("data", "mask values must be 0 or 1"));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.width + col] == 1
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, on: bool) {
        self.data[row * self.width + col] = u8::from(on);
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v == 1).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn ensure_dims(&self, height: usize, width: usize) -> Result<()> {
        if (self.height, self.width) != (height, width) {
            return Err(Error::ShapeMismatch {
                expected: format!("{height}x{width}"),
                actual: format!("{}x{}", self.height, self.width),
            });
        }
        Ok(())
    }

    fn combine(&self, other: &BinaryMask, f: impl Fn(u8, u8) -> u8) -> Result<BinaryMask> {
        other.ensure_dims(self.height, self.width)?;
        Ok(BinaryMask {
            height: self.height,
            width: self.width,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn union(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.combine(other, |a, b| a | b)
    }

    pub fn intersection(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.combine(other, |a, b| a & b)
    }

    pub fn complement(&self) -> BinaryMask {
        BinaryMask {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| 1 - v).collect(),
        }
    }

    /// True when every set pixel of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.height == other.height
            && self.width == other.width
            && self.data.iter().zip(&other.data).all(|(&a, &b)| a <= b)
    }

    /// Coordinates of set pixels in row-major order.
    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == 1)
            .map(move |(i, _)| (i / w, i % w))
    }

    pub fn to_field(&self) -> ScalarField {
        ScalarField {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| f64::from(v)).collect(),
        }
    }
}

/// Affine rescale to `[0, 1]`. A constant field maps to all zeros.
pub fn minmax_normalize(field: &ScalarField) -> ScalarField {
    let (lo, hi) = (field.min(), field.max());
    let range = hi - lo;
    let data = if range > 0.0 {
        field.data.iter().map(|v| (v - lo) / range).collect()
    } else {
        vec![0.0; field.data.len()]
    };
    ScalarField {
        height: field.height,
        width: field.width,
        data,
    }
}

/// Inclusive threshold: a pixel is set iff its value is `>= tau`.
pub fn threshold(field: &ScalarField, tau: f64) -> Result<BinaryMask> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::invalid("tau", format!("{tau} is outside [0, 1]")));
    }
    Ok(BinaryMask {
        height: field.height,
        width: field.width,
        data: field.data.iter().map(|&v| u8::from(v >= tau)).collect(),
    })
}

const HEATMAP_ALPHA: f64 = 0.6;
const HEATMAP_RED: [f64; 3] = [1.0, 0.0, 0.0];

/// Tints `base` toward red in proportion to `field`, which should already lie in `[0, 1]`.
pub fn overlay_heatmap(base: &PixelGrid, field: &ScalarField) -> Result<PixelGrid> {
    if base.channels != 3 {
        return Err(Error::invalid(
            "base",
            "heatmap overlay needs a 3-channel image",
        ));
    }
    if (base.height, base.width) != (field.height, field.width) {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{}", base.height, base.width),
            actual: format!("{}x{}", field.height, field.width),
        });
    }
    let mut out = base.clone();
    for (i, px) in out.data.chunks_exact_mut(3).enumerate() {
        let a = HEATMAP_ALPHA * field.data[i];
        for (v, red) in px.iter_mut().zip(HEATMAP_RED) {
            *v = (1.0 - a) * *v + a * red;
        }
    }
    Ok(out)
}
