use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::imaging::{BinaryMask, PixelGrid};
use crate::synthgen::{
    self, is_brow, oracle_swap, render_avatar, swap_spec, AttributeSpec, HairStyle, HAIR_PALETTE,
    SKIN_PALETTE,
};

/// Intersection over union; two empty masks score 1.
pub fn mask_iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    let inter = a.intersection(b)?.count();
    let union = a.union(b)?.count();
    Ok(if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    })
}

/// Mean squared difference over the pixels (and all channels) of `region`.
/// An empty region scores 0.
pub fn region_mse(x: &PixelGrid, y: &PixelGrid, region: &BinaryMask) -> Result<f64> {
    x.ensure_same_shape(y)?;
    region.ensure_dims(x.height(), x.width())?;
    let mut acc = 0.0;
    let mut n = 0usize;
    for (r, c) in region.pixels() {
        for (a, b) in x.pixel(r, c).iter().zip(y.pixel(r, c)) {
            acc += (a - b) * (a - b);
            n += 1;
        }
    }
    Ok(if n == 0 { 0.0 } else { acc / n as f64 })
}

/// Mean squared difference over the whole grid.
pub fn mse(x: &PixelGrid, y: &PixelGrid) -> Result<f64> {
    x.ensure_same_shape(y)?;
    Ok(x.zip_map(y, |a, b| a - b)?.norm_sq() / x.data().len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeScore {
    pub matched: u32,
    pub total: u32,
}

impl ProbeScore {
    pub fn fraction(&self) -> f64 {
        f64::from(self.matched) / f64::from(self.total)
    }
}

/// Share of a region's pixels that must look like hair for the region to count as present.
const HAIR_PRESENT_FRACTION: f64 = 0.25;
/// RGB distance within which a pixel counts as a hair palette color.
const HAIR_COLOR_RADIUS: f64 = 0.15;

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn mean_color(image: &PixelGrid, pixels: &[(usize, usize)]) -> [f64; 3] {
    let mut acc = [0.0; 3];
    for &(r, c) in pixels {
        for (a, v) in acc.iter_mut().zip(image.pixel(r, c)) {
            *a += v;
        }
    }
    acc.map(|a| a / pixels.len().max(1) as f64)
}

fn nearest(color: &[f64; 3], palette: &[[f64; 3]]) -> usize {
    palette
        .iter()
        .enumerate()
        .min_by(|a, b| dist(color, a.1).total_cmp(&dist(color, b.1)))
        .map(|(i, _)| i)
        .expect("non-empty palette")
}

fn looks_like_hair(image: &PixelGrid, pixels: &[(usize, usize)]) -> bool {
    if pixels.is_empty() {
        return false;
    }
    let hits = pixels
        .iter()
        .filter(|&&(r, c)| {
            HAIR_PALETTE
                .iter()
                .any(|h| dist(image.pixel(r, c), h) <= HAIR_COLOR_RADIUS)
        })
        .count();
    hits as f64 >= HAIR_PRESENT_FRACTION * pixels.len() as f64
}

/// Checks whether `image` shows the head's skin tone, hair color and hair style
/// at the locations where the ideal swap would paint them.
///
/// Hair color is the one whose ideal render, over every hair style and skin
/// tone, lies closest to `image` on the brow and hair pixels.
pub fn attribute_probe(image: &PixelGrid, body: AttributeSpec, head: AttributeSpec) -> ProbeScore {
    let oracle = oracle_swap(body, head);
    let center = oracle.attrs.head_center();

    let (mut skin_px, mut brow_px) = (Vec::new(), Vec::new());
    for (r, c) in oracle.head_mask.pixels() {
        if is_brow(r as i64, c as i64, center) {
            brow_px.push((r, c));
        } else {
            skin_px.push((r, c));
        }
    }
    let mut hair_px = brow_px;
    hair_px.extend(oracle.hair_mask.pixels());

    let skin = nearest(&mean_color(image, &skin_px), &SKIN_PALETTE) == head.skin_tone as usize;

    let target = swap_spec(body, head);
    let sse = |other: &PixelGrid| -> f64 {
        hair_px
            .iter()
            .map(|&(r, c)| dist(image.pixel(r, c), other.pixel(r, c)).powi(2))
            .sum()
    };
    let mut best = (f64::INFINITY, 0u8);
    for style in HairStyle::ALL {
        for k in 0..HAIR_PALETTE.len() as u8 {
            for s in 0..SKIN_PALETTE.len() as u8 {
                let candidate = render_avatar(AttributeSpec {
                    hair_style: style,
                    hair_color: k,
                    skin_tone: s,
                    ..target
                });
                let e = sse(&candidate.image);
                if e < best.0 {
                    best = (e, k);
                }
            }
        }
    }
    let hair = best.1 == head.hair_color;

    let layout = |style| {
        render_avatar(AttributeSpec {
            hair_style: style,
            ..target
        })
        .hair_mask
    };
    let long_px: Vec<_> = layout(HairStyle::Long)
        .pixels()
        .filter(|&(r, _)| synthgen::below_disc(r))
        .collect();
    let cap_px: Vec<_> = layout(HairStyle::Short).pixels().collect();
    let style = if looks_like_hair(image, &long_px) {
        HairStyle::Long
    } else if looks_like_hair(image, &cap_px) {
        HairStyle::Short
    } else {
        HairStyle::Bald
    };

    ProbeScore {
        matched: u32::from(skin) + u32::from(hair) + u32::from(style == head.hair_style),
        total: 3,
    }
}
