//! Edit-mask extraction from noise predictions.
//!
//! The IO map is the per-pixel magnitude of the part of the guided
//! head-conditioned prediction that is orthogonal to the body-conditioned
//! prediction. Normalizing, blurring and thresholding it gives the binary mask.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::diffusion::{
    cfg_combine, GuidanceConfig, InversionTrajectory, NoisePredictor, NoiseSchedule,
};
use crate::error::{Error, Result};
use crate::imaging::{
    gaussian_filter, minmax_normalize, threshold, BinaryMask, PixelGrid, ScalarField,
};
use crate::synthgen::Condition;

/// Which difference field the map is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskVariant {
    /// Guided head prediction minus guided body prediction.
    Naive,
    /// Guided head prediction minus plain body prediction.
    NoOrth,
    /// Component of the guided head prediction orthogonal to the plain body prediction.
    Full,
}

impl MaskVariant {
    pub const ALL: [MaskVariant; 3] = [MaskVariant::Naive, MaskVariant::NoOrth, MaskVariant::Full];

    pub fn as_str(self) -> &'static str {
        match self {
            MaskVariant::Naive => "naive",
            MaskVariant::NoOrth => "no_orth",
            MaskVariant::Full => "full",
        }
    }
}

impl fmt::Display for MaskVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MaskVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(MaskVariant::Naive),
            "no_orth" => Ok(MaskVariant::NoOrth),
            "full" => Ok(MaskVariant::Full),
            _ => Err(Error::invalid(
                "variant",
                format!("`{s}` is not one of naive, no_orth, full"),
            )),
        }
    }
}

/// Scope of the projection in the full variant.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Projection {
    /// One coefficient over the whole flattened prediction.
    #[default]
    Global,
    /// Experimental: an independent coefficient per pixel over its channels.
    PerPixel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IOMaskConfig {
    pub tau: f64,
    pub sigma: f64,
    pub variant: MaskVariant,
    pub guidance: GuidanceConfig,
    pub projection: Projection,
}

impl Default for IOMaskConfig {
    fn default() -> Self {
        Self {
            tau: 0.6,
            sigma: 2.0,
            variant: MaskVariant::Full,
            guidance: GuidanceConfig::new(3.0).expect("valid scale"),
            projection: Projection::Global,
        }
    }
}

impl IOMaskConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::invalid(
                "tau",
                format!("{} is outside [0, 1]", self.tau),
            ));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid(
                "sigma",
                format!("{} must be positive", self.sigma),
            ));
        }
        Ok(())
    }
}

/// `eps_h - (<eps_b, eps_h> / |eps_b|^2) eps_b` over the flattened grids.
pub fn orthogonal_component(eps_h: &PixelGrid, eps_b: &PixelGrid) -> Result<PixelGrid> {
    let nb = eps_b.norm_sq();
    if nb == 0.0 {
        return Err(Error::DegenerateReference);
    }
    let k = eps_b.dot(eps_h)? / nb;
    eps_h.zip_map(eps_b, |h, b| h - k * b)
}

/// Per-pixel projection; pixels whose reference vector is zero keep `eps_h`.
pub fn orthogonal_component_per_pixel(eps_h: &PixelGrid, eps_b: &PixelGrid) -> Result<PixelGrid> {
    eps_h.ensure_same_shape(eps_b)?;
    if eps_b.norm_sq() == 0.0 {
        return Err(Error::DegenerateReference);
    }
    let c = eps_h.channels();
    let mut out = eps_h.clone();
    for (px, b) in out
        .data_mut()
        .chunks_exact_mut(c)
        .zip(eps_b.data().chunks_exact(c))
    {
        let nb: f64 = b.iter().map(|v| v * v).sum();
        if nb == 0.0 {
            continue;
        }
        let k = px.iter().zip(b).map(|(h, b)| h * b).sum::<f64>() / nb;
        for (h, b) in px.iter_mut().zip(b) {
            *h -= k * b;
        }
    }
    Ok(out)
}

/// The signed difference field for one variant, before channel aggregation.
///
/// Returns `(D, eps_b)` where `eps_b` is the plain body-conditioned prediction.
#[allow(clippy::too_many_arguments)]
pub fn io_difference<P: NoisePredictor + ?Sized>(
    traj: &InversionTrajectory,
    t: usize,
    head_cond: &Condition,
    body_cond: &Condition,
    cfg: &IOMaskConfig,
    sched: &NoiseSchedule,
    pred: &P,
) -> Result<(PixelGrid, PixelGrid)> {
    if t > traj.steps() {
        return Err(Error::StepOutOfRange {
            t,
            lo: 1,
            hi: traj.steps(),
        });
    }
    let z = traj.at(t);
    let uncond = pred.predict(z, t, &Condition::null(), sched)?;
    let body = pred.predict(z, t, body_cond, sched)?;
    let head = cfg_combine(
        &uncond,
        &pred.predict(z, t, head_cond, sched)?,
        cfg.guidance,
    )?;
    let diff = match cfg.variant {
        MaskVariant::Full => match cfg.projection {
            Projection::Global => orthogonal_component(&head, &body)?,
            Projection::PerPixel => orthogonal_component_per_pixel(&head, &body)?,
        },
        MaskVariant::NoOrth => head.zip_map(&body, |h, b| h - b)?,
        MaskVariant::Naive => {
            let body_guided = cfg_combine(&uncond, &body, cfg.guidance)?;
            head.zip_map(&body_guided, |h, b| h - b)?
        }
    };
    Ok((diff, body))
}

/// Channel-mean magnitude of the variant's difference field at step `t`.
pub fn io_map<P: NoisePredictor + ?Sized>(
    traj: &InversionTrajectory,
    t: usize,
    head_cond: &Condition,
    body_cond: &Condition,
    cfg: &IOMaskConfig,
    sched: &NoiseSchedule,
    pred: &P,
) -> Result<ScalarField> {
    let (diff, _) = io_difference(traj, t, head_cond, body_cond, cfg, sched, pred)?;
    Ok(diff.channel_mean_abs())
}

/// Normalize to `[0, 1]`, blur, then threshold at `tau` (inclusive).
pub fn build_iomask(map: &ScalarField, cfg: &IOMaskConfig) -> Result<BinaryMask> {
    cfg.validate()?;
    let smoothed = gaussian_filter(&minmax_normalize(map), cfg.sigma)?;
    threshold(&smoothed, cfg.tau)
}
