//! The end-to-end head swap: invert the body image, extract the edit mask at
//! the editing step, then denoise under head conditioning while every unmasked
//! pixel is replaced by the stored inversion latent of the same step.

use crate::diffusion::{
    ddim_sample_step, guided_eps, invert_trajectory, GuidanceConfig, InversionTrajectory,
    NoisePredictor, NoiseSchedule,
};
use crate::error::{Error, Result};
use crate::imaging::{BinaryMask, PixelGrid, ScalarField};
use crate::iomask::{build_iomask, io_map, IOMaskConfig};
use crate::synthgen::{render_avatar, AttributeSpec, Condition};

/// Head identity and hair from `head`; pose and clothing from `body`.
pub fn compose_head_condition(head: AttributeSpec, body: AttributeSpec) -> Condition {
    Condition {
        skin_tone: Some(head.skin_tone),
        hair_style: Some(head.hair_style),
        hair_color: Some(head.hair_color),
        clothing_color: Some(body.clothing_color),
        head_tilt: Some(body.head_tilt),
    }
}

pub fn body_condition(body: AttributeSpec) -> Condition {
    Condition::exact(body)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwapConfig {
    pub steps: usize,
    /// Guidance for head-conditioned denoising.
    pub guidance: GuidanceConfig,
    /// Fraction of the schedule at which editing starts.
    pub edit_fraction: f64,
    pub mask: IOMaskConfig,
    /// Keep every blended latent of the denoising loop.
    pub keep_latents: bool,
}

impl Default for SwapConfig {
    fn default() -> Self {
        Self {
            steps: 50,
            guidance: GuidanceConfig::new(3.0).expect("valid scale"),
            edit_fraction: 0.8,
            mask: IOMaskConfig::default(),
            keep_latents: false,
        }
    }
}

impl SwapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps < 2 {
            return Err(Error::invalid(
                "T",
                format!("{} steps, need at least 2", self.steps),
            ));
        }
        if !(self.edit_fraction > 0.0 && self.edit_fraction <= 1.0) {
            return Err(Error::invalid(
                "edit_fraction",
                format!("{} is outside (0, 1]", self.edit_fraction),
            ));
        }
        self.mask.validate()
    }

    /// The step at which the mask is extracted and guided denoising begins.
    pub fn edit_step(&self) -> usize {
        ((self.edit_fraction * self.steps as f64).round() as usize).clamp(1, self.steps)
    }
}

/// Non-fatal conditions encountered while building the mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskWarning {
    /// The mask has no set pixels, so the output is the body image.
    Empty,
    /// The body-conditioned prediction was all zeros; the map was taken as zero.
    DegenerateReference,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwapResult {
    pub output: PixelGrid,
    pub mask: BinaryMask,
    pub io_map: ScalarField,
    pub trajectory: InversionTrajectory,
    pub per_step_latents: Option<Vec<PixelGrid>>,
    pub warning: Option<MaskWarning>,
}

/// The mask stage of a swap: inversion of the body plus the IO map and mask
/// at the editing step.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskStage {
    pub trajectory: InversionTrajectory,
    pub io_map: ScalarField,
    pub mask: BinaryMask,
    pub warning: Option<MaskWarning>,
}

pub fn swap_mask<P: NoisePredictor + ?Sized>(
    body: AttributeSpec,
    head: AttributeSpec,
    cfg: &SwapConfig,
    sched: &NoiseSchedule,
    pred: &P,
) -> Result<MaskStage> {
    cfg.validate()?;
    if sched.steps() != cfg.steps {
        return Err(Error::invalid(
            "T",
            format!(
                "config has {} steps but schedule has {}",
                cfg.steps,
                sched.steps()
            ),
        ));
    }
    let body_image = render_avatar(body).image;
    let body_cond = body_condition(body);
    let head_cond = compose_head_condition(head, body);
    let trajectory = invert_trajectory(&body_image, &body_cond, sched, pred)?;

    let mut warning = None;
    let map = match io_map(
        &trajectory,
        cfg.edit_step(),
        &head_cond,
        &body_cond,
        &cfg.mask,
        sched,
        pred,
    ) {
        Ok(map) => map,
        Err(Error::DegenerateReference) => {
            warning = Some(MaskWarning::DegenerateReference);
            ScalarField::zeros(body_image.height(), body_image.width())
        }
        Err(e) => return Err(e),
    };
    let mask = build_iomask(&map, &cfg.mask)?;
    if mask.is_empty() && warning.is_none() {
        warning = Some(MaskWarning::Empty);
    }
    Ok(MaskStage {
        trajectory,
        io_map: map,
        mask,
        warning,
    })
}

/// Swaps the head of `body` for the head of `head`.
pub fn run_headswap<P: NoisePredictor + ?Sized>(
    body: AttributeSpec,
    head: AttributeSpec,
    cfg: &SwapConfig,
    sched: &NoiseSchedule,
    pred: &P,
) -> Result<SwapResult> {
    let MaskStage {
        trajectory,
        io_map,
        mask,
        warning,
    } = swap_mask(body, head, cfg, sched, pred)?;
    let head_cond = compose_head_condition(head, body);
    let t_edit = cfg.edit_step();

    let mut latents = cfg.keep_latents.then(Vec::new);
    let mut z = trajectory.at(t_edit).clone();
    for t in (1..=t_edit).rev() {
        let eps = guided_eps(pred, &z, t, &head_cond, cfg.guidance, sched)?;
        let denoised = ddim_sample_step(&z, &eps, t, sched)?;
        z = denoised.blend(trajectory.at(t - 1), &mask)?;
        if let Some(l) = latents.as_mut() {
            l.push(z.clone());
        }
    }

    Ok(SwapResult {
        output: z,
        mask,
        io_map,
        trajectory,
        per_step_latents: latents,
        warning,
    })
}
