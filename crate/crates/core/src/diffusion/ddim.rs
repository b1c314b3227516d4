use super::{NoisePredictor, NoiseSchedule};
use crate::error::{Error, Result};
use crate::imaging::PixelGrid;
use crate::synthgen::Condition;

/// Classifier-free guidance scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuidanceConfig {
    w: f64,
}

impl GuidanceConfig {
    pub fn new(w: f64) -> Result<Self> {
        if !(w >= 0.0 && w.is_finite()) {
            return Err(Error::invalid(
                "w",
                format!("{w} must be a non-negative real"),
            ));
        }
        Ok(Self { w })
    }

    /// `w = 1`, i.e. the plain conditional prediction.
    pub fn unit() -> Self {
        Self { w: 1.0 }
    }

    pub fn w(&self) -> f64 {
        self.w
    }
}

/// `eps_uncond + w (eps_cond - eps_uncond)`, evaluated as
/// `(1 - w) eps_uncond + w eps_cond` so that `w = 1` and `w = 0` return the
/// respective input bit for bit.
pub fn cfg_combine(
    eps_uncond: &PixelGrid,
    eps_cond: &PixelGrid,
    g: GuidanceConfig,
) -> Result<PixelGrid> {
    let w = g.w;
    eps_uncond.zip_map(eps_cond, |u, c| (1.0 - w) * u + w * c)
}

/// Guided noise prediction. At `w = 1` the unconditional branch is skipped
/// since [`cfg_combine`] would return the conditional prediction unchanged.
pub fn guided_eps<P: NoisePredictor + ?Sized>(
    pred: &P,
    z_t: &PixelGrid,
    t: usize,
    cond: &Condition,
    g: GuidanceConfig,
    sched: &NoiseSchedule,
) -> Result<PixelGrid> {
    let cond_eps = pred.predict(z_t, t, cond, sched)?;
    if g.w == 1.0 {
        return Ok(cond_eps);
    }
    let uncond = pred.predict(z_t, t, &Condition::null(), sched)?;
    cfg_combine(&uncond, &cond_eps, g)
}

/// Moves a latent between two noise levels along the deterministic DDIM path
/// implied by `eps`.
fn transfer(z: &PixelGrid, eps: &PixelGrid, a_from: f64, a_to: f64) -> Result<PixelGrid> {
    let (s_from, n_from) = (a_from.sqrt(), (1.0 - a_from).sqrt());
    let (s_to, n_to) = (a_to.sqrt(), (1.0 - a_to).sqrt());
    z.zip_map(eps, |zv, e| {
        let x0 = (zv - n_from * e) / s_from;
        s_to * x0 + n_to * e
    })
}

/// One deterministic DDIM denoising step `z_t -> z_{t-1}`.
pub fn ddim_sample_step(
    z_t: &PixelGrid,
    eps: &PixelGrid,
    t: usize,
    sched: &NoiseSchedule,
) -> Result<PixelGrid> {
    if t == 0 || t > sched.steps() {
        return Err(Error::StepOutOfRange {
            t,
            lo: 1,
            hi: sched.steps(),
        });
    }
    transfer(z_t, eps, sched.alpha_bar(t), sched.alpha_bar(t - 1))
}

/// One DDIM inversion step `z_t -> z_{t+1}`. Equal to
/// `sqrt(a'/a) z + (sqrt(1/a' - 1) - sqrt(1/a - 1)) sqrt(a') eps`
/// with `a = alpha_bar[t]`, `a' = alpha_bar[t + 1]`.
pub fn ddim_invert_step(
    z_t: &PixelGrid,
    eps: &PixelGrid,
    t: usize,
    sched: &NoiseSchedule,
) -> Result<PixelGrid> {
    if t >= sched.steps() {
        return Err(Error::StepOutOfRange {
            t,
            lo: 0,
            hi: sched.steps() - 1,
        });
    }
    transfer(z_t, eps, sched.alpha_bar(t), sched.alpha_bar(t + 1))
}

/// The latents `z_0 ..= z_T` visited by DDIM inversion; `latents[0]` is the input.
#[derive(Debug, Clone, PartialEq)]
pub struct InversionTrajectory {
    latents: Vec<PixelGrid>,
}

impl InversionTrajectory {
    pub fn latents(&self) -> &[PixelGrid] {
        &self.latents
    }

    pub fn at(&self, t: usize) -> &PixelGrid {
        &self.latents[t]
    }

    pub fn steps(&self) -> usize {
        self.latents.len() - 1
    }

    pub fn last(&self) -> &PixelGrid {
        self.latents.last().expect("non-empty trajectory")
    }
}

/// Runs DDIM inversion with the plain conditional prediction (`w = 1`).
/// The noise at the first step is evaluated at `t = 1` since `t = 0` carries no noise.
pub fn invert_trajectory<P: NoisePredictor + ?Sized>(
    image: &PixelGrid,
    cond: &Condition,
    sched: &NoiseSchedule,
    pred: &P,
) -> Result<InversionTrajectory> {
    let mut latents = Vec::with_capacity(sched.steps() + 1);
    latents.push(image.clone());
    for t in 0..sched.steps() {
        let z = &latents[t];
        let eps = pred.predict(z, t.max(1), cond, sched)?;
        let next = ddim_invert_step(z, &eps, t, sched)?;
        latents.push(next);
    }
    Ok(InversionTrajectory { latents })
}

/// Denoises `z` from step `from_t` down to `0` under guided conditioning.
pub fn sample_from<P: NoisePredictor + ?Sized>(
    z: &PixelGrid,
    from_t: usize,
    cond: &Condition,
    g: GuidanceConfig,
    sched: &NoiseSchedule,
    pred: &P,
) -> Result<PixelGrid> {
    if from_t > sched.steps() {
        return Err(Error::StepOutOfRange {
            t: from_t,
            lo: 0,
            hi: sched.steps(),
        });
    }
    let mut z = z.clone();
    for t in (1..=from_t).rev() {
        let eps = guided_eps(pred, &z, t, cond, g, sched)?;
        z = ddim_sample_step(&z, &eps, t, sched)?;
    }
    Ok(z)
}

/// Denoises the final inversion latent all the way back to step 0.
pub fn sample_trajectory<P: NoisePredictor + ?Sized>(
    traj: &InversionTrajectory,
    cond: &Condition,
    g: GuidanceConfig,
    sched: &NoiseSchedule,
    pred: &P,
) -> Result<PixelGrid> {
    sample_from(traj.last(), traj.steps(), cond, g, sched, pred)
}
