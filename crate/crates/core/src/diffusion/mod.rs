//! Noise schedule, deterministic DDIM steps, classifier-free guidance and the
//! exact empirical-Bayes noise predictor.

mod ddim;
mod predictor;
mod schedule;

pub use ddim::{
    cfg_combine, ddim_invert_step, ddim_sample_step, guided_eps, invert_trajectory, sample_from,
    sample_trajectory, GuidanceConfig, InversionTrajectory,
};
pub use predictor::{empirical_eps, posterior_weights, EmpiricalDenoiser, NoisePredictor};
pub use schedule::{make_schedule, NoiseSchedule};
