//! Head swapping with diffusion inversion and orthogonal noise masks, driven by
//! an exact empirical-Bayes noise predictor over a procedural avatar dataset.
//!
//! The pipeline inverts the body image with DDIM, extracts an edit mask from the
//! part of the head-conditioned noise prediction orthogonal to the
//! body-conditioned one, and denoises under head conditioning while pinning
//! every unmasked pixel to the stored inversion trajectory.

pub mod diffusion;
pub mod error;
pub mod eval;
pub mod hid;
pub mod imaging;
pub mod iomask;
pub mod synthgen;

pub use diffusion::{
    cfg_combine, ddim_invert_step, ddim_sample_step, empirical_eps, invert_trajectory,
    make_schedule, sample_trajectory, EmpiricalDenoiser, GuidanceConfig, InversionTrajectory,
    NoisePredictor, NoiseSchedule,
};
pub use error::{Error, Result};
pub use hid::{
    body_condition, compose_head_condition, run_headswap, swap_mask, MaskStage, MaskWarning,
    SwapConfig, SwapResult,
};
pub use imaging::{BinaryMask, PixelGrid, ScalarField};
pub use iomask::{
    build_iomask, io_map, orthogonal_component, IOMaskConfig, MaskVariant, Projection,
};
pub use synthgen::{
    condition_match, enumerate_dataset, ground_truth_edit_mask, oracle_swap, render_avatar,
    AttributeSpec, AvatarRender, Condition, HairStyle,
};
