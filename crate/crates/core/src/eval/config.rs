//! Flat `key = value` run configuration files.

use std::path::Path;

use crate::diffusion::GuidanceConfig;
use crate::error::{Error, Result};
use crate::hid::SwapConfig;
use crate::iomask::MaskVariant;

/// Values read from a config file; `None` means "keep the default".
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ConfigOverrides {
    pub steps: Option<usize>,
    pub w: Option<f64>,
    pub tau: Option<f64>,
    pub sigma: Option<f64>,
    pub edit_fraction: Option<f64>,
    pub variant: Option<MaskVariant>,
    pub seed: Option<u64>,
}

pub const CONFIG_KEYS: [&str; 7] = ["T", "w", "tau", "sigma", "edit_fraction", "variant", "seed"];

impl ConfigOverrides {
    /// Parses config text. Blank lines and lines starting with `#` are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut out = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |reason: String| Error::Config {
                line: line_no,
                reason,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let num = |v: &str| {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| err(format!("`{key}` expects a number, got `{v}`")))
            };
            let int = |v: &str| {
                v.parse::<u64>()
                    .map_err(|_| err(format!("`{key}` expects a non-negative integer, got `{v}`")))
            };
            match key {
                "T" => out.steps = Some(int(value)? as usize),
                "w" => out.w = Some(num(value)?),
                "tau" => out.tau = Some(num(value)?),
                "sigma" => out.sigma = Some(num(value)?),
                "edit_fraction" => out.edit_fraction = Some(num(value)?),
                "variant" => {
                    out.variant = Some(value.parse().map_err(|e: Error| err(e.to_string()))?)
                }
                "seed" => out.seed = Some(int(value)?),
                _ => {
                    return Err(err(format!(
                        "unknown key `{key}` (expected one of {})",
                        CONFIG_KEYS.join(", ")
                    )))
                }
            }
        }
        Ok(out)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Applies the set values to `base` and validates the result. `w` sets both
    /// the denoising and the mask guidance.
    pub fn apply(&self, base: SwapConfig) -> Result<SwapConfig> {
        let mut cfg = base;
        if let Some(t) = self.steps {
            cfg.steps = t;
        }
        if let Some(w) = self.w {
            let g = GuidanceConfig::new(w)?;
            cfg.guidance = g;
            cfg.mask.guidance = g;
        }
        if let Some(tau) = self.tau {
            cfg.mask.tau = tau;
        }
        if let Some(sigma) = self.sigma {
            cfg.mask.sigma = sigma;
        }
        if let Some(f) = self.edit_fraction {
            cfg.edit_fraction = f;
        }
        if let Some(v) = self.variant {
            cfg.mask.variant = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Values set in `other` take precedence.
    pub fn merge(self, other: ConfigOverrides) -> ConfigOverrides {
        ConfigOverrides {
            steps: other.steps.or(self.steps),
            w: other.w.or(self.w),
            tau: other.tau.or(self.tau),
            sigma: other.sigma.or(self.sigma),
            edit_fraction: other.edit_fraction.or(self.edit_fraction),
            variant: other.variant.or(self.variant),
            seed: other.seed.or(self.seed),
        }
    }
}
