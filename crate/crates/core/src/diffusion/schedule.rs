use crate::error::{Error, Result};

/// Offset of the cosine schedule.
const COSINE_OFFSET: f64 = 0.008;
const ALPHA_BAR_FLOOR: f64 = 1e-4;

/// Cumulative signal levels `alpha_bar[t]` for `t = 0..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    alpha_bar: Vec<f64>,
}

impl NoiseSchedule {
    /// Wraps explicit levels. Entries must lie in `(0, 1]` and be non-increasing.
    pub fn from_alpha_bar(alpha_bar: Vec<f64>) -> Result<Self> {
        if alpha_bar.len() < 3 {
            return Err(Error::invalid("alpha_bar", "need at least T = 2 steps"));
        }
        if let Some(v) = alpha_bar.iter().find(|&&a| !(a > 0.0 && a <= 1.0)) {
            return Err(Error::invalid(
                "alpha_bar",
                format!("{v} is outside (0, 1]"),
            ));
        }
        if alpha_bar.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::invalid("alpha_bar", "levels must be non-increasing"));
        }
        Ok(Self { alpha_bar })
    }

    /// Number of steps `T`.
    pub fn steps(&self) -> usize {
        self.alpha_bar.len() - 1
    }

    #[inline]
    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bar[t]
    }

    pub fn levels(&self) -> &[f64] {
        &self.alpha_bar
    }
}

/// Cosine schedule normalized so that `alpha_bar[0] = 1`, clamped to `[1e-4, 1]`.
///
/// Levels are strictly decreasing for `T < 156`; beyond that the last few
/// entries reach the floor and repeat, which makes those DDIM steps identities.
pub fn make_schedule(steps: usize) -> Result<NoiseSchedule> {
    if steps < 2 {
        return Err(Error::invalid(
            "T",
            format!("{steps} steps, need at least 2"),
        ));
    }
    let f = |t: usize| {
        let x = (t as f64 / steps as f64 + COSINE_OFFSET) / (1.0 + COSINE_OFFSET);
        (x * std::f64::consts::FRAC_PI_2).cos().powi(2)
    };
    let f0 = f(0);
    let alpha_bar = (0..=steps)
        .map(|t| (f(t) / f0).clamp(ALPHA_BAR_FLOOR, 1.0))
        .collect();
    NoiseSchedule::from_alpha_bar(alpha_bar)
}
