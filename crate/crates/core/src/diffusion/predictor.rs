use super::NoiseSchedule;
use crate::error::{Error, Result};
use crate::imaging::PixelGrid;
use crate::synthgen::{condition_match, AttributeSpec, AvatarRender, Condition};

/// Anything that predicts the noise component of a latent.
pub trait NoisePredictor: Sync {
    fn predict(
        &self,
        z_t: &PixelGrid,
        t: usize,
        cond: &Condition,
        sched: &NoiseSchedule,
    ) -> Result<PixelGrid>;
}

/// The minimum-MSE noise predictor for a finite dataset: under the forward
/// process `z_t = sqrt(a) x + sqrt(1 - a) n` with `x` uniform over the images
/// matching the condition, the posterior over `x` is a softmax of scaled
/// squared distances and the predicted noise follows from its mean.
#[derive(Debug, Clone)]
pub struct EmpiricalDenoiser {
    images: Vec<PixelGrid>,
    attrs: Vec<AttributeSpec>,
}

impl EmpiricalDenoiser {
    pub fn new(items: Vec<(PixelGrid, AttributeSpec)>) -> Result<Self> {
        let Some((first, _)) = items.first() else {
            return Err(Error::invalid("dataset", "empty dataset"));
        };
        let shape = first.shape();
        for (img, _) in &items {
            if img.shape() != shape {
                return Err(Error::ShapeMismatch {
                    expected: format!("{shape:?}"),
                    actual: format!("{:?}", img.shape()),
                });
            }
        }
        let (images, attrs) = items.into_iter().unzip();
        Ok(Self { images, attrs })
    }

    pub fn from_renders(renders: &[AvatarRender]) -> Result<Self> {
        Self::new(renders.iter().map(|r| (r.image.clone(), r.attrs)).collect())
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn images(&self) -> &[PixelGrid] {
        &self.images
    }

    pub fn attrs(&self) -> &[AttributeSpec] {
        &self.attrs
    }

    fn subset(&self, cond: &Condition) -> Result<Vec<usize>> {
        let idx: Vec<usize> = (0..self.len())
            .filter(|&i| condition_match(cond, &self.attrs[i]))
            .collect();
        if idx.is_empty() {
            return Err(Error::NoMatchingCondition(cond.to_string()));
        }
        Ok(idx)
    }
}

impl NoisePredictor for EmpiricalDenoiser {
    fn predict(
        &self,
        z_t: &PixelGrid,
        t: usize,
        cond: &Condition,
        sched: &NoiseSchedule,
    ) -> Result<PixelGrid> {
        empirical_eps(z_t, t, cond, sched, self)
    }
}

fn check_step(t: usize, sched: &NoiseSchedule) -> Result<()> {
    if t == 0 || t > sched.steps() {
        return Err(Error::StepOutOfRange {
            t,
            lo: 1,
            hi: sched.steps(),
        });
    }
    Ok(())
}

/// Posterior weights over the images matching `cond`, as `(dataset index, weight)`.
///
/// Logits are `-|z_t - sqrt(a) x_i|^2 / (2 (1 - a))`, exponentiated after
/// subtracting their maximum.
pub fn posterior_weights(
    z_t: &PixelGrid,
    t: usize,
    cond: &Condition,
    sched: &NoiseSchedule,
    data: &EmpiricalDenoiser,
) -> Result<Vec<(usize, f64)>> {
    check_step(t, sched)?;
    let idx = data.subset(cond)?;
    z_t.ensure_same_shape(&data.images[idx[0]])?;
    let a = sched.alpha_bar(t);
    let (s, var) = (a.sqrt(), 1.0 - a);
    let logits: Vec<f64> = idx
        .iter()
        .map(|&i| {
            let d2: f64 = z_t
                .data()
                .iter()
                .zip(data.images[i].data())
                .map(|(z, x)| (z - s * x) * (z - s * x))
                .sum();
            -d2 / (2.0 * var)
        })
        .collect();
    let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(idx
        .into_iter()
        .zip(exps.into_iter().map(|e| e / total))
        .collect())
}

/// Exact conditional noise prediction `(z_t - sqrt(a) E[x | z_t]) / sqrt(1 - a)`.
pub fn empirical_eps(
    z_t: &PixelGrid,
    t: usize,
    cond: &Condition,
    sched: &NoiseSchedule,
    data: &EmpiricalDenoiser,
) -> Result<PixelGrid> {
    let weights = posterior_weights(z_t, t, cond, sched, data)?;
    let mut mean = vec![0.0; z_t.data().len()];
    for (i, w) in weights {
        if w == 0.0 {
            continue;
        }
        for (m, x) in mean.iter_mut().zip(data.images[i].data()) {
            *m += w * x;
        }
    }
    let a = sched.alpha_bar(t);
    let (s, sigma) = (a.sqrt(), (1.0 - a).sqrt());
    let eps = z_t
        .data()
        .iter()
        .zip(&mean)
        .map(|(z, m)| (z - s * m) / sigma)
        .collect();
    let (h, w, c) = z_t.shape();
    PixelGrid::from_vec(h, w, c, eps)
}
