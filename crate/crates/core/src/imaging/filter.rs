use super::ScalarField;
use crate::error::{Error, Result};

/// Normalized 1-D Gaussian taps for offsets `-r..=r` with `r = ceil(3 * sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid("sigma", format!("{sigma} must be positive")));
    }
    let radius = (3.0 * sigma).ceil() as i64;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|d| (-((d * d) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|v| *v /= total);
    Ok(taps)
}

/// Maps any integer index onto `0..n` by mirror reflection about the edges,
/// repeating the edge sample (`b a | a b c d | d c`).
#[inline]
pub(crate) fn reflect_index(i: i64, n: usize) -> usize {
    let n = n as i64;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - 1 - m }) as usize
}

/// Separable 2-D Gaussian blur with reflect padding.
pub fn gaussian_filter(field: &ScalarField, sigma: f64) -> Result<ScalarField> {
    let taps = gaussian_kernel(sigma)?;
    let radius = (taps.len() / 2) as i64;
    let (h, w) = (field.height(), field.width());

    let mut rows = vec![0.0; h * w];
    for r in 0..h {
        let src = &field.data()[r * w..(r + 1) * w];
        for c in 0..w {
            rows[r * w + c] = taps
                .iter()
                .enumerate()
                .map(|(k, tap)| tap * src[reflect_index(c as i64 + k as i64 - radius, w)])
                .sum();
        }
    }

    let mut out = vec![0.0; h * w];
    for r in 0..h {
        for c in 0..w {
            out[r * w + c] = taps
                .iter()
                .enumerate()
                .map(|(k, tap)| tap * rows[reflect_index(r as i64 + k as i64 - radius, h) * w + c])
                .sum();
        }
    }
    ScalarField::from_vec(h, w, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Dense 2-D convolution with the outer-product kernel, straight from the definition.
    fn dense_convolve(field: &ScalarField, sigma: f64) -> Vec<f64> {
        let radius = (3.0 * sigma).ceil() as i64;
        let mut kernel = Vec::new();
        for dy in -radius..=radius {
            for dx in -radius..=radius {
                kernel.push((
                    dy,
                    dx,
                    (-((dy * dy + dx * dx) as f64) / (2.0 * sigma * sigma)).exp(),
                ));
            }
        }
        let total: f64 = kernel.iter().map(|k| k.2).sum();
        let (h, w) = (field.height() as i64, field.width() as i64);
        let mut out = Vec::new();
        for r in 0..h {
            for c in 0..w {
                let mut acc = 0.0;
                for &(dy, dx, k) in &kernel {
                    let rr = mirror(r + dy, h);
                    let cc = mirror(c + dx, w);
                    acc += k / total * field.get(rr as usize, cc as usize);
                }
                out.push(acc);
            }
        }
        out
    }

    // Reflection by repeated folding.
    fn mirror(mut i: i64, n: i64) -> i64 {
        loop {
            if i < 0 {
                i = -i - 1;
            } else if i >= n {
                i = 2 * n - 1 - i;
            } else {
                return i;
            }
        }
    }

    #[test]
    fn kernel_radius_and_mass() {
        let k = gaussian_kernel(2.0).unwrap();
        assert_eq!(k.len(), 13);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(gaussian_kernel(0.4).unwrap().len(), 5);
    }

    #[test]
    fn rejects_non_positive_sigma() {
        let f = ScalarField::zeros(3, 3);
        assert!(matches!(
            gaussian_filter(&f, 0.0),
            Err(Error::InvalidParameter { .. })
        ));
        assert!(matches!(
            gaussian_filter(&f, -1.0),
            Err(Error::InvalidParameter { .. })
        ));
    }

    #[test]
    fn constant_field_is_fixed() {
        let f = ScalarField::filled(7, 5, 0.37);
        let g = gaussian_filter(&f, 1.3).unwrap();
        assert!(g.data().iter().all(|v| (v - 0.37).abs() < 1e-15));
    }

    #[test]
    fn centered_spike_matches_dense_convolution() {
        let mut f = ScalarField::zeros(5, 5);
        f.set(2, 2, 1.0);
        let g = gaussian_filter(&f, 1.0).unwrap();
        let expected = dense_convolve(&f, 1.0);
        for (a, b) in g.data().iter().zip(&expected) {
            assert!((a - b).abs() < 1e-15, "{a} vs {b}");
        }
        let k = gaussian_kernel(1.0).unwrap();
        assert!((g.get(2, 2) - k[3] * k[3]).abs() < 1e-15);
    }

    #[test]
    fn reflect_handles_kernels_wider_than_field() {
        let f = ScalarField::from_vec(2, 3, vec![0.1, 0.9, 0.4, 0.0, 1.0, 0.3]).unwrap();
        let g = gaussian_filter(&f, 3.0).unwrap();
        let expected = dense_convolve(&f, 3.0);
        for (a, b) in g.data().iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn reflect_index_folds() {
        let idx: Vec<usize> = (-3..7).map(|i| reflect_index(i, 4)).collect();
        assert_eq!(idx, vec![2, 1, 0, 0, 1, 2, 3, 3, 2, 1]);
    }

    fn arb_field() -> impl Strategy<Value = ScalarField> {
        (1usize..10, 1usize..10).prop_flat_map(|(h, w)| {
            proptest::collection::vec(-5.0f64..5.0, h * w)
                .prop_map(move |d| ScalarField::from_vec(h, w, d).unwrap())
        })
    }

    proptest! {
        #[test]
        fn matches_dense_oracle(f in arb_field(), sigma in 0.3f64..2.5) {
            let g = gaussian_filter(&f, sigma).unwrap();
            for (a, b) in g.data().iter().zip(dense_convolve(&f, sigma)) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn output_within_input_range(f in arb_field(), sigma in 0.3f64..3.0) {
            let g = gaussian_filter(&f, sigma).unwrap();
            prop_assert!(g.min() >= f.min() - 1e-12);
            prop_assert!(g.max() <= f.max() + 1e-12);
        }

        #[test]
        fn linear(
            x in proptest::collection::vec(-1.0f64..1.0, 48),
            y in proptest::collection::vec(-1.0f64..1.0, 48),
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
        ) {
            let fx = ScalarField::from_vec(6, 8, x.clone()).unwrap();
            let fy = ScalarField::from_vec(6, 8, y.clone()).unwrap();
            let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
            let lhs = gaussian_filter(&ScalarField::from_vec(6, 8, mix).unwrap(), 1.5).unwrap();
            let gx = gaussian_filter(&fx, 1.5).unwrap();
            let gy = gaussian_filter(&fy, 1.5).unwrap();
            for i in 0..48 {
                prop_assert!((lhs.data()[i] - (a * gx.data()[i] + b * gy.data()[i])).abs() < 1e-12);
            }
        }

        #[test]
        fn preserves_mass_away_from_borders(
            core in proptest::collection::vec(0.0f64..1.0, 16),
            sigma in 0.3f64..2.0,
        ) {
            // 4x4 support padded by more than the kernel radius on every side.
            let n = 4 + 2 * 8;
            let mut f = ScalarField::zeros(n, n);
            for (i, v) in core.iter().enumerate() {
                f.set(8 + i / 4, 8 + i % 4, *v);
            }
            let g = gaussian_filter(&f, sigma).unwrap();
            prop_assert!((g.sum() - f.sum()).abs() < 1e-9);
        }
    }
}
