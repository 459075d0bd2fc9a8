use crate::patch::Patch;
use crate::patchmath::{patch_mad, patch_mean, DEGENERACY_EPS};

pub const DEFAULT_MAD_RATIO_THRESHOLD: f64 = 2.5;

/// `|p(i) − μ| / mad` for every pixel, or `None` for a flat patch.
pub fn mad_ratios(p: &Patch) -> Option<Vec<f64>> {
    let mu = patch_mean(p);
    let mad = patch_mad(p);
    let peak = p.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 || mad <= DEGENERACY_EPS * peak {
        return None;
    }
    Some(p.values().iter().map(|v| (v - mu).abs() / mad).collect())
}

/// Pixels whose deviation from the patch mean exceeds `threshold` MADs.
/// A flat patch selects nothing.
pub fn mad_ratio_detect(p: &Patch, threshold: f64) -> Vec<bool> {
    match mad_ratios(p) {
        Some(r) => r.into_iter().map(|v| v > threshold).collect(),
        None => vec![false; p.len()],
    }
}

/// MAD ratio of the centre pixel of an odd-sided window; 0 when flat.
pub fn center_mad_ratio(window: &Patch) -> f64 {
    let centre = (window.height() / 2) * window.width() + window.width() / 2;
    mad_ratios(window).map_or(0.0, |r| r[centre])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_hot_pixel() {
        let mut p = Patch::filled(15, 15, 100.0);
        p.set(7, 7, 200.0);
        let mask = mad_ratio_detect(&p, DEFAULT_MAD_RATIO_THRESHOLD);
        assert_eq!(mask.iter().filter(|&&m| m).count(), 1);
        assert!(mask[7 * 15 + 7]);
        // μ = 100 + 100/225, mad = 2·(224·100/225)/225
        let mu = 100.0 + 100.0 / 225.0;
        let mad = 2.0 * (224.0 * 100.0 / 225.0) / 225.0;
        let expected = (200.0 - mu) / mad;
        assert!((center_mad_ratio(&p) - expected).abs() < 1e-9);
        assert!((expected - 112.5).abs() < 1e-9);
    }

    #[test]
    fn flat_patch_selects_nothing() {
        let p = Patch::filled(5, 5, 3.0);
        assert!(mad_ratio_detect(&p, 0.0).iter().all(|&m| !m));
        assert_eq!(center_mad_ratio(&p), 0.0);
    }

    #[test]
    fn zero_threshold_selects_every_deviation() {
        let p = Patch::from_rows(&[[1.0, 2.0, 3.0], [2.0, 2.0, 2.0], [1.0, 3.0, 2.0]]);
        let mask = mad_ratio_detect(&p, 0.0);
        let mu = 2.0;
        for (m, v) in mask.iter().zip(p.values()) {
            assert_eq!(*m, *v != mu);
        }
    }

    proptest! {
        #[test]
        fn ratios_are_affine_invariant(
            values in prop::collection::vec(-100.0f64..100.0, 25),
            a in 0.01f64..100.0,
            b in -1e3f64..1e3,
        ) {
            let p = Patch::new(5, 5, values).unwrap();
            let q = p.affine(a, b);
            match (mad_ratios(&p), mad_ratios(&q)) {
                (Some(x), Some(y)) => {
                    for (u, v) in x.iter().zip(&y) {
                        prop_assert!((u - v).abs() <= 1e-6 * (1.0 + u.abs()));
                    }
                }
                (None, None) => {}
                (x, y) => prop_assert!(false, "{x:?} vs {y:?}"),
            }
        }
    }
}
