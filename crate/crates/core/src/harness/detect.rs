use crate::error::{Error, Result};
use crate::patch::Patch;
use crate::patchmath::ResponseMap;

use super::scorer::Scorer;

pub const DEFAULT_NMS_RADIUS: f64 = 7.0;
pub const DEFAULT_MATCH_RADIUS: f64 = 2.0;

/// A declaration at the centre pixel of a scored window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Detection {
    pub row: usize,
    pub col: usize,
    pub score: f64,
}

fn check_radius(radius: f64, what: &str) -> Result<()> {
    if radius > 0.0 && radius.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "{what} must be positive, got {radius}"
        )))
    }
}

/// Greedy non-maximum suppression over a whole response map, strongest
/// first (row-major order breaks ties). A position is suppressed when an
/// accepted one lies within `nms_radius` (Euclidean). Coordinates are
/// shifted by `offset` into frame coordinates.
///
/// Because candidates are visited in descending score order, the detections
/// at any threshold are exactly the prefix of this list above it.
pub fn nms_candidates(map: &ResponseMap, offset: usize, nms_radius: f64) -> Result<Vec<Detection>> {
    check_radius(nms_radius, "nms radius")?;
    let mut order: Vec<usize> = (0..map.values.len()).collect();
    order.sort_by(|&a, &b| map.values[b].total_cmp(&map.values[a]).then(a.cmp(&b)));
    let reach = nms_radius.floor() as i64;
    let r2 = nms_radius * nms_radius;
    let (h, w) = (map.height as i64, map.width as i64);
    let mut suppressed = vec![false; map.values.len()];
    let mut out = Vec::new();
    for i in order {
        if suppressed[i] {
            continue;
        }
        let (r, c) = ((i / map.width) as i64, (i % map.width) as i64);
        out.push(Detection {
            row: r as usize + offset,
            col: c as usize + offset,
            score: map.values[i],
        });
        for dr in -reach..=reach {
            for dc in -reach..=reach {
                let (rr, cc) = (r + dr, c + dc);
                if (0..h).contains(&rr) && (0..w).contains(&cc) && ((dr * dr + dc * dc) as f64) <= r2 {
                    suppressed[(rr * w + cc) as usize] = true;
                }
            }
        }
    }
    Ok(out)
}

/// All NMS survivors of a frame, strongest first, before thresholding.
pub fn frame_candidates(frame: &Patch, scorer: &Scorer, nms_radius: f64) -> Result<Vec<Detection>> {
    let map = scorer.response_map(frame)?;
    nms_candidates(&map, scorer.side() / 2, nms_radius)
}

/// Slides `scorer` over `frame` and keeps NMS survivors scoring above
/// `threshold`, strongest first.
pub fn sliding_detect(
    frame: &Patch,
    scorer: &Scorer,
    threshold: f64,
    nms_radius: f64,
) -> Result<Vec<Detection>> {
    let mut dets = frame_candidates(frame, scorer, nms_radius)?;
    dets.retain(|d| d.score > threshold);
    Ok(dets)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FrameMatch {
    pub true_positives: usize,
    pub false_negatives: usize,
    pub false_alarms: usize,
}

impl FrameMatch {
    pub fn truths(&self) -> usize {
        self.true_positives + self.false_negatives
    }

    pub fn detections(&self) -> usize {
        self.true_positives + self.false_alarms
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MatchResult {
    pub true_positives: usize,
    pub false_negatives: usize,
    pub false_alarms: usize,
    pub per_frame: Vec<FrameMatch>,
}

impl MatchResult {
    pub fn push(&mut self, m: FrameMatch) {
        self.true_positives += m.true_positives;
        self.false_negatives += m.false_negatives;
        self.false_alarms += m.false_alarms;
        self.per_frame.push(m);
    }
}

/// One-to-one greedy matching: detection–truth pairs within
/// `match_radius` are taken in ascending distance order (ties by detection
/// then truth index), each side used at most once.
pub fn match_frame(dets: &[Detection], truths: &[(usize, usize)], match_radius: f64) -> Result<FrameMatch> {
    check_radius(match_radius, "match radius")?;
    let r2 = match_radius * match_radius;
    let mut pairs = Vec::new();
    for (di, d) in dets.iter().enumerate() {
        for (ti, &(tr, tc)) in truths.iter().enumerate() {
            let dr = d.row as f64 - tr as f64;
            let dc = d.col as f64 - tc as f64;
            let d2 = dr * dr + dc * dc;
            if d2 <= r2 {
                pairs.push((d2, di, ti));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut det_used = vec![false; dets.len()];
    let mut truth_used = vec![false; truths.len()];
    let mut tp = 0;
    for (_, di, ti) in pairs {
        if !det_used[di] && !truth_used[ti] {
            det_used[di] = true;
            truth_used[ti] = true;
            tp += 1;
        }
    }
    Ok(FrameMatch {
        true_positives: tp,
        false_negatives: truths.len() - tp,
        false_alarms: dets.len() - tp,
    })
}

/// Matches a single frame's declarations against its truths.
pub fn match_detections(
    dets: &[Detection],
    truths: &[(usize, usize)],
    match_radius: f64,
) -> Result<MatchResult> {
    let mut out = MatchResult::default();
    out.push(match_frame(dets, truths, match_radius)?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filterbank::{gaussian_filter, ricker_hat_filter, HatParams};
    use crate::irdatagen::{synth_scene, ClutterKind, SceneConfig};
    use proptest::prelude::*;

    fn det(row: usize, col: usize, score: f64) -> Detection {
        Detection { row, col, score }
    }

    #[test]
    fn flat_frame_has_no_detections() {
        let scorer = Scorer::from_filter(&gaussian_filter(15, 1.2).unwrap()).unwrap();
        let frame = Patch::filled(40, 40, 500.0);
        assert!(sliding_detect(&frame, &scorer, 1e-9, 7.0).unwrap().is_empty());
    }

    #[test]
    fn window_larger_than_frame() {
        let scorer = Scorer::from_filter(&gaussian_filter(15, 1.2).unwrap()).unwrap();
        assert!(matches!(
            sliding_detect(&Patch::filled(10, 40, 1.0), &scorer, 0.0, 7.0),
            Err(Error::SizeMismatch(_))
        ));
    }

    #[test]
    fn single_clean_target_gives_one_detection() {
        let hat = ricker_hat_filter(15, &HatParams::default()).unwrap();
        let scorer = Scorer::from_filter(&hat).unwrap();
        for seed in 0..5 {
            let scene = synth_scene(&SceneConfig {
                width: 64,
                height: 64,
                clutter_kind: ClutterKind::Collimator,
                clutter_strength: 0.0,
                noise_sigma: 0.0,
                bad_pixel_rate: 0.0,
                target_count: 1,
                rng_seed: seed,
                ..SceneConfig::default()
            })
            .unwrap();
            // the rounded PSF tail can leave faint, weakly correlated
            // structure; a modest threshold isolates the target
            let dets = sliding_detect(&scene.image, &scorer, 0.5, 7.0).unwrap();
            assert_eq!(dets.len(), 1, "seed {seed}: {dets:?}");
            let (tr, tc) = scene.truths[0];
            assert!(dets[0].row.abs_diff(tr) <= 1 && dets[0].col.abs_diff(tc) <= 1);
        }
    }

    #[test]
    fn threshold_above_max_is_empty() {
        let scorer = Scorer::from_filter(&gaussian_filter(9, 1.2).unwrap()).unwrap();
        let scene = synth_scene(&SceneConfig {
            width: 64,
            height: 64,
            ..SceneConfig::default()
        })
        .unwrap();
        let map = scorer.response_map(&scene.image).unwrap();
        let (_, _, top) = map.argmax();
        assert!(sliding_detect(&scene.image, &scorer, top, 7.0)
            .unwrap()
            .is_empty());
        assert_eq!(
            sliding_detect(&scene.image, &scorer, top - 1e-9, 7.0)
                .unwrap()
                .len(),
            1
        );
    }

    #[test]
    fn nms_keeps_isolated_peaks() {
        let mut map = ResponseMap {
            height: 20,
            width: 20,
            values: vec![0.0; 400],
        };
        map.values[5 * 20 + 5] = 0.9;
        map.values[5 * 20 + 8] = 0.8; // suppressed: 3 px from the stronger peak
        map.values[15 * 20 + 15] = 0.7;
        let c = nms_candidates(&map, 7, 7.0).unwrap();
        assert_eq!((c[0].row, c[0].col, c[0].score), (12, 12, 0.9));
        assert_eq!((c[1].row, c[1].col, c[1].score), (22, 22, 0.7));
        assert!(c[2..].iter().all(|d| d.score == 0.0));
    }

    #[test]
    fn matching_examples() {
        let truths = vec![(10, 10), (30, 40)];
        let exact: Vec<_> = truths.iter().map(|&(r, c)| det(r, c, 1.0)).collect();
        let m = match_frame(&exact, &truths, 2.0).unwrap();
        assert_eq!((m.true_positives, m.false_alarms, m.false_negatives), (2, 0, 0));

        let m = match_frame(&[], &truths, 2.0).unwrap();
        assert_eq!(m.false_negatives, 2);

        let m = match_frame(&[det(10, 11, 0.5), det(11, 10, 0.9)], &truths[..1], 2.0).unwrap();
        assert_eq!((m.true_positives, m.false_alarms, m.false_negatives), (1, 1, 0));

        // nearest pair wins even when listed second
        let m = match_frame(&[det(12, 10, 0.5), det(10, 10, 0.4)], &[(10, 10), (14, 10)], 2.0).unwrap();
        assert_eq!(m.true_positives, 2);

        assert!(match_frame(&[], &truths, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn matching_conserves_counts(
            dets in prop::collection::vec((0usize..30, 0usize..30), 0..20),
            truths in prop::collection::vec((0usize..30, 0usize..30), 0..10),
            radius in 0.5f64..5.0,
        ) {
            let dets: Vec<Detection> = dets.into_iter().map(|(r, c)| det(r, c, 1.0)).collect();
            let m = match_frame(&dets, &truths, radius).unwrap();
            prop_assert_eq!(m.truths(), truths.len());
            prop_assert_eq!(m.detections(), dets.len());
            prop_assert!(m.true_positives <= dets.len().min(truths.len()));
        }

        #[test]
        fn thresholding_commutes_with_nms(seed in 0u64..50, t in -0.5f64..0.9) {
            let scene = synth_scene(&SceneConfig {
                width: 64,
                height: 64,
                clutter_kind: ClutterKind::Terrain,
                target_count: 2,
                rng_seed: seed,
                ..SceneConfig::default()
            })
            .unwrap();
            let scorer = Scorer::from_filter(&gaussian_filter(7, 1.2).unwrap()).unwrap();
            let map = scorer.response_map(&scene.image).unwrap();
            // naive oracle: repeatedly take the strongest remaining
            // position above t and drop everything within the radius
            let mut left: Vec<usize> = (0..map.values.len()).filter(|&i| map.values[i] > t).collect();
            let mut direct = Vec::new();
            while !left.is_empty() {
                let best = *left
                    .iter()
                    .max_by(|&&a, &&b| map.values[a].total_cmp(&map.values[b]).then(b.cmp(&a)))
                    .unwrap();
                let (br, bc) = ((best / map.width) as f64, (best % map.width) as f64);
                direct.push(det(best / map.width + 3, best % map.width + 3, map.values[best]));
                left.retain(|&i| {
                    let (r, c) = ((i / map.width) as f64, (i % map.width) as f64);
                    (r - br).powi(2) + (c - bc).powi(2) > 49.0
                });
            }
            prop_assert_eq!(direct, sliding_detect(&scene.image, &scorer, t, 7.0).unwrap());
        }
    }
}
