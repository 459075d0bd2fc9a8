use crate::error::{Error, Result};

use super::detect::{match_frame, Detection, MatchResult};

pub const DEFAULT_THRESHOLD_COUNT: usize = 512;

/// NMS survivors of one frame (strongest first) and its truths.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoredFrame {
    pub candidates: Vec<Detection>,
    pub truths: Vec<(usize, usize)>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub hit_rate: f64,
    pub fa_per_frame: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RocCurve {
    /// Strictly decreasing thresholds.
    pub points: Vec<RocPoint>,
    /// Area under hit rate over `[0, fa_limit]` false alarms per frame,
    /// divided by `fa_limit`.
    pub auc: f64,
    pub fa_limit: f64,
}

impl RocCurve {
    pub fn max_fa_per_frame(&self) -> f64 {
        self.points.iter().fold(0.0, |m, p| m.max(p.fa_per_frame))
    }
}

/// `count` evenly spaced thresholds from `max` down to `min`. The last one
/// is nudged just below `min` so every candidate passes it.
pub fn threshold_sweep(min: f64, max: f64, count: usize) -> Result<Vec<f64>> {
    if !(min.is_finite() && max.is_finite()) || min > max || count < 2 {
        return Err(Error::InvalidConfig(format!(
            "threshold sweep needs finite min <= max and at least 2 steps, got [{min}, {max}] x {count}"
        )));
    }
    let step = (max - min) / (count - 1) as f64;
    let mut t: Vec<f64> = (0..count).map(|k| max - k as f64 * step).collect();
    t[count - 1] = min.next_down();
    t.dedup();
    Ok(t)
}

/// Sweep spanning every candidate score in `frames`.
pub fn sweep_for(frames: &[ScoredFrame], count: usize) -> Result<Vec<f64>> {
    let (lo, hi) = frames
        .iter()
        .flat_map(|f| f.candidates.iter().map(|d| d.score))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
            (lo.min(s), hi.max(s))
        });
    if lo > hi {
        return Err(Error::EmptyInput);
    }
    threshold_sweep(lo, hi, count)
}

/// Matches the detections above `threshold` in every frame.
pub fn match_at(frames: &[ScoredFrame], threshold: f64, match_radius: f64) -> Result<MatchResult> {
    let mut out = MatchResult::default();
    for f in frames {
        let above = f.candidates.partition_point(|d| d.score > threshold);
        out.push(match_frame(&f.candidates[..above], &f.truths, match_radius)?);
    }
    Ok(out)
}

/// Normalized area under the (fa, hit-rate) curve, starting at the origin.
/// Past the last point the hit rate is held constant; a limit of 0 reports
/// the hit rate reached without any false alarm.
pub fn normalized_auc(points: &[RocPoint], fa_limit: f64) -> f64 {
    let mut pts: Vec<(f64, f64)> = vec![(0.0, 0.0)];
    pts.extend(points.iter().map(|p| (p.fa_per_frame, p.hit_rate)));
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    if fa_limit <= 0.0 {
        return pts.iter().filter(|p| p.0 == 0.0).fold(0.0, |m, p| m.max(p.1));
    }
    let mut area = 0.0;
    for w in pts.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if x0 >= fa_limit {
            break;
        }
        if x1 > fa_limit {
            let y = y0 + (y1 - y0) * (fa_limit - x0) / (x1 - x0);
            area += (fa_limit - x0) * (y0 + y) / 2.0;
            return area / fa_limit;
        }
        area += (x1 - x0) * (y0 + y1) / 2.0;
    }
    let (xl, yl) = *pts.last().expect("origin is present");
    if xl < fa_limit {
        area += (fa_limit - xl) * yl;
    }
    area / fa_limit
}

/// Hit rate `ΣTP / Σtruths` and false alarms per frame at each threshold.
/// The AUC is normalized to `fa_limit`, or to the largest observed FA/frame
/// when `None`.
pub fn roc_curve(
    frames: &[ScoredFrame],
    thresholds: &[f64],
    match_radius: f64,
    fa_limit: Option<f64>,
) -> Result<RocCurve> {
    if frames.is_empty() {
        return Err(Error::EmptyInput);
    }
    let truths: usize = frames.iter().map(|f| f.truths.len()).sum();
    if truths == 0 {
        return Err(Error::NoTruths);
    }
    let mut sorted = thresholds.to_vec();
    if sorted.iter().any(|t| t.is_nan()) {
        return Err(Error::InvalidConfig("NaN threshold".into()));
    }
    sorted.sort_by(|a, b| b.total_cmp(a));
    sorted.dedup();
    let mut points = Vec::with_capacity(sorted.len());
    for t in sorted {
        let m = match_at(frames, t, match_radius)?;
        points.push(RocPoint {
            threshold: t,
            hit_rate: m.true_positives as f64 / truths as f64,
            fa_per_frame: m.false_alarms as f64 / frames.len() as f64,
        });
    }
    let limit = fa_limit.unwrap_or_else(|| points.iter().fold(0.0, |m, p| m.max(p.fa_per_frame)));
    Ok(RocCurve {
        auc: normalized_auc(&points, limit),
        points,
        fa_limit: limit,
    })
}
