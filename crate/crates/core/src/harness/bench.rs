use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::filterbank::{
    crop_filter, gaussian_filter, quantize_filter, ricker_hat_filter, FilterSpec, FixedMadNcc, HatParams,
    QFormat, QuantizedFilter,
};
use crate::irdatagen::Frame;
use crate::nccnet::NetworkFile;
use crate::patch::Patch;
use crate::patchmath::Deviation;

use super::detect::{frame_candidates, Detection, DEFAULT_MATCH_RADIUS, DEFAULT_NMS_RADIUS};
use super::roc::{normalized_auc, roc_curve, sweep_for, RocCurve, ScoredFrame, DEFAULT_THRESHOLD_COUNT};
use super::scorer::Scorer;

/// Side of the full-size hat and Gaussian filters and the MAD-ratio window.
pub const BASE_FILTER_SIDE: usize = 15;

/// The comparison grid: hats at several sizes and precisions, three
/// Gaussians and the MAD-ratio detector.
pub const STANDARD_METHODS: [&str; 10] = [
    "hat-15",
    "hat-9",
    "hat-9-fixed",
    "hat-7",
    "hat-7-fixed",
    "hat-5-fixed",
    "gauss-0.5",
    "gauss-1.2",
    "gauss-2.0",
    "mad-ratio",
];

/// Inputs needed to turn a method name into a scorer.
#[derive(Clone, Debug, PartialEq)]
pub struct MethodContext {
    pub hat: HatParams,
    pub fixed_format: QFormat,
}

impl Default for MethodContext {
    fn default() -> Self {
        Self {
            hat: HatParams::default(),
            fixed_format: QFormat::Q8_7,
        }
    }
}

fn hat_method(rest: &str, ctx: &MethodContext, name: &str) -> Result<Scorer> {
    let (size, variant) = match rest.split_once('-') {
        Some((s, v)) => (s, Some(v)),
        None => (rest, None),
    };
    let size: usize = size.parse().map_err(|_| Error::UnknownMethod(name.to_string()))?;
    if size > BASE_FILTER_SIDE {
        return Err(Error::UnknownMethod(name.to_string()));
    }
    let full = ricker_hat_filter(BASE_FILTER_SIDE, &ctx.hat)?;
    let spec = crop_filter(&full, size)?.renamed(name);
    let spec = match variant {
        None => spec,
        Some("mad") => spec.with_deviation(Deviation::Mad),
        Some("fixed") => quantize_filter(&spec.with_deviation(Deviation::Mad), ctx.fixed_format)?,
        Some(_) => return Err(Error::UnknownMethod(name.to_string())),
    };
    Scorer::from_filter(&spec)
}

fn gauss_method(rest: &str, name: &str) -> Result<Scorer> {
    let (sigma, mad) = match rest.strip_suffix("-mad") {
        Some(s) => (s, true),
        None => (rest, false),
    };
    let sigma: f64 = sigma
        .parse()
        .map_err(|_| Error::UnknownMethod(name.to_string()))?;
    let mut spec = gaussian_filter(BASE_FILTER_SIDE, sigma)?.renamed(name);
    if mad {
        spec = spec.with_deviation(Deviation::Mad);
    }
    Scorer::from_filter(&spec)
}

/// Resolves a method name:
///
/// * `hat-<size>` (STD), `hat-<size>-mad`, `hat-<size>-fixed` (integer
///   MAD-NCC): the hat cropped to `size`;
/// * `gauss-<sigma>`, `gauss-<sigma>-mad`: 15×15 Gaussians;
/// * `mad-ratio`: centre-pixel MAD ratio over 15×15 windows;
/// * `net:<path>`: a saved network;
/// * `filter:<path>`, `filter-mad:<path>`: a filter grid in text form;
/// * `qfilter:<path>`: a quantized filter for the integer pipeline.
pub fn resolve_method(name: &str, ctx: &MethodContext) -> Result<Scorer> {
    if let Some((kind, path)) = name.split_once(':') {
        let label = Path::new(path)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.to_string());
        return match kind {
            "net" => {
                let file = NetworkFile::load(path)?;
                Scorer::network(format!("net-{label}"), file.network)
            }
            "filter" | "filter-mad" => {
                let grid = Patch::read_text(std::io::BufReader::new(std::fs::File::open(path)?))?;
                let dev = if kind == "filter" {
                    Deviation::Std
                } else {
                    Deviation::Mad
                };
                Scorer::from_filter(&FilterSpec::new(format!("{kind}-{label}"), grid, dev)?)
            }
            "qfilter" => Ok(Scorer::fixed_mad(
                format!("qfilter-{label}"),
                FixedMadNcc::from_quantized(QuantizedFilter::load(path)?)?,
            )),
            _ => Err(Error::UnknownMethod(name.to_string())),
        };
    }
    if name == "mad-ratio" {
        return Scorer::mad_ratio(name, BASE_FILTER_SIDE);
    }
    if let Some(rest) = name.strip_prefix("hat-") {
        return hat_method(rest, ctx, name);
    }
    if let Some(rest) = name.strip_prefix("gauss-") {
        return gauss_method(rest, name);
    }
    Err(Error::UnknownMethod(name.to_string()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub nms_radius: f64,
    pub match_radius: f64,
    pub threshold_count: usize,
    /// Wall-clock timing makes reports non-reproducible, so it is opt-in.
    pub timing: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            nms_radius: DEFAULT_NMS_RADIUS,
            match_radius: DEFAULT_MATCH_RADIUS,
            threshold_count: DEFAULT_THRESHOLD_COUNT,
            timing: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MethodReport {
    pub name: String,
    pub frames: Vec<ScoredFrame>,
    pub roc: RocCurve,
    pub ms_per_frame: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub methods: Vec<MethodReport>,
    /// Common false-alarm range all AUCs are normalized to: the largest
    /// FA/frame any method reaches.
    pub fa_limit: f64,
}

impl BenchReport {
    pub fn auc(&self, method: &str) -> Option<f64> {
        self.methods.iter().find(|m| m.name == method).map(|m| m.roc.auc)
    }

    /// `method,threshold,hit_rate,fa_per_frame`
    pub fn roc_csv(&self) -> String {
        let mut s = String::from("method,threshold,hit_rate,fa_per_frame\n");
        for m in &self.methods {
            for p in &m.roc.points {
                let _ = writeln!(s, "{},{},{},{}", m.name, p.threshold, p.hit_rate, p.fa_per_frame);
            }
        }
        s
    }

    /// `method,auc,ms_per_frame`; the timing column is empty unless timing
    /// was requested.
    pub fn auc_csv(&self) -> String {
        let mut s = String::from("method,auc,ms_per_frame\n");
        for m in &self.methods {
            let ms = m.ms_per_frame.map(|v| format!("{v:.3}")).unwrap_or_default();
            let _ = writeln!(s, "{},{},{ms}", m.name, m.roc.auc);
        }
        s
    }

    /// `method,frame,row,col,score` for every NMS survivor, enough to
    /// recompute the curves with [`report_from_scores`].
    pub fn scores_csv(&self) -> String {
        let mut s = String::from("method,frame,row,col,score\n");
        for m in &self.methods {
            for (i, f) in m.frames.iter().enumerate() {
                for d in &f.candidates {
                    let _ = writeln!(s, "{},{i},{},{},{}", m.name, d.row, d.col, d.score);
                }
            }
        }
        s
    }

    pub fn write_csvs(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("roc.csv"), self.roc_csv())?;
        std::fs::write(dir.join("auc.csv"), self.auc_csv())?;
        std::fs::write(dir.join("scores.csv"), self.scores_csv())?;
        Ok(())
    }
}

/// Builds per-method curves from scored frames, normalizing every AUC to
/// the common false-alarm range.
pub fn assemble_report(
    scored: Vec<(String, Vec<ScoredFrame>, Option<f64>)>,
    cfg: &BenchConfig,
) -> Result<BenchReport> {
    let mut methods = Vec::with_capacity(scored.len());
    for (name, frames, ms_per_frame) in scored {
        let thresholds = sweep_for(&frames, cfg.threshold_count)?;
        let roc = roc_curve(&frames, &thresholds, cfg.match_radius, None)?;
        methods.push(MethodReport {
            name,
            frames,
            roc,
            ms_per_frame,
        });
    }
    let fa_limit = methods
        .iter()
        .fold(0.0f64, |m, r| m.max(r.roc.max_fa_per_frame()));
    for m in &mut methods {
        m.roc.auc = normalized_auc(&m.roc.points, fa_limit);
        m.roc.fa_limit = fa_limit;
    }
    Ok(BenchReport { methods, fa_limit })
}

/// Scores every frame with every scorer. Frames are processed in order, so
/// the report depends only on its inputs (timings aside).
pub fn run_benchmark(frames: &[Frame], scorers: &[Scorer], cfg: &BenchConfig) -> Result<BenchReport> {
    if frames.is_empty() || scorers.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut names = std::collections::HashSet::new();
    if let Some(dup) = scorers.iter().find(|s| !names.insert(s.name())) {
        return Err(Error::InvalidConfig(format!(
            "method `{}` listed twice",
            dup.name()
        )));
    }
    let mut scored = Vec::with_capacity(scorers.len());
    for s in scorers {
        let start = Instant::now();
        let per_frame = frames
            .iter()
            .map(|f| {
                Ok(ScoredFrame {
                    candidates: frame_candidates(&f.image, s, cfg.nms_radius)?,
                    truths: f.truths.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let ms = cfg
            .timing
            .then(|| start.elapsed().as_secs_f64() * 1e3 / frames.len() as f64);
        scored.push((s.name().to_string(), per_frame, ms));
    }
    assemble_report(scored, cfg)
}

/// Rebuilds a report from a stored `scores.csv` and the frames' truths.
/// Frames are numbered as in the truths list; methods keep their order of
/// first appearance.
pub fn report_from_scores(
    scores_csv: &str,
    truths: &[Vec<(usize, usize)>],
    cfg: &BenchConfig,
) -> Result<BenchReport> {
    let mut lines = scores_csv
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == "method,frame,row,col,score" => {}
        Some((i, _)) => {
            return Err(Error::parse(
                i + 1,
                "expected header `method,frame,row,col,score`",
            ))
        }
        None => return Err(Error::EmptyInput),
    }
    let mut order: Vec<String> = Vec::new();
    let mut per_method: BTreeMap<String, Vec<Vec<Detection>>> = BTreeMap::new();
    for (i, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let [method, frame, row, col, score] = fields[..] else {
            return Err(Error::parse(i + 1, "expected 5 fields"));
        };
        let bad = |what: &str| Error::parse(i + 1, format!("invalid {what}"));
        let frame: usize = frame.parse().map_err(|_| bad("frame"))?;
        if frame >= truths.len() {
            return Err(Error::parse(i + 1, format!("frame {frame} has no truth record")));
        }
        let det = Detection {
            row: row.parse().map_err(|_| bad("row"))?,
            col: col.parse().map_err(|_| bad("col"))?,
            score: score.parse().map_err(|_| bad("score"))?,
        };
        if !per_method.contains_key(method) {
            order.push(method.to_string());
        }
        let frames = per_method
            .entry(method.to_string())
            .or_insert_with(|| vec![Vec::new(); truths.len()]);
        frames[frame].push(det);
    }
    let scored = order
        .into_iter()
        .map(|name| {
            let frames = per_method.remove(&name).expect("recorded above");
            let frames = frames
                .into_iter()
                .zip(truths)
                .map(|(mut candidates, t)| {
                    candidates.sort_by(|a, b| b.score.total_cmp(&a.score));
                    ScoredFrame {
                        candidates,
                        truths: t.clone(),
                    }
                })
                .collect();
            (name, frames, None)
        })
        .collect();
    assemble_report(scored, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::irdatagen::{synth_scene, ClutterKind, SceneConfig};

    fn frames(n: u64, kind: ClutterKind) -> Vec<Frame> {
        (0..n)
            .map(|seed| {
                synth_scene(&SceneConfig {
                    width: 80,
                    height: 80,
                    clutter_kind: kind,
                    target_count: 3,
                    rng_seed: seed,
                    ..SceneConfig::default()
                })
                .unwrap()
                .into()
            })
            .collect()
    }

    #[test]
    fn resolves_the_standard_grid() {
        let ctx = MethodContext::default();
        for name in STANDARD_METHODS {
            let s = resolve_method(name, &ctx).unwrap();
            assert_eq!(s.name(), name);
        }
        assert_eq!(resolve_method("hat-7-fixed", &ctx).unwrap().side(), 7);
        assert_eq!(resolve_method("gauss-1.2-mad", &ctx).unwrap().side(), 15);
        for bad in [
            "hat-17",
            "hat-9-float",
            "gauss-x",
            "ipi",
            "net:/nonexistent/x.net",
            "what:x",
        ] {
            assert!(resolve_method(bad, &ctx).is_err(), "{bad}");
        }
        assert!(matches!(
            resolve_method("ipi", &ctx),
            Err(Error::UnknownMethod(_))
        ));
        assert!(matches!(
            resolve_method("net:/nonexistent/x.net", &ctx),
            Err(Error::Io(_))
        ));
    }

    #[test]
    fn easy_regime_gaussian_is_near_perfect() {
        let clean: Vec<Frame> = (0..6)
            .map(|seed| {
                synth_scene(&SceneConfig {
                    width: 80,
                    height: 80,
                    clutter_kind: ClutterKind::Collimator,
                    clutter_strength: 0.0,
                    bad_pixel_rate: 0.0,
                    noise_sigma: 2.0,
                    target_amplitude: 200.0,
                    target_count: 3,
                    rng_seed: seed,
                    ..SceneConfig::default()
                })
                .unwrap()
                .into()
            })
            .collect();
        let scorer = resolve_method("gauss-1.2", &MethodContext::default()).unwrap();
        let report = run_benchmark(&clean, &[scorer], &BenchConfig::default()).unwrap();
        assert!(report.methods[0].roc.auc > 0.99, "{}", report.methods[0].roc.auc);
    }

    #[test]
    fn reports_are_reproducible_and_rebuildable() {
        let fr = frames(3, ClutterKind::Terrain);
        let ctx = MethodContext::default();
        let run = || {
            let scorers: Vec<Scorer> = ["hat-9", "mad-ratio"]
                .iter()
                .map(|m| resolve_method(m, &ctx).unwrap())
                .collect();
            run_benchmark(&fr, &scorers, &BenchConfig::default()).unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.roc_csv(), b.roc_csv());
        assert_eq!(a.auc_csv(), b.auc_csv());
        assert!(a.auc_csv().lines().nth(1).unwrap().ends_with(','));

        let truths: Vec<_> = fr.iter().map(|f| f.truths.clone()).collect();
        let rebuilt = report_from_scores(&a.scores_csv(), &truths, &BenchConfig::default()).unwrap();
        assert_eq!(rebuilt.roc_csv(), a.roc_csv());
        assert_eq!(rebuilt.auc_csv(), a.auc_csv());

        let dir = tempfile::tempdir().unwrap();
        a.write_csvs(dir.path()).unwrap();
        let roc = std::fs::read_to_string(dir.path().join("roc.csv")).unwrap();
        assert!(roc.starts_with("method,threshold,hit_rate,fa_per_frame\n"));
    }

    #[test]
    fn duplicate_methods_rejected() {
        let ctx = MethodContext::default();
        let s = vec![
            resolve_method("hat-9", &ctx).unwrap(),
            resolve_method("hat-9", &ctx).unwrap(),
        ];
        assert!(run_benchmark(&frames(1, ClutterKind::Sky), &s, &BenchConfig::default()).is_err());
    }
}
