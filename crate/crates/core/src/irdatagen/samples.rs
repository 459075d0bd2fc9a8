use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nccnet::SampleSource;
use crate::patch::Patch;

use super::scene::Scene;

pub const CORE_SIZE: usize = 15;
/// Extra pixels stored on every side of the core so shifted windows stay
/// inside recorded data.
pub const MARGIN: usize = 2;
pub const CONTEXT_SIZE: usize = CORE_SIZE + 2 * MARGIN;

/// Positive augmentation offsets on each axis; the unshifted window is not
/// part of the set.
pub const SHIFTS: [i32; 4] = [-2, -1, 1, 2];
pub const POSITIVE_AUGMENTATION: usize = 4 * SHIFTS.len() * SHIFTS.len();
pub const NEGATIVE_AUGMENTATION: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn value(&self) -> f64 {
        match self {
            Label::Positive => 1.0,
            Label::Negative => -1.0,
        }
    }
}

/// A 19×19 context around a 15×15 core.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSample {
    pub label: Label,
    pub context: Patch,
    /// `false` once the margin no longer holds real data (after shifting).
    pub margin_valid: bool,
}

impl LabeledSample {
    pub fn new(label: Label, context: Patch) -> Result<Self> {
        if context.height() != CONTEXT_SIZE || context.width() != CONTEXT_SIZE {
            return Err(Error::InvalidShape(format!(
                "sample context must be {CONTEXT_SIZE}x{CONTEXT_SIZE}, got {}x{}",
                context.height(),
                context.width()
            )));
        }
        Ok(Self {
            label,
            context,
            margin_valid: true,
        })
    }

    pub fn core(&self) -> Patch {
        self.core_at(0, 0)
    }

    fn core_at(&self, dy: i32, dx: i32) -> Patch {
        let off = |d: i32| (MARGIN as i32 + d) as usize;
        self.context
            .window(off(dy), off(dx), CORE_SIZE, CORE_SIZE)
            .expect("shift stays within the margin")
    }

    fn fill_core(&self, quarter_turns: u32, dy: i32, dx: i32, buf: &mut Vec<f64>) {
        buf.clear();
        let ctx = self.context.values();
        let (r0, c0) = (MARGIN as i32 + dy, MARGIN as i32 + dx);
        for r in 0..CORE_SIZE as i32 {
            for c in 0..CORE_SIZE as i32 {
                let (sr, sc) = rotated_source(quarter_turns, r0 + r, c0 + c);
                buf.push(ctx[sr * CONTEXT_SIZE + sc]);
            }
        }
    }
}

/// Source pixel of `(r, c)` in the context after `k` counter-clockwise
/// quarter turns (matches [`Patch::rotate`]).
fn rotated_source(k: u32, r: i32, c: i32) -> (usize, usize) {
    let m = CONTEXT_SIZE as i32 - 1;
    let (sr, sc) = match k % 4 {
        0 => (r, c),
        1 => (c, m - r),
        2 => (m - r, m - c),
        _ => (m - c, r),
    };
    (sr as usize, sc as usize)
}

/// Embeds a core in a zero margin.
fn with_zero_margin(core: &[f64]) -> Patch {
    let mut ctx = Patch::filled(CONTEXT_SIZE, CONTEXT_SIZE, 0.0);
    for r in 0..CORE_SIZE {
        for c in 0..CORE_SIZE {
            ctx.set(r + MARGIN, c + MARGIN, core[r * CORE_SIZE + c]);
        }
    }
    ctx
}

fn context_at(image: &Patch, row: usize, col: usize) -> Option<Patch> {
    image.window(row, col, CONTEXT_SIZE, CONTEXT_SIZE).ok()
}

/// One positive per truth (context centred on it; truths whose context does
/// not fit are skipped), then negatives tiling the frame with
/// non-overlapping cores on a `15`-pixel grid offset by the margin. A tile
/// is dropped when its core intersects the 15×15 neighbourhood of any
/// truth. Tiles containing bad pixels stay negative.
pub fn extract_samples(scene: &Scene) -> Vec<LabeledSample> {
    let img = &scene.image;
    let half = CONTEXT_SIZE / 2;
    let mut out = Vec::new();
    for &(r, c) in &scene.truths {
        if r < half || c < half {
            continue;
        }
        if let Some(ctx) = context_at(img, r - half, c - half) {
            out.push(LabeledSample::new(Label::Positive, ctx).expect("context size"));
        }
    }
    let tiles = |side: usize| (side.saturating_sub(2 * MARGIN)) / CORE_SIZE;
    let reach = (CORE_SIZE / 2) as i64;
    for ty in 0..tiles(img.height()) {
        for tx in 0..tiles(img.width()) {
            let (r0, c0) = (MARGIN + ty * CORE_SIZE, MARGIN + tx * CORE_SIZE);
            let hits_truth = scene.truths.iter().any(|&(tr, tc)| {
                let (tr, tc) = (tr as i64, tc as i64);
                let rows = (r0 as i64) <= tr + reach && tr - reach < (r0 + CORE_SIZE) as i64;
                let cols = (c0 as i64) <= tc + reach && tc - reach < (c0 + CORE_SIZE) as i64;
                rows && cols
            });
            if hits_truth {
                continue;
            }
            let ctx = context_at(img, r0 - MARGIN, c0 - MARGIN).expect("tiling fits the frame");
            out.push(LabeledSample::new(Label::Negative, ctx).expect("context size"));
        }
    }
    out
}

fn rotate_sample(s: &LabeledSample, k: u32) -> LabeledSample {
    LabeledSample {
        context: s.context.rotate(k),
        ..s.clone()
    }
}

/// 4 rotations × 16 shifts of a positive, each as a core in a zero margin.
pub fn augment_positive(s: &LabeledSample) -> Result<Vec<LabeledSample>> {
    if s.label != Label::Positive {
        return Err(Error::WrongLabel { expected: "positive" });
    }
    if !s.margin_valid {
        return Err(Error::InvalidConfig(
            "positive augmentation needs a valid margin".into(),
        ));
    }
    let mut buf = Vec::with_capacity(CORE_SIZE * CORE_SIZE);
    let mut out = Vec::with_capacity(POSITIVE_AUGMENTATION);
    for k in 0..4 {
        for dy in SHIFTS {
            for dx in SHIFTS {
                s.fill_core(k, dy, dx, &mut buf);
                out.push(LabeledSample {
                    label: Label::Positive,
                    context: with_zero_margin(&buf),
                    margin_valid: false,
                });
            }
        }
    }
    Ok(out)
}

/// The negative and its three rotations.
pub fn augment_negative(s: &LabeledSample) -> Result<Vec<LabeledSample>> {
    if s.label != Label::Negative {
        return Err(Error::WrongLabel { expected: "negative" });
    }
    Ok((0..4).map(|k| rotate_sample(s, k)).collect())
}

/// Lazily augmented view of a sample set for training: each positive
/// expands to 64 cores and each negative to 4, synthesized on access.
pub struct AugmentedSet<'a> {
    base: &'a [LabeledSample],
    /// `starts[i]` is the first augmented index of base sample `i`.
    starts: Vec<usize>,
    total: usize,
}

impl<'a> AugmentedSet<'a> {
    pub fn new(base: &'a [LabeledSample]) -> Result<Self> {
        let mut starts = Vec::with_capacity(base.len());
        let mut total = 0;
        for s in base {
            if s.label == Label::Positive && !s.margin_valid {
                return Err(Error::InvalidConfig(
                    "positive augmentation needs a valid margin".into(),
                ));
            }
            starts.push(total);
            total += match s.label {
                Label::Positive => POSITIVE_AUGMENTATION,
                Label::Negative => NEGATIVE_AUGMENTATION,
            };
        }
        Ok(Self { base, starts, total })
    }

    fn locate(&self, index: usize) -> (&LabeledSample, usize) {
        let i = self.starts.partition_point(|&s| s <= index) - 1;
        (&self.base[i], index - self.starts[i])
    }
}

impl SampleSource for AugmentedSet<'_> {
    fn len(&self) -> usize {
        self.total
    }

    fn label(&self, index: usize) -> f64 {
        self.locate(index).0.label.value()
    }

    fn fill(&self, index: usize, buf: &mut Vec<f64>) {
        let (s, j) = self.locate(index);
        match s.label {
            Label::Positive => {
                let k = (j / 16) as u32;
                let dy = SHIFTS[(j / 4) % 4];
                let dx = SHIFTS[j % 4];
                s.fill_core(k, dy, dx, buf);
            }
            Label::Negative => s.fill_core(j as u32, 0, 0, buf),
        }
    }
}

/// Un-augmented cores, e.g. for held-out evaluation.
pub struct CoreSet<'a>(pub &'a [LabeledSample]);

impl SampleSource for CoreSet<'_> {
    fn len(&self) -> usize {
        self.0.len()
    }

    fn label(&self, index: usize) -> f64 {
        self.0[index].label.value()
    }

    fn fill(&self, index: usize, buf: &mut Vec<f64>) {
        self.0[index].fill_core(0, 0, 0, buf);
    }
}

/// Seeded split of each class separately; `train_fraction` of every class
/// goes to the first set.
pub fn split_samples(
    samples: &[LabeledSample],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<LabeledSample>, Vec<LabeledSample>)> {
    if !(0.0..=1.0).contains(&train_fraction) {
        return Err(Error::InvalidConfig(format!(
            "train fraction must be in [0, 1], got {train_fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut held) = (Vec::new(), Vec::new());
    for label in [Label::Positive, Label::Negative] {
        let mut class: Vec<&LabeledSample> = samples.iter().filter(|s| s.label == label).collect();
        class.shuffle(&mut rng);
        let cut = (class.len() as f64 * train_fraction).round() as usize;
        train.extend(class[..cut].iter().map(|s| (*s).clone()));
        held.extend(class[cut..].iter().map(|s| (*s).clone()));
    }
    Ok((train, held))
}
