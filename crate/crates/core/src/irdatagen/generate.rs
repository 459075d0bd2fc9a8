use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::samples::{extract_samples, Label, LabeledSample, NEGATIVE_AUGMENTATION, POSITIVE_AUGMENTATION};
use super::scene::{synth_scene, ClutterKind, Scene, SceneConfig};
use super::subsample::subsample_negatives;

/// A batch of scenes: `scenes` backgrounds cycling through `clutter`, each
/// rendered `frames_per_scene` times with fresh targets, noise and defects.
#[derive(Clone, Debug, PartialEq)]
pub struct DatagenConfig {
    pub scenes: usize,
    pub frames_per_scene: usize,
    pub clutter: Vec<ClutterKind>,
    /// Template for every frame; `clutter_kind` and `rng_seed` are replaced.
    pub scene: SceneConfig,
    /// Negatives kept after subsampling; `None` keeps all of them.
    pub negative_budget: Option<usize>,
    pub seed: u64,
}

impl DatagenConfig {
    /// The training set used throughout the tests: about 2,000 positives
    /// and 8,000 negatives picked from roughly 14,000 candidates.
    pub fn standard() -> Self {
        Self {
            scenes: 8,
            frames_per_scene: 42,
            clutter: vec![ClutterKind::Sky, ClutterKind::Terrain, ClutterKind::SeaGlint],
            scene: SceneConfig::default(),
            negative_budget: Some(8000),
            seed: 2024,
        }
    }

    /// Held-out frames for detection benchmarks: every clutter kind
    /// including collimator frames, bad pixels on, unrelated seed.
    pub fn standard_benchmark() -> Self {
        Self {
            scenes: 8,
            frames_per_scene: 5,
            clutter: ClutterKind::ALL.to_vec(),
            scene: SceneConfig {
                bad_pixel_rate: 5e-4,
                ..SceneConfig::default()
            },
            negative_budget: None,
            seed: 77,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.scenes == 0 || self.frames_per_scene == 0 {
            return Err(Error::InvalidConfig(
                "need at least one scene and one frame".into(),
            ));
        }
        if self.clutter.is_empty() {
            return Err(Error::InvalidConfig("need at least one clutter kind".into()));
        }
        self.scene.validate()
    }

    /// Per-frame configs in generation order; seeds are drawn from one
    /// stream so frames never share noise.
    pub fn frame_configs(&self) -> Vec<SceneConfig> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut out = Vec::with_capacity(self.scenes * self.frames_per_scene);
        for s in 0..self.scenes {
            let kind = self.clutter[s % self.clutter.len()];
            for _ in 0..self.frames_per_scene {
                out.push(SceneConfig {
                    clutter_kind: kind,
                    rng_seed: rng.random(),
                    ..self.scene.clone()
                });
            }
        }
        out
    }
}

pub fn generate_frames(cfg: &DatagenConfig) -> Result<Vec<Scene>> {
    cfg.validate()?;
    cfg.frame_configs().iter().map(synth_scene).collect()
}

/// Labeled samples from a set of scenes, with bookkeeping.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratedDataset {
    /// Positives first, then the kept negatives.
    pub samples: Vec<LabeledSample>,
    pub positives: usize,
    pub negative_candidates: usize,
    pub negatives: usize,
}

/// Extracts samples from every scene and subsamples the negatives down to
/// `budget` (all kept when `None` or when fewer are available).
pub fn build_dataset(scenes: &[Scene], budget: Option<usize>, seed: u64) -> Result<GeneratedDataset> {
    let (mut positives, mut negatives) = (Vec::new(), Vec::new());
    for scene in scenes {
        for s in extract_samples(scene) {
            match s.label {
                Label::Positive => positives.push(s),
                Label::Negative => negatives.push(s),
            }
        }
    }
    let negative_candidates = negatives.len();
    if let Some(b) = budget {
        if b < negatives.len() {
            negatives = subsample_negatives(&negatives, b, seed)?;
        }
    }
    let (n_pos, n_neg) = (positives.len(), negatives.len());
    positives.extend(negatives);
    Ok(GeneratedDataset {
        samples: positives,
        positives: n_pos,
        negative_candidates,
        negatives: n_neg,
    })
}

pub fn generate_dataset(cfg: &DatagenConfig) -> Result<(Vec<Scene>, GeneratedDataset)> {
    let scenes = generate_frames(cfg)?;
    let data = build_dataset(&scenes, cfg.negative_budget, cfg.seed)?;
    Ok((scenes, data))
}

/// Negative budget giving `positive_to_negative` as the ratio of augmented
/// positives to augmented negatives, e.g. `260.0 / 400.0`.
pub fn balanced_negative_budget(positives: usize, positive_to_negative: f64) -> Result<usize> {
    if !(positive_to_negative.is_finite() && positive_to_negative > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "class ratio must be positive, got {positive_to_negative}"
        )));
    }
    let augmented_pos = (positives * POSITIVE_AUGMENTATION) as f64;
    Ok((augmented_pos / positive_to_negative / NEGATIVE_AUGMENTATION as f64).round() as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> DatagenConfig {
        DatagenConfig {
            scenes: 3,
            frames_per_scene: 2,
            scene: SceneConfig {
                width: 64,
                height: 64,
                target_count: 2,
                ..SceneConfig::default()
            },
            negative_budget: Some(20),
            ..DatagenConfig::standard()
        }
    }

    #[test]
    fn frames_cycle_clutter_and_never_repeat_seeds() {
        let cfg = small();
        let frames = cfg.frame_configs();
        assert_eq!(frames.len(), 6);
        let kinds: Vec<_> = frames.iter().map(|f| f.clutter_kind).collect();
        use ClutterKind::*;
        assert_eq!(kinds, vec![Sky, Sky, Terrain, Terrain, SeaGlint, SeaGlint]);
        let mut seeds: Vec<_> = frames.iter().map(|f| f.rng_seed).collect();
        seeds.sort_unstable();
        seeds.dedup();
        assert_eq!(seeds.len(), 6);
    }

    #[test]
    fn dataset_counts_and_determinism() {
        let (scenes, data) = generate_dataset(&small()).unwrap();
        assert_eq!(scenes.len(), 6);
        assert_eq!(data.positives, 12);
        assert_eq!(data.negatives, 20);
        assert!(data.negative_candidates > 20);
        assert_eq!(data.samples.len(), 32);
        assert!(data.samples[..12].iter().all(|s| s.label == Label::Positive));
        assert!(data.samples[12..].iter().all(|s| s.label == Label::Negative));
        assert_eq!(generate_dataset(&small()).unwrap().1, data);
    }

    #[test]
    fn balance_control() {
        // 100 positives → 6400 augmented; 6400 / (260/400) ≈ 9846 augmented
        // negatives → 2462 before the 4× rotation
        let b = balanced_negative_budget(100, 260.0 / 400.0).unwrap();
        assert_eq!(b, 2462);
        let ratio = (100 * POSITIVE_AUGMENTATION) as f64 / (b * NEGATIVE_AUGMENTATION) as f64;
        assert!((ratio - 0.65).abs() < 1e-3);
        assert!(balanced_negative_budget(1, 0.0).is_err());
    }

    #[test]
    fn rejects_empty_configs() {
        assert!(DatagenConfig { scenes: 0, ..small() }.validate().is_err());
        assert!(DatagenConfig {
            clutter: vec![],
            ..small()
        }
        .validate()
        .is_err());
    }
}
