//! Shared inputs for the benchmarks: one cluttered frame and a small
//! labeled batch, both fixed by seed.

use nccdet::irdatagen::{synth_scene, ClutterKind, SceneConfig};
use nccdet::nccnet::LabeledPatch;
use nccdet::Patch;

pub const FRAME_SIDE: usize = 128;

pub fn frame() -> Patch {
    synth_scene(&SceneConfig {
        width: FRAME_SIDE,
        height: FRAME_SIDE,
        clutter_kind: ClutterKind::Terrain,
        bad_pixel_rate: 5e-4,
        rng_seed: 11,
        ..SceneConfig::default()
    })
    .expect("valid scene config")
    .image
}

/// `count` 15×15 windows cut from [`frame`], alternately labeled ±1.
pub fn batch(count: usize) -> Vec<LabeledPatch> {
    let f = frame();
    let span = FRAME_SIDE - 15;
    (0..count)
        .map(|i| LabeledPatch {
            patch: f
                .window((i * 7) % span, (i * 13) % span, 15, 15)
                .expect("inside frame"),
            label: if i % 2 == 0 { 1.0 } else { -1.0 },
        })
        .collect()
}
