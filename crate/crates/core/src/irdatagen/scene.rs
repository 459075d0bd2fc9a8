use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::patch::Patch;

/// Targets keep this many pixels to every border, so a 19×19 context
/// centred on them fits inside the frame.
pub const TARGET_BORDER: usize = 9;
/// Minimum Chebyshev distance between two targets; their 15×15
/// neighbourhoods never overlap.
pub const TARGET_SEPARATION: usize = 16;
/// Bad pixels stay strictly farther than this from every target.
pub const BAD_PIXEL_CLEARANCE: f64 = 3.0;
pub const MIN_FRAME_SIDE: usize = 64;
/// Largest detector count.
pub const FULL_SCALE: f64 = 65535.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ClutterKind {
    /// Low-order polynomial gradient plus large smooth blobs.
    Sky,
    /// Sharp-edged regions with some medium-scale texture.
    Terrain,
    /// Rolling swell with bright multi-pixel glints.
    SeaGlint,
    /// Flat field.
    Collimator,
}

impl ClutterKind {
    pub const ALL: [ClutterKind; 4] = [
        ClutterKind::Sky,
        ClutterKind::Terrain,
        ClutterKind::SeaGlint,
        ClutterKind::Collimator,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ClutterKind::Sky => "sky",
            ClutterKind::Terrain => "terrain",
            ClutterKind::SeaGlint => "sea-glint",
            ClutterKind::Collimator => "collimator",
        }
    }
}

impl FromStr for ClutterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown clutter kind `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneConfig {
    pub width: usize,
    pub height: usize,
    pub clutter_kind: ClutterKind,
    /// Typical clutter amplitude in detector counts.
    pub clutter_strength: f64,
    pub target_count: usize,
    /// Nominal peak above the local background; each target draws its own
    /// peak from `[0.7, 1.3] ×` this value.
    pub target_amplitude: f64,
    pub psf_sigma: f64,
    pub noise_sigma: f64,
    /// Probability that a pixel is defective.
    pub bad_pixel_rate: f64,
    pub background_level: f64,
    pub rng_seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            width: 128,
            height: 128,
            clutter_kind: ClutterKind::Sky,
            clutter_strength: 40.0,
            target_count: 6,
            target_amplitude: 60.0,
            psf_sigma: 0.9,
            noise_sigma: 4.0,
            bad_pixel_rate: 2e-4,
            background_level: 1000.0,
            rng_seed: 0,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.width < MIN_FRAME_SIDE || self.height < MIN_FRAME_SIDE {
            return bad(format!(
                "frames must be at least {MIN_FRAME_SIDE}x{MIN_FRAME_SIDE}, got {}x{}",
                self.width, self.height
            ));
        }
        if !(self.psf_sigma.is_finite() && self.psf_sigma > 0.0) {
            return bad(format!("psf_sigma must be positive, got {}", self.psf_sigma));
        }
        for (name, v) in [
            ("clutter_strength", self.clutter_strength),
            ("target_amplitude", self.target_amplitude),
            ("noise_sigma", self.noise_sigma),
            ("background_level", self.background_level),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be a non-negative number, got {v}"));
            }
        }
        if !(0.0..1.0).contains(&self.bad_pixel_rate) {
            return bad(format!(
                "bad_pixel_rate must be in [0, 1), got {}",
                self.bad_pixel_rate
            ));
        }
        Ok(())
    }
}

/// A synthetic frame in integer detector counts with its ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub image: Patch,
    /// Target centres as (row, col).
    pub truths: Vec<(usize, usize)>,
    pub bad_pixels: Vec<(usize, usize)>,
}

fn place_targets(cfg: &SceneConfig, rng: &mut ChaCha8Rng) -> Result<Vec<(usize, usize)>> {
    let mut truths: Vec<(usize, usize)> = Vec::with_capacity(cfg.target_count);
    let rows = TARGET_BORDER..cfg.height - TARGET_BORDER;
    let cols = TARGET_BORDER..cfg.width - TARGET_BORDER;
    let mut attempts = 0;
    while truths.len() < cfg.target_count {
        attempts += 1;
        if attempts > 1000 * (cfg.target_count + 1) {
            return Err(Error::InvalidConfig(format!(
                "cannot place {} separated targets in a {}x{} frame",
                cfg.target_count, cfg.width, cfg.height
            )));
        }
        let r = rng.random_range(rows.clone());
        let c = rng.random_range(cols.clone());
        if truths
            .iter()
            .all(|&(tr, tc)| tr.abs_diff(r).max(tc.abs_diff(c)) >= TARGET_SEPARATION)
        {
            truths.push((r, c));
        }
    }
    Ok(truths)
}

fn add_gaussian(img: &mut [f64], w: usize, h: usize, r0: f64, c0: f64, sigma: f64, amp: f64) {
    let reach = (4.0 * sigma).ceil() + 1.0;
    let r_lo = (r0 - reach).floor().max(0.0) as usize;
    let r_hi = ((r0 + reach).ceil() as usize).min(h - 1);
    let c_lo = (c0 - reach).floor().max(0.0) as usize;
    let c_hi = ((c0 + reach).ceil() as usize).min(w - 1);
    let k = 1.0 / (2.0 * sigma * sigma);
    for r in r_lo..=r_hi {
        for c in c_lo..=c_hi {
            let d2 = (r as f64 - r0).powi(2) + (c as f64 - c0).powi(2);
            img[r * w + c] += amp * (-d2 * k).exp();
        }
    }
}

fn sky(img: &mut [f64], w: usize, h: usize, s: f64, rng: &mut ChaCha8Rng) {
    let a: [f64; 5] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
    for r in 0..h {
        let v = 2.0 * r as f64 / (h - 1) as f64 - 1.0;
        for c in 0..w {
            let u = 2.0 * c as f64 / (w - 1) as f64 - 1.0;
            img[r * w + c] += s * (a[0] * u + a[1] * v + a[2] * u * u + a[3] * u * v + a[4] * v * v);
        }
    }
    for _ in 0..rng.random_range(3..=6) {
        let (r0, c0) = (rng.random_range(0.0..h as f64), rng.random_range(0.0..w as f64));
        let sigma = rng.random_range(8.0..30.0);
        let amp = s * rng.random_range(-1.0..1.0);
        add_gaussian(img, w, h, r0, c0, sigma, amp);
    }
}

fn terrain(img: &mut [f64], w: usize, h: usize, s: f64, rng: &mut ChaCha8Rng) {
    for _ in 0..rng.random_range(3..=6) {
        let (r0, c0) = (rng.random_range(0.0..h as f64), rng.random_range(0.0..w as f64));
        let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let (nr, nc) = (angle.sin(), angle.cos());
        let step = s * rng.random_range(0.5..1.5) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let width = rng.random_range(0.5..1.5);
        for r in 0..h {
            for c in 0..w {
                let d = (r as f64 - r0) * nr + (c as f64 - c0) * nc;
                img[r * w + c] += step * 0.5 * (1.0 + (d / width).tanh());
            }
        }
    }
    for _ in 0..(w * h / 800) {
        let (r0, c0) = (rng.random_range(0.0..h as f64), rng.random_range(0.0..w as f64));
        let sigma = rng.random_range(2.5..5.0);
        let amp = s * rng.random_range(-0.5..0.5);
        add_gaussian(img, w, h, r0, c0, sigma, amp);
    }
}

fn sea_glint(img: &mut [f64], w: usize, h: usize, s: f64, rng: &mut ChaCha8Rng) {
    let period = rng.random_range(12.0..30.0);
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    for r in 0..h {
        let swell = 0.3 * s * (std::f64::consts::TAU * r as f64 / period + phase).sin();
        for c in 0..w {
            img[r * w + c] += swell;
        }
    }
    // glints are horizontal streaks of 2–5 pixels, never single pixels
    for _ in 0..(w * h / 150) {
        let len = rng.random_range(2..=5);
        let r = rng.random_range(0..h);
        let c0 = rng.random_range(0..w - len);
        let amp = s * rng.random_range(0.5..1.5);
        for c in c0..c0 + len {
            img[r * w + c] += amp * rng.random_range(0.6..1.0);
        }
    }
}

/// Renders a frame: background level and clutter, PSF targets, Gaussian
/// detector noise, rounding to integer counts in `[0, 65535]`, and finally
/// isolated bad pixels (mostly saturated, some dead).
pub fn synth_scene(cfg: &SceneConfig) -> Result<Scene> {
    cfg.validate()?;
    let (w, h) = (cfg.width, cfg.height);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let truths = place_targets(cfg, &mut rng)?;

    let mut img = vec![cfg.background_level; w * h];
    let s = cfg.clutter_strength;
    match cfg.clutter_kind {
        ClutterKind::Sky => sky(&mut img, w, h, s, &mut rng),
        ClutterKind::Terrain => terrain(&mut img, w, h, s, &mut rng),
        ClutterKind::SeaGlint => sea_glint(&mut img, w, h, s, &mut rng),
        ClutterKind::Collimator => {}
    }

    for &(r, c) in &truths {
        let jr = rng.random_range(-0.3..0.3);
        let jc = rng.random_range(-0.3..0.3);
        let amp = cfg.target_amplitude * rng.random_range(0.7..1.3);
        add_gaussian(&mut img, w, h, r as f64 + jr, c as f64 + jc, cfg.psf_sigma, amp);
    }

    if cfg.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, cfg.noise_sigma).expect("validated sigma");
        for v in &mut img {
            *v += normal.sample(&mut rng);
        }
    }
    for v in &mut img {
        *v = v.round().clamp(0.0, FULL_SCALE);
    }

    let mut bad_pixels: Vec<(usize, usize)> = Vec::new();
    if cfg.bad_pixel_rate > 0.0 {
        for r in 0..h {
            for c in 0..w {
                if !rng.random_bool(cfg.bad_pixel_rate) {
                    continue;
                }
                let near_target = truths.iter().any(|&(tr, tc)| {
                    let d2 = (tr as f64 - r as f64).powi(2) + (tc as f64 - c as f64).powi(2);
                    d2 <= BAD_PIXEL_CLEARANCE * BAD_PIXEL_CLEARANCE
                });
                let touches_bad = bad_pixels
                    .iter()
                    .any(|&(br, bc)| br.abs_diff(r) <= 1 && bc.abs_diff(c) <= 1);
                if near_target || touches_bad {
                    continue;
                }
                img[r * w + c] = if rng.random_bool(0.75) { FULL_SCALE } else { 0.0 };
                bad_pixels.push((r, c));
            }
        }
    }

    Ok(Scene {
        image: Patch::new(h, w, img)?,
        truths,
        bad_pixels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet(kind: ClutterKind) -> SceneConfig {
        SceneConfig {
            clutter_kind: kind,
            clutter_strength: 0.0,
            target_count: 0,
            noise_sigma: 0.0,
            bad_pixel_rate: 0.0,
            ..SceneConfig::default()
        }
    }

    #[test]
    fn quiet_collimator_frame_is_flat() {
        let s = synth_scene(&quiet(ClutterKind::Collimator)).unwrap();
        assert!(s.image.values().iter().all(|&v| v == 1000.0));
        assert!(s.truths.is_empty() && s.bad_pixels.is_empty());
    }

    #[test]
    fn lone_target_is_the_frame_maximum() {
        for seed in 0..20 {
            for sigma in [0.6, 1.0, 1.5] {
                let cfg = SceneConfig {
                    target_count: 1,
                    psf_sigma: sigma,
                    rng_seed: seed,
                    ..quiet(ClutterKind::Sky)
                };
                let s = synth_scene(&cfg).unwrap();
                let (tr, tc) = s.truths[0];
                let (mut best, mut at) = (f64::MIN, 0);
                for (i, &v) in s.image.values().iter().enumerate() {
                    if v > best {
                        best = v;
                        at = i;
                    }
                }
                let (r, c) = (at / cfg.width, at % cfg.width);
                assert!(r.abs_diff(tr) <= 1 && c.abs_diff(tc) <= 1);
            }
        }
    }

    #[test]
    fn scenes_are_seed_deterministic() {
        for kind in ClutterKind::ALL {
            let cfg = SceneConfig {
                clutter_kind: kind,
                rng_seed: 9,
                bad_pixel_rate: 1e-3,
                ..SceneConfig::default()
            };
            assert_eq!(synth_scene(&cfg).unwrap(), synth_scene(&cfg).unwrap());
            let other = SceneConfig {
                rng_seed: 10,
                ..cfg.clone()
            };
            assert_ne!(
                synth_scene(&cfg).unwrap().image,
                synth_scene(&other).unwrap().image
            );
        }
    }

    #[test]
    fn layout_invariants() {
        for (seed, kind) in ClutterKind::ALL.into_iter().cycle().take(40).enumerate() {
            let cfg = SceneConfig {
                clutter_kind: kind,
                target_count: 10,
                bad_pixel_rate: 2e-3,
                rng_seed: seed as u64,
                ..SceneConfig::default()
            };
            let s = synth_scene(&cfg).unwrap();
            assert_eq!(s.truths.len(), 10);
            for (i, &(r, c)) in s.truths.iter().enumerate() {
                assert!(r >= TARGET_BORDER && r < cfg.height - TARGET_BORDER);
                assert!(c >= TARGET_BORDER && c < cfg.width - TARGET_BORDER);
                for &(r2, c2) in &s.truths[i + 1..] {
                    assert!(r.abs_diff(r2).max(c.abs_diff(c2)) >= TARGET_SEPARATION);
                }
                for &(br, bc) in &s.bad_pixels {
                    let d2 = (r as f64 - br as f64).powi(2) + (c as f64 - bc as f64).powi(2);
                    assert!(d2 > 9.0);
                }
            }
            for &(br, bc) in &s.bad_pixels {
                let v = s.image.get(br, bc);
                assert!(v == 0.0 || v == FULL_SCALE);
            }
            assert!(s
                .image
                .values()
                .iter()
                .all(|v| v.fract() == 0.0 && (0.0..=FULL_SCALE).contains(v)));
        }
    }

    #[test]
    fn config_validation() {
        let ok = SceneConfig::default();
        assert!(synth_scene(&SceneConfig {
            width: 63,
            ..ok.clone()
        })
        .is_err());
        assert!(synth_scene(&SceneConfig {
            psf_sigma: 0.0,
            ..ok.clone()
        })
        .is_err());
        assert!(synth_scene(&SceneConfig {
            bad_pixel_rate: 1.0,
            ..ok.clone()
        })
        .is_err());
        assert!(synth_scene(&SceneConfig {
            noise_sigma: -1.0,
            ..ok.clone()
        })
        .is_err());
        assert!(synth_scene(&SceneConfig {
            target_count: 200,
            ..ok
        })
        .is_err());
        assert_eq!("sea-glint".parse::<ClutterKind>().unwrap(), ClutterKind::SeaGlint);
        assert!("fog".parse::<ClutterKind>().is_err());
    }
}
