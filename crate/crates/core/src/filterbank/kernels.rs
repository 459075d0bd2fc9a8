use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::patch::Patch;
use crate::patchmath::{ncc_score, Deviation};

use super::quant::QFormat;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Precision {
    Ideal,
    Fixed(QFormat),
}

/// A named detection filter and the way it is scored.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterSpec {
    pub name: String,
    pub grid: Patch,
    pub deviation: Deviation,
    pub precision: Precision,
}

impl FilterSpec {
    pub fn new(name: impl Into<String>, grid: Patch, deviation: Deviation) -> Result<Self> {
        if !grid.is_square() || grid.width().is_multiple_of(2) {
            return Err(Error::InvalidShape(format!(
                "filter must be square with odd side, got {}x{}",
                grid.height(),
                grid.width()
            )));
        }
        Ok(Self {
            name: name.into(),
            grid,
            deviation,
            precision: Precision::Ideal,
        })
    }

    pub fn side(&self) -> usize {
        self.grid.width()
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_deviation(mut self, deviation: Deviation) -> Self {
        self.deviation = deviation;
        self
    }

    /// NCC score of a same-sized window in this filter's deviation mode.
    pub fn score(&self, window: &Patch) -> Result<f64> {
        ncc_score(window, &self.grid, self.deviation)
    }
}

fn check_odd(size: usize) -> Result<()> {
    if size == 0 || size.is_multiple_of(2) {
        return Err(Error::InvalidShape(format!(
            "filter side must be odd, got {size}"
        )));
    }
    Ok(())
}

/// Squared distance from the centre in pixels, as an exact integer.
fn offset_sq(size: usize, r: usize, c: usize) -> f64 {
    let h = (size / 2) as i64;
    let (dr, dc) = (r as i64 - h, c as i64 - h);
    (dr * dr + dc * dc) as f64
}

/// Isotropic Gaussian `exp(−d²/2σ²)` at integer offsets from the centre.
pub fn gaussian_filter(size: usize, sigma: f64) -> Result<FilterSpec> {
    check_odd(size)?;
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    let grid = Patch::from_fn(size, size, |r, c| {
        (-offset_sq(size, r, c) / (2.0 * sigma * sigma)).exp()
    });
    FilterSpec::new(format!("gauss-{sigma}"), grid, Deviation::Std)
}

/// Shape of the generated hat: a 2-D Ricker wavelet sampled on
/// `[−a, a]²` with a narrow Gaussian pit subtracted at the centre.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HatParams {
    /// `a`: the grid spans `[−a, a]` in wavelet coordinates.
    pub support_halfwidth: f64,
    pub ricker_sigma: f64,
    pub pit_depth: f64,
    pub pit_radius: f64,
}

impl Default for HatParams {
    fn default() -> Self {
        Self {
            support_halfwidth: 3.5,
            ricker_sigma: 1.0,
            pit_depth: 0.5,
            pit_radius: 0.2,
        }
    }
}

impl HatParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.support_halfwidth > 0.0
            && self.ricker_sigma > 0.0
            && self.pit_depth >= 0.0
            && self.pit_radius > 0.0
            && [
                self.support_halfwidth,
                self.ricker_sigma,
                self.pit_depth,
                self.pit_radius,
            ]
            .iter()
            .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid hat parameters {self:?}")))
        }
    }

    fn profile(&self, r2: f64) -> f64 {
        let s2 = self.ricker_sigma * self.ricker_sigma;
        let p2 = self.pit_radius * self.pit_radius;
        (1.0 - r2 / s2) * (-r2 / (2.0 * s2)).exp() - self.pit_depth * (-r2 / (2.0 * p2)).exp()
    }
}

const HAT_KEYS: [&str; 4] = ["support_halfwidth", "ricker_sigma", "pit_depth", "pit_radius"];

/// One line: `hat support_halfwidth=3.5 ricker_sigma=1 pit_depth=0.5 pit_radius=0.2`.
/// Values round-trip exactly.
impl fmt::Display for HatParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "hat support_halfwidth={} ricker_sigma={} pit_depth={} pit_radius={}",
            self.support_halfwidth, self.ricker_sigma, self.pit_depth, self.pit_radius
        )
    }
}

/// Parses the first non-blank, non-`#` line in the [`Display`](fmt::Display)
/// form; keys may come in any order but all four are required.
impl FromStr for HatParams {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let Some((i, line)) = s
            .lines()
            .enumerate()
            .find(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        else {
            return Err(Error::EmptyInput);
        };
        let line_no = i + 1;
        let mut words = line.split_whitespace();
        if words.next() != Some("hat") {
            return Err(Error::parse(line_no, "expected a line starting with `hat`"));
        }
        let mut vals = [None; 4];
        for w in words {
            let (k, v) = w
                .split_once('=')
                .ok_or_else(|| Error::parse(line_no, format!("expected key=value, got `{w}`")))?;
            let slot = HAT_KEYS
                .iter()
                .position(|&h| h == k)
                .ok_or_else(|| Error::parse(line_no, format!("unknown key `{k}`")))?;
            let v: f64 = v
                .parse()
                .map_err(|_| Error::parse(line_no, format!("invalid number for {k}: `{v}`")))?;
            vals[slot] = Some(v);
        }
        let [Some(a), Some(s), Some(d), Some(r)] = vals else {
            return Err(Error::parse(line_no, "need all four hat keys"));
        };
        let p = HatParams {
            support_halfwidth: a,
            ricker_sigma: s,
            pit_depth: d,
            pit_radius: r,
        };
        p.validate()?;
        Ok(p)
    }
}

/// Zero-sum hat filter. Every tap depends only on the integer squared
/// offset from the centre, so the grid is exactly symmetric under the
/// dihedral group.
pub fn ricker_hat_filter(size: usize, params: &HatParams) -> Result<FilterSpec> {
    check_odd(size)?;
    params.validate()?;
    let half = (size / 2) as f64;
    let step2 = if half == 0.0 {
        0.0
    } else {
        (params.support_halfwidth / half).powi(2)
    };
    let raw = Patch::from_fn(size, size, |r, c| params.profile(step2 * offset_sq(size, r, c)));
    let mean = raw.values().iter().sum::<f64>() / raw.len() as f64;
    let grid = raw.map(|v| v - mean);
    FilterSpec::new(format!("hat-{size}"), grid, Deviation::Std)
}

/// Central `new_size × new_size` window (trimming, not resampling).
pub fn crop_filter(f: &FilterSpec, new_size: usize) -> Result<FilterSpec> {
    check_odd(new_size)?;
    let side = f.side();
    if new_size > side {
        return Err(Error::InvalidShape(format!(
            "cannot crop a {side}x{side} filter to {new_size}x{new_size}"
        )));
    }
    let off = (side - new_size) / 2;
    Ok(FilterSpec {
        grid: f.grid.window(off, off, new_size, new_size)?,
        ..f.clone()
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HatFit {
    pub params: HatParams,
    pub similarity: f64,
}

fn similarity(target: &Patch, params: &HatParams) -> f64 {
    match ricker_hat_filter(target.width(), params) {
        // flat candidates (everything inside one lobe) rank last
        Ok(hat) => ncc_score(&hat.grid, target, Deviation::Std).unwrap_or(-1.0),
        Err(_) => -1.0,
    }
}

const SUPPORT_RANGE: (f64, f64) = (0.1, 20.0);
const PIT_DEPTH_RANGE: (f64, f64) = (0.0, 4.0);
const PIT_RADIUS_RANGE: (f64, f64) = (0.02, 4.0);

/// Maximizes `f` on `[lo, hi]` by golden-section search.
fn golden_max(mut lo: f64, mut hi: f64, iterations: usize, f: impl Fn(f64) -> f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..iterations {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    if f1 >= f2 {
        x1
    } else {
        x2
    }
}

/// Hat parameters that best match `trained` in NCC similarity.
///
/// The wavelet scale is fixed at `ricker_sigma = 1`: only the ratios
/// `a/σ` and `pit_radius/σ` change the sampled shape. A coarse grid picks
/// starting points, then each coordinate is refined in turn by
/// golden-section search within a bracket around the current value.
pub fn fit_hat(trained: &Patch) -> Result<HatFit> {
    if !trained.is_square() || trained.width().is_multiple_of(2) {
        return Err(Error::InvalidShape(
            "trained filter must be square with odd side".into(),
        ));
    }
    if ncc_score(trained, trained, Deviation::Std).is_err() {
        return Err(Error::FlatFilter);
    }

    let supports = (0..32).map(|i| 0.25 * 1.14f64.powi(i));
    let pits: Vec<(f64, f64)> = std::iter::once((0.0, 0.1))
        .chain(
            [0.05, 0.1, 0.2, 0.4, 0.8, 1.6]
                .iter()
                .flat_map(|&d| [0.05, 0.1, 0.2, 0.4, 0.8].map(|r| (d, r))),
        )
        .collect();
    let mut coarse: Vec<(f64, HatParams)> = supports
        .flat_map(|a| {
            pits.iter().map(move |&(d, r)| HatParams {
                support_halfwidth: a,
                ricker_sigma: 1.0,
                pit_depth: d,
                pit_radius: r,
            })
        })
        .map(|p| (similarity(trained, &p), p))
        .collect();
    coarse.sort_by(|x, y| y.0.total_cmp(&x.0));

    // pit depth and radius trade off against each other, so several coarse
    // optima are refined rather than just the best one
    let (similarity, params) = coarse
        .iter()
        .take(REFINED_STARTS)
        .map(|&(sim, start)| refine(trained, start, sim))
        .max_by(|x, y| x.0.total_cmp(&y.0))
        .expect("coarse grid is non-empty");
    Ok(HatFit { params, similarity })
}

const REFINED_STARTS: usize = 8;

/// Cyclic coordinate search with shrinking brackets.
fn refine(trained: &Patch, start: HatParams, start_sim: f64) -> (f64, HatParams) {
    let mut best = start;
    let mut best_sim = start_sim;
    let clamp = |v: f64, (lo, hi): (f64, f64)| v.clamp(lo, hi);
    for round in 0..8 {
        // log-space brackets for the scale-like parameters
        let ratio = 2f64.powf(1.0 / (round + 1) as f64);
        let a = golden_max(
            clamp(best.support_halfwidth / ratio, SUPPORT_RANGE).ln(),
            clamp(best.support_halfwidth * ratio, SUPPORT_RANGE).ln(),
            40,
            |x| {
                similarity(
                    trained,
                    &HatParams {
                        support_halfwidth: x.exp(),
                        ..best
                    },
                )
            },
        )
        .exp();
        let candidate = HatParams {
            support_halfwidth: a,
            ..best
        };
        try_improve(trained, &mut best, &mut best_sim, candidate);

        let span = 0.5 / (round + 1) as f64;
        let d = golden_max(
            clamp(best.pit_depth - span, PIT_DEPTH_RANGE),
            clamp(best.pit_depth + span, PIT_DEPTH_RANGE),
            40,
            |x| similarity(trained, &HatParams { pit_depth: x, ..best }),
        );
        let candidate = HatParams { pit_depth: d, ..best };
        try_improve(trained, &mut best, &mut best_sim, candidate);
        // the bracket above never evaluates its end points; a pit-free hat
        // must stay reachable
        let candidate = HatParams {
            pit_depth: 0.0,
            ..best
        };
        try_improve(trained, &mut best, &mut best_sim, candidate);

        if best.pit_depth > 0.0 {
            let r = golden_max(
                clamp(best.pit_radius / ratio, PIT_RADIUS_RANGE).ln(),
                clamp(best.pit_radius * ratio, PIT_RADIUS_RANGE).ln(),
                40,
                |x| {
                    similarity(
                        trained,
                        &HatParams {
                            pit_radius: x.exp(),
                            ..best
                        },
                    )
                },
            )
            .exp();
            let candidate = HatParams {
                pit_radius: r,
                ..best
            };
            try_improve(trained, &mut best, &mut best_sim, candidate);
        }
    }
    (best_sim, best)
}

fn try_improve(target: &Patch, best: &mut HatParams, best_sim: &mut f64, candidate: HatParams) {
    let s = similarity(target, &candidate);
    if s > *best_sim {
        *best_sim = s;
        *best = candidate;
    }
}
