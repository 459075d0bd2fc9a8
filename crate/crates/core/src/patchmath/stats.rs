use crate::error::{Error, Result};
use crate::patch::Patch;

/// Dispersion at or below `DEGENERACY_EPS × max|p|` marks a patch as flat.
pub const DEGENERACY_EPS: f64 = 1e-12;

/// Mean, sample standard deviation (n−1 denominator) and mean absolute
/// deviation of a patch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PatchStats {
    pub mean: f64,
    pub std: f64,
    pub mad: f64,
}

impl PatchStats {
    pub fn of(p: &Patch) -> Result<Self> {
        Ok(Self {
            mean: patch_mean(p),
            std: patch_std(p)?,
            mad: patch_mad(p),
        })
    }
}

pub fn patch_mean(p: &Patch) -> f64 {
    mean(p.values())
}

/// Sample standard deviation. Needs at least two pixels.
pub fn patch_std(p: &Patch) -> Result<f64> {
    let n = p.len();
    if n < 2 {
        return Err(Error::DegeneratePatch(
            "standard deviation needs at least 2 pixels",
        ));
    }
    let mu = mean(p.values());
    let ss: f64 = p.values().iter().map(|v| (v - mu) * (v - mu)).sum();
    Ok(counted_sqrt(ss / (n - 1) as f64))
}

pub fn patch_mad(p: &Patch) -> f64 {
    mad(p.values(), mean(p.values()))
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub(crate) fn mad(values: &[f64], mu: f64) -> f64 {
    values.iter().map(|v| (v - mu).abs()).sum::<f64>() / values.len() as f64
}

fn abs_max(values: &[f64]) -> f64 {
    values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

pub(crate) fn is_flat(dispersion: f64, values: &[f64]) -> bool {
    let scale = abs_max(values);
    scale == 0.0 || dispersion <= DEGENERACY_EPS * scale
}

/// Same test as [`is_flat`] on a variance, so no square root is taken.
pub(crate) fn is_flat_variance(variance: f64, values: &[f64]) -> bool {
    let bound = DEGENERACY_EPS * abs_max(values);
    bound == 0.0 || variance <= bound * bound
}

#[cfg(debug_assertions)]
thread_local! {
    static SQRT_CALLS: std::cell::Cell<u64> = const { std::cell::Cell::new(0) };
}

/// Square root used by every STD-mode code path. Debug builds count the
/// invocations per thread (see [`sqrt_calls`]).
#[inline]
pub fn counted_sqrt(x: f64) -> f64 {
    #[cfg(debug_assertions)]
    SQRT_CALLS.with(|c| c.set(c.get() + 1));
    x.sqrt()
}

/// Square roots taken on this thread since the last [`reset_sqrt_calls`].
/// `None` in release builds, where the counter is compiled out.
pub fn sqrt_calls() -> Option<u64> {
    #[cfg(debug_assertions)]
    {
        Some(SQRT_CALLS.with(|c| c.get()))
    }
    #[cfg(not(debug_assertions))]
    {
        None
    }
}

pub fn reset_sqrt_calls() {
    #[cfg(debug_assertions)]
    SQRT_CALLS.with(|c| c.set(0));
}
