use crate::error::{Error, Result};
use crate::patch::Patch;

use super::stats::{counted_sqrt, is_flat, is_flat_variance, mad, mean};

/// Dispersion measure used to normalize a patch before correlation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Deviation {
    /// `(p − μ) / (√(n−1)·σ)`: zero mean, unit L2 norm.
    Std,
    /// `(p − μ) / (√n·mad)`: zero mean, square-root free.
    Mad,
}

impl Deviation {
    pub fn as_str(self) -> &'static str {
        match self {
            Deviation::Std => "std",
            Deviation::Mad => "mad",
        }
    }
}

/// A normalized pixel vector together with the divisor that produced it.
///
/// `scale` is `√(n−1)·σ` (the L2 norm of the centered patch) in STD mode and
/// `√n·mad` in MAD mode, so `centered = unit × scale`.
#[derive(Clone, Debug)]
pub struct Normalized {
    pub(crate) unit: Vec<f64>,
    pub(crate) scale: f64,
    pub(crate) mode: Deviation,
}

impl Normalized {
    pub fn of(values: &[f64], mode: Deviation) -> Result<Self> {
        let mut unit = Vec::with_capacity(values.len());
        let scale = normalize_into(values, mode, &mut unit)?;
        Ok(Self { unit, scale, mode })
    }

    pub fn values(&self) -> &[f64] {
        &self.unit
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn mode(&self) -> Deviation {
        self.mode
    }
}

/// Normalizes `values` into `out` (cleared first) and returns the divisor.
/// Reusing `out` keeps sliding-window scoring allocation free.
pub fn normalize_into(values: &[f64], mode: Deviation, out: &mut Vec<f64>) -> Result<f64> {
    let n = values.len();
    let mu = mean(values);
    out.clear();
    out.extend(values.iter().map(|v| v - mu));
    let scale = match mode {
        Deviation::Std => {
            let ss: f64 = out.iter().map(|c| c * c).sum();
            if n < 2 || is_flat_variance(ss / (n - 1) as f64, values) {
                return Err(Error::DegeneratePatch("flat patch (std below threshold)"));
            }
            counted_sqrt(ss)
        }
        Deviation::Mad => {
            let m = mad(values, mu);
            if is_flat(m, values) {
                return Err(Error::DegeneratePatch("flat patch (mad below threshold)"));
            }
            (n as f64).sqrt() * m
        }
    };
    let inv = 1.0 / scale;
    out.iter_mut().for_each(|c| *c *= inv);
    Ok(scale)
}

pub fn normalize(p: &Patch, mode: Deviation) -> Result<Patch> {
    let n = Normalized::of(p.values(), mode)?;
    Patch::new(p.height(), p.width(), n.unit)
}

pub fn normalize_std(p: &Patch) -> Result<Patch> {
    normalize(p, Deviation::Std)
}

pub fn normalize_mad(p: &Patch) -> Result<Patch> {
    normalize(p, Deviation::Mad)
}

/// Normalized cross-correlation of two equally sized patches: the dot product
/// of their mode-normalized grids.
pub fn ncc_score(p: &Patch, f: &Patch, mode: Deviation) -> Result<f64> {
    if !p.same_shape(f) {
        return Err(Error::SizeMismatch(format!(
            "patch {}x{} vs filter {}x{}",
            p.height(),
            p.width(),
            f.height(),
            f.width()
        )));
    }
    let a = Normalized::of(p.values(), mode)?;
    let b = Normalized::of(f.values(), mode)?;
    Ok(crate::patch::dot(&a.unit, &b.unit))
}
